#pragma once

#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "hybridmv/errors.hpp"
#include "hybridmv/market_core.hpp"

namespace hybridmv {

// Flat "key = value" records; numbers are written with 17 significant digits so they read back exactly.
class SolutionRecord {
public:
    void set(const std::string& k, const std::string& v) { text_[k] = v; }
    void set(const std::string& k, double v) {
        std::ostringstream s;
        s << std::setprecision(17) << v;
        text_[k] = s.str();
    }

    bool has(const std::string& k) const { return text_.count(k) > 0; }

    const std::string& text(const std::string& k) const {
        auto it = text_.find(k);
        if (it == text_.end()) throw ConfigError("solution file: missing key '" + k + "'");
        return it->second;
    }

    double number(const std::string& k) const {
        const std::string& s = text(k);
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        try {
            std::size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("solution file: key '" + k + "' is not a number");
        }
    }

    void write(std::ostream& os) const {
        // model first, the rest sorted
        if (has("model")) os << "model = " << text("model") << '\n';
        for (const auto& [k, v] : text_)
            if (k != "model") os << k << " = " << v << '\n';
    }

    static SolutionRecord read(std::istream& in) {
        SolutionRecord r;
        std::string line;
        int n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.empty() || line[0] == '#') continue;
            auto eq = line.find(" = ");
            if (eq == std::string::npos) throw ConfigError("solution file: malformed line " + std::to_string(n));
            r.text_[line.substr(0, eq)] = line.substr(eq + 3);
        }
        return r;
    }

private:
    std::map<std::string, std::string> text_;
};

}  // namespace hybridmv
