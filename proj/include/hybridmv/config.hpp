#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridmv/backtest.hpp"
#include "hybridmv/errors.hpp"
#include "hybridmv/market_core.hpp"
#include "hybridmv/spectra.hpp"
#include "hybridmv/stochastic_markets.hpp"

namespace hybridmv::config {

using json = nlohmann::json;

enum class ModelKind { mv, srmv, vrmv, static_srmv, static_vrmv };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::mv: return "mv";
        case ModelKind::srmv: return "srmv";
        case ModelKind::vrmv: return "vrmv";
        case ModelKind::static_srmv: return "static-srmv";
        case ModelKind::static_vrmv: return "static-vrmv";
    }
    return "unknown";
}

inline ModelKind model_kind(const std::string& s) {
    if (s == "mv") return ModelKind::mv;
    if (s == "srmv") return ModelKind::srmv;
    if (s == "vrmv") return ModelKind::vrmv;
    if (s == "static-srmv") return ModelKind::static_srmv;
    if (s == "static-vrmv") return ModelKind::static_vrmv;
    throw ConfigError("problem.model: unknown model kind '" + s + "'");
}

struct MarketSection {
    std::vector<double> knots;
    std::vector<double> r;
    std::vector<Vec> mu;
    std::vector<Mat> sigma;

    MarketModel build() const { return MarketModel(knots, r, mu, sigma); }
};

struct ScenarioSource {
    std::string csv;  // resolved path; empty when generated
    int generate = 0;
    std::uint64_t seed = 7;
    int steps = 1;
};

struct ProblemSection {
    ModelKind model = ModelKind::mv;
    double x0 = 1.0;
    double x_d = 1.2;
    double omega = 0.0;
    std::optional<Spectrum> spectrum;
    double gamma = 0.1;
    ScenarioSource scenarios;
    VrmvMode mode = VrmvMode::heuristic;
};

struct SimulationSection {
    SimConfig sim;
    RolloutMode mode = RolloutMode::self_financing;
    SortinoConvention sortino = SortinoConvention::semivariance;
    int bins = 50;
};

struct ProbePoint {
    double t, z, state;
};

struct PdeSection {
    enum class Kind { ou, heston } kind = Kind::ou;
    OuMarket ou;
    HestonMarket heston;
    PdeGrid grid;
    enum class Terminal { problem, constant } terminal = Terminal::problem;
    double constant = 1.0;
    std::vector<ProbePoint> probes;
    double tolerance = 1e-3;
    bool all_layers = false;
};

struct ReproduceSection {
    int paths = 10000;
    int steps = 2000;
    std::uint64_t seed = 20240101;
    RolloutMode mode = RolloutMode::closed_form;
    double x0 = 1.0;
    double x_d = 1.2;
    double omega = 0.3;
    double k_e = 10.0;
    double k_p = 0.6;
    double gamma = 0.1;
    int scenarios = 10000;
    std::uint64_t scenario_seed = 977;
    int bins = 60;
    SortinoConvention sortino = SortinoConvention::semivariance;
};

struct ExperimentConfig {
    std::optional<MarketSection> market;
    std::optional<ProblemSection> problem;
    std::optional<SimulationSection> simulation;
    std::optional<PdeSection> pde;
    std::optional<ReproduceSection> reproduce;
    std::string output_dir = "out";
    std::filesystem::path base_dir = ".";
};

namespace detail {

inline void allow(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

inline double num(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(where + ": must be finite");
    return v;
}

inline double num(const json& j, const char* key, const std::string& where, double fallback) {
    return j.contains(key) ? num(j.at(key), where + "." + key) : fallback;
}

inline double positive(const json& j, const char* key, const std::string& where, double fallback) {
    double v = num(j, key, where, fallback);
    if (!(v > 0.0)) throw ConfigError(where + "." + key + ": must be > 0");
    return v;
}

inline int integer(const json& j, const char* key, const std::string& where, int fallback, int lo) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    long long x = v.get<long long>();
    if (x < lo || x > 1000000000LL) throw ConfigError(where + "." + key + ": out of range");
    return static_cast<int>(x);
}

inline std::uint64_t seed(const json& j, const char* key, const std::string& where, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw ConfigError(where + "." + key + ": expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

inline std::string str(const json& j, const char* key, const std::string& where, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw ConfigError(where + "." + key + ": expected a string");
    return j.at(key).get<std::string>();
}

inline Vec vec(const json& j, const std::string& where) {
    if (j.is_number()) {
        Vec v(1);
        v << num(j, where);
        return v;
    }
    if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = num(j[i], where);
    return v;
}

inline Mat mat(const json& j, const std::string& where) {
    if (j.is_number()) {
        Mat m(1, 1);
        m << num(j, where);
        return m;
    }
    if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a square array of rows");
    const std::size_t n = j.size();
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!j[i].is_array() || j[i].size() != n) throw ConfigError(where + ": expected a square array of rows");
        for (std::size_t k = 0; k < n; ++k) m(i, k) = num(j[i][k], where);
    }
    return m;
}

inline MarketSection parse_market(const json& j) {
    allow(j, "market", {"r", "mu", "sigma", "T", "knots", "pieces"});
    MarketSection m;
    if (j.contains("pieces")) {
        if (j.contains("r") || j.contains("mu") || j.contains("sigma") || j.contains("T"))
            throw ConfigError("market: give either pieces+knots or r/mu/sigma/T, not both");
        if (!j.contains("knots")) throw ConfigError("market: pieces need knots");
        m.knots.clear();
        for (const auto& k : j.at("knots")) m.knots.push_back(num(k, "market.knots"));
        const json& ps = j.at("pieces");
        if (!ps.is_array()) throw ConfigError("market.pieces: expected an array");
        for (std::size_t i = 0; i < ps.size(); ++i) {
            std::string w = "market.pieces[" + std::to_string(i) + "]";
            allow(ps[i], w, {"r", "mu", "sigma"});
            for (const char* key : {"r", "mu", "sigma"})
                if (!ps[i].contains(key)) throw ConfigError(w + ": missing " + key);
            m.r.push_back(num(ps[i].at("r"), w + ".r"));
            m.mu.push_back(vec(ps[i].at("mu"), w + ".mu"));
            m.sigma.push_back(mat(ps[i].at("sigma"), w + ".sigma"));
        }
    } else {
        for (const char* key : {"r", "mu", "sigma"})
            if (!j.contains(key)) throw ConfigError(std::string("market: missing ") + key);
        if (j.contains("knots")) throw ConfigError("market: knots need pieces");
        double T = positive(j, "T", "market", 1.0);
        m.knots = {0.0, T};
        m.r = {num(j.at("r"), "market.r")};
        m.mu = {vec(j.at("mu"), "market.mu")};
        m.sigma = {mat(j.at("sigma"), "market.sigma")};
    }
    try {
        (void)m.build();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("market: ") + e.what());
    }
    return m;
}

inline Spectrum parse_spectrum(const json& j, const std::string& where) {
    allow(j, where, {"kind", "k_e", "k_p", "gamma"});
    std::string kind = str(j, "kind", where, "");
    try {
        if (kind == "exponential") return Spectrum::exponential(positive(j, "k_e", where, 10.0));
        if (kind == "power") return Spectrum::power(positive(j, "k_p", where, 0.6));
        if (kind == "expected_shortfall") return Spectrum::expected_shortfall(positive(j, "gamma", where, 0.1));
    } catch (const DomainError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ".kind: expected exponential, power or expected_shortfall");
}

inline ProblemSection parse_problem(const json& j, const std::filesystem::path& base) {
    allow(j, "problem", {"model", "x0", "x_d", "omega", "spectrum", "gamma", "scenarios", "mode"});
    ProblemSection p;
    if (!j.contains("model")) throw ConfigError("problem: missing model");
    p.model = model_kind(str(j, "model", "problem", ""));
    p.x0 = positive(j, "x0", "problem", 1.0);
    p.x_d = num(j, "x_d", "problem", 1.2);
    p.omega = num(j, "omega", "problem", 0.0);
    if (p.omega < 0.0) throw ConfigError("problem.omega: must be >= 0");
    p.gamma = num(j, "gamma", "problem", 0.1);
    if (!(p.gamma > 0.0 && p.gamma < 1.0)) throw ConfigError("problem.gamma: must lie in (0,1)");
    if (j.contains("spectrum")) p.spectrum = parse_spectrum(j.at("spectrum"), "problem.spectrum");
    bool needs_spectrum = p.model == ModelKind::srmv || p.model == ModelKind::static_srmv;
    if (needs_spectrum && !p.spectrum) throw ConfigError("problem: model " + to_string(p.model) + " needs a spectrum");
    bool is_static = p.model == ModelKind::static_srmv || p.model == ModelKind::static_vrmv;
    if (j.contains("scenarios")) {
        if (!is_static) throw ConfigError("problem.scenarios: only static models take scenarios");
        const json& s = j.at("scenarios");
        allow(s, "problem.scenarios", {"csv", "generate", "seed", "steps"});
        if (s.contains("csv") == s.contains("generate"))
            throw ConfigError("problem.scenarios: give exactly one of csv or generate");
        if (s.contains("csv")) p.scenarios.csv = (base / str(s, "csv", "problem.scenarios", "")).string();
        p.scenarios.generate = integer(s, "generate", "problem.scenarios", 0, 2);
        p.scenarios.seed = seed(s, "seed", "problem.scenarios", 7);
        p.scenarios.steps = integer(s, "steps", "problem.scenarios", 1, 1);
    } else if (is_static) {
        throw ConfigError("problem: static models need a scenarios section");
    }
    std::string mode = str(j, "mode", "problem", "heuristic");
    if (mode == "exact") p.mode = VrmvMode::exact;
    else if (mode == "heuristic") p.mode = VrmvMode::heuristic;
    else throw ConfigError("problem.mode: expected exact or heuristic");
    return p;
}

inline RolloutMode parse_mode(const json& j, const std::string& where, RolloutMode fallback) {
    std::string m = str(j, "mode", where, fallback == RolloutMode::closed_form ? "closed_form" : "self_financing");
    if (m == "closed_form") return RolloutMode::closed_form;
    if (m == "self_financing") return RolloutMode::self_financing;
    throw ConfigError(where + ".mode: expected closed_form or self_financing");
}

inline SortinoConvention parse_sortino(const json& j, const std::string& where) {
    std::string s = str(j, "sortino", where, "semivariance");
    if (s == "semivariance") return SortinoConvention::semivariance;
    if (s == "benchmark_downside") return SortinoConvention::benchmark_downside;
    throw ConfigError(where + ".sortino: expected semivariance or benchmark_downside");
}

inline SimulationSection parse_simulation(const json& j) {
    allow(j, "simulation", {"paths", "steps", "seed", "mode", "bins", "record_paths", "record_stride", "sortino"});
    SimulationSection s;
    s.sim.paths = integer(j, "paths", "simulation", 10000, 1);
    s.sim.steps = integer(j, "steps", "simulation", 2000, 1);
    s.sim.seed = seed(j, "seed", "simulation", 20240101);
    s.sim.record_paths = integer(j, "record_paths", "simulation", 0, 0);
    s.sim.record_stride = integer(j, "record_stride", "simulation", 1, 1);
    s.mode = parse_mode(j, "simulation", RolloutMode::self_financing);
    s.bins = integer(j, "bins", "simulation", 50, 2);
    s.sortino = parse_sortino(j, "simulation");
    return s;
}

inline PdeSection parse_pde(const json& j) {
    allow(j, "pde", {"market", "grid", "terminal", "constant", "probes", "tolerance", "all_layers"});
    PdeSection p;
    if (!j.contains("market")) throw ConfigError("pde: missing market");
    const json& m = j.at("market");
    std::string kind = str(m, "kind", "pde.market", "");
    if (kind == "ou") {
        allow(m, "pde.market", {"kind", "r", "sigma", "lambda", "theta_bar", "gamma_ou", "theta0", "T"});
        p.kind = PdeSection::Kind::ou;
        p.ou.r = num(m, "r", "pde.market", 0.0);
        p.ou.sigma = positive(m, "sigma", "pde.market", 0.2);
        p.ou.lambda = num(m, "lambda", "pde.market", 0.0);
        p.ou.theta_bar = num(m, "theta_bar", "pde.market", 0.0);
        p.ou.gamma_ou = num(m, "gamma_ou", "pde.market", 0.0);
        p.ou.theta0 = num(m, "theta0", "pde.market", 0.4);
        p.ou.T = positive(m, "T", "pde.market", 1.0);
        if (p.ou.lambda < 0.0 || p.ou.gamma_ou < 0.0) throw ConfigError("pde.market: lambda and gamma_ou must be >= 0");
    } else if (kind == "heston") {
        allow(m, "pde.market", {"kind", "mu", "r", "iota", "nu_bar", "xi", "nu0", "T"});
        p.kind = PdeSection::Kind::heston;
        p.heston.mu = num(m, "mu", "pde.market", 0.08);
        p.heston.r = num(m, "r", "pde.market", 0.0);
        p.heston.iota = positive(m, "iota", "pde.market", 1.0);
        p.heston.nu_bar = positive(m, "nu_bar", "pde.market", 0.04);
        p.heston.xi = positive(m, "xi", "pde.market", 0.1);
        p.heston.nu0 = positive(m, "nu0", "pde.market", 0.04);
        p.heston.T = positive(m, "T", "pde.market", 1.0);
    } else {
        throw ConfigError("pde.market.kind: expected ou or heston");
    }
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        allow(g, "pde.grid", {"nz", "ns", "steps", "store_every", "z_width_sd", "s_width_sd", "smoothing_steps"});
        p.grid.nz = integer(g, "nz", "pde.grid", p.grid.nz, 1);
        p.grid.ns = integer(g, "ns", "pde.grid", p.grid.ns, 1);
        p.grid.steps = integer(g, "steps", "pde.grid", p.grid.steps, 1);
        p.grid.store_every = integer(g, "store_every", "pde.grid", p.grid.store_every, 1);
        p.grid.z_width_sd = positive(g, "z_width_sd", "pde.grid", p.grid.z_width_sd);
        p.grid.s_width_sd = positive(g, "s_width_sd", "pde.grid", p.grid.s_width_sd);
        p.grid.smoothing_steps = integer(g, "smoothing_steps", "pde.grid", p.grid.smoothing_steps, 0);
    }
    std::string term = str(j, "terminal", "pde", "problem");
    if (term == "problem") p.terminal = PdeSection::Terminal::problem;
    else if (term == "constant") p.terminal = PdeSection::Terminal::constant;
    else throw ConfigError("pde.terminal: expected problem or constant");
    p.constant = num(j, "constant", "pde", 1.0);
    if (j.contains("probes")) {
        const json& pr = j.at("probes");
        if (!pr.is_array()) throw ConfigError("pde.probes: expected an array");
        for (std::size_t i = 0; i < pr.size(); ++i) {
            std::string w = "pde.probes[" + std::to_string(i) + "]";
            allow(pr[i], w, {"t", "z", "state"});
            for (const char* key : {"t", "z", "state"})
                if (!pr[i].contains(key)) throw ConfigError(w + ": missing " + key);
            p.probes.push_back({num(pr[i].at("t"), w), positive(pr[i], "z", w, 1.0), num(pr[i].at("state"), w)});
        }
    }
    p.tolerance = positive(j, "tolerance", "pde", 1e-3);
    if (j.contains("all_layers")) {
        if (!j.at("all_layers").is_boolean()) throw ConfigError("pde.all_layers: expected a boolean");
        p.all_layers = j.at("all_layers").get<bool>();
    }
    return p;
}

inline ReproduceSection parse_reproduce(const json& j) {
    allow(j, "reproduce", {"paths", "steps", "seed", "mode", "x0", "x_d", "omega", "k_e", "k_p", "gamma",
                           "scenarios", "scenario_seed", "bins", "sortino"});
    ReproduceSection r;
    r.paths = integer(j, "paths", "reproduce", r.paths, 1);
    r.steps = integer(j, "steps", "reproduce", r.steps, 1);
    r.seed = seed(j, "seed", "reproduce", r.seed);
    r.mode = parse_mode(j, "reproduce", RolloutMode::closed_form);
    r.x0 = positive(j, "x0", "reproduce", r.x0);
    r.x_d = num(j, "x_d", "reproduce", r.x_d);
    r.omega = num(j, "omega", "reproduce", r.omega);
    r.k_e = positive(j, "k_e", "reproduce", r.k_e);
    r.k_p = positive(j, "k_p", "reproduce", r.k_p);
    r.gamma = num(j, "gamma", "reproduce", r.gamma);
    if (!(r.gamma > 0.0 && r.gamma < 1.0)) throw ConfigError("reproduce.gamma: must lie in (0,1)");
    r.scenarios = integer(j, "scenarios", "reproduce", r.scenarios, 2);
    r.scenario_seed = seed(j, "scenario_seed", "reproduce", r.scenario_seed);
    r.bins = integer(j, "bins", "reproduce", r.bins, 2);
    r.sortino = parse_sortino(j, "reproduce");
    return r;
}

}  // namespace detail

inline ExperimentConfig parse(const json& j, const std::filesystem::path& base = ".") {
    detail::allow(j, "config", {"market", "problem", "simulation", "pde", "reproduce", "output"});
    ExperimentConfig c;
    c.base_dir = base;
    if (j.contains("market")) c.market = detail::parse_market(j.at("market"));
    if (j.contains("problem")) c.problem = detail::parse_problem(j.at("problem"), base);
    if (j.contains("simulation")) c.simulation = detail::parse_simulation(j.at("simulation"));
    if (j.contains("pde")) c.pde = detail::parse_pde(j.at("pde"));
    if (j.contains("reproduce")) c.reproduce = detail::parse_reproduce(j.at("reproduce"));
    if (j.contains("output")) {
        const json& o = j.at("output");
        detail::allow(o, "output", {"directory"});
        c.output_dir = detail::str(o, "directory", "output", c.output_dir);
    }
    if (c.problem && !c.market) throw ConfigError("config: problem needs a market section");
    return c;
}

inline ExperimentConfig load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse(j, file.parent_path().empty() ? std::filesystem::path(".") : file.parent_path());
}

}  // namespace hybridmv::config
