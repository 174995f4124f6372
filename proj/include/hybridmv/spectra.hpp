#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <string>
#include <vector>

#include "hybridmv/errors.hpp"
#include "hybridmv/quadrature.hpp"

namespace hybridmv {

enum class SpectrumKind { exponential, power, expected_shortfall, dirac_var };

inline std::string to_string(SpectrumKind k) {
    switch (k) {
        case SpectrumKind::exponential: return "exponential";
        case SpectrumKind::power: return "power";
        case SpectrumKind::expected_shortfall: return "expected_shortfall";
        case SpectrumKind::dirac_var: return "dirac_var";
    }
    return "unknown";
}

// Weighting function psi of a quantile-based risk measure.
class Spectrum {
public:
    static Spectrum exponential(double k_e) {
        if (!(k_e > 0.0) || !std::isfinite(k_e)) throw DomainError("exponential spectrum: k_e must be > 0");
        return Spectrum(SpectrumKind::exponential, k_e);
    }
    static Spectrum power(double k_p) {
        if (!(k_p > 0.0 && k_p <= 1.0)) throw DomainError("power spectrum: k_p must lie in (0,1]");
        return Spectrum(SpectrumKind::power, k_p);
    }
    static Spectrum expected_shortfall(double gamma) {
        if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("expected shortfall: gamma must lie in (0,1]");
        return Spectrum(SpectrumKind::expected_shortfall, gamma);
    }
    static Spectrum dirac_var(double gamma) {
        if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("dirac VaR: gamma must lie in (0,1)");
        return Spectrum(SpectrumKind::dirac_var, gamma);
    }

    SpectrumKind kind() const { return kind_; }
    double param() const { return p_; }
    bool coherent() const { return kind_ != SpectrumKind::dirac_var; }
    bool differentiable() const {
        return kind_ == SpectrumKind::exponential || kind_ == SpectrumKind::power;
    }

    double psi(double s) const {
        switch (kind_) {
            case SpectrumKind::exponential: return p_ * std::exp(-p_ * s) / (-std::expm1(-p_));
            case SpectrumKind::power:
                if (p_ == 1.0) return 1.0;
                return s <= 0.0 ? kInfinity : p_ * std::pow(s, p_ - 1.0);
            case SpectrumKind::expected_shortfall: return (s >= 0.0 && s <= p_) ? 1.0 / p_ : 0.0;
            case SpectrumKind::dirac_var: break;
        }
        throw UnsupportedError("psi is not a function for the Dirac VaR spectrum");
    }

    double psi_prime(double s) const {
        switch (kind_) {
            case SpectrumKind::exponential: return -p_ * psi(s);
            case SpectrumKind::power:
                if (p_ == 1.0) return 0.0;
                return s <= 0.0 ? -kInfinity : p_ * (p_ - 1.0) * std::pow(s, p_ - 2.0);
            case SpectrumKind::expected_shortfall:
                if (s == p_) throw UnsupportedError("psi' undefined at the expected-shortfall step");
                return 0.0;
            case SpectrumKind::dirac_var: break;
        }
        throw UnsupportedError("psi' is not defined for the Dirac VaR spectrum");
    }

    // Psi(s) = integral of psi over [0, s]
    double cumulative(double s) const {
        s = std::clamp(s, 0.0, 1.0);
        switch (kind_) {
            case SpectrumKind::exponential: return std::expm1(-p_ * s) / std::expm1(-p_);
            case SpectrumKind::power: return std::pow(s, p_);
            case SpectrumKind::expected_shortfall: return std::min(s, p_) / p_;
            case SpectrumKind::dirac_var: return s >= p_ ? 1.0 : 0.0;
        }
        return 0.0;
    }

    // Integral of psi over [a, b] without cancellation in the tails.
    double mass(double a, double b) const {
        if (kind_ == SpectrumKind::exponential) {
            return std::exp(-p_ * a) * (-std::expm1(-p_ * (b - a))) / (-std::expm1(-p_));
        }
        return cumulative(b) - cumulative(a);
    }

    // Points of [0,1] where psi jumps.
    std::vector<double> breakpoints() const {
        if (kind_ == SpectrumKind::expected_shortfall || kind_ == SpectrumKind::dirac_var)
            return {p_};
        return {};
    }

private:
    static constexpr double kInfinity = std::numeric_limits<double>::infinity();
    Spectrum(SpectrumKind k, double p) : kind_(k), p_(p) {}
    SpectrumKind kind_;
    double p_;
};

struct ValidationReport {
    bool nonnegative = true;
    bool nonincreasing = true;
    bool unit_integral = true;
    bool coherent = true;
    double integral = 1.0;
};

// Quantile function on [0,1] with the points where it jumps or kinks.
struct QuantileFunction {
    std::function<double(double)> G;
    std::vector<double> breaks;
    double operator()(double s) const { return G(s); }
};

namespace detail {

// Integral over (0, b] of an integrand that may blow up integrably at 0.
template <class F>
double integrate_open_left(const F& f, double b, double tol) {
    double total = 0.0;
    double hi = b;
    for (int j = 0; j < 200 && hi > 1e-300; ++j) {
        double lo = 0.5 * hi;
        double part = quad::adaptive_simpson(f, lo, hi, {tol * 1e-2, 40});
        total += part;
        if (j > 20 && std::abs(part) < tol * 1e-3) break;
        hi = lo;
    }
    return total;
}

template <class F>
double integrate_pieces(const F& f, double a, double b, std::vector<double> breaks, double tol,
                        bool open_left) {
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> pts{a};
    for (double c : breaks)
        if (c > a && c < b) pts.push_back(c);
    pts.push_back(b);
    // endpoints at a jump are pulled inside the piece so each panel sees one branch of f
    auto inner = [&](std::size_t k, bool up) {
        double c = pts[k];
        bool jump = k > 0 && k + 1 < pts.size();
        if (!jump) return c;
        double d = 1e-12 * (up ? pts[k + 1] - c : c - pts[k - 1]);
        return up ? c + d : c - d;
    };
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        double lo = inner(i, true), hi = inner(i + 1, false);
        if (i == 0 && open_left) {
            double mid = lo + 0.5 * (hi - lo);
            total += integrate_open_left([&](double x) { return f(lo + x); }, mid - lo, tol);
            total += quad::adaptive_simpson(f, mid, hi, {tol, 40});
        } else {
            total += quad::adaptive_simpson(f, lo, hi, {tol, 40});
        }
    }
    return total;
}

}  // namespace detail

// -integral_0^1 psi(s) G(s) ds, or -G(gamma) for the Dirac spectrum.
inline double risk_of_quantile(const Spectrum& spec, const QuantileFunction& G, double tol = 1e-10) {
    double value = 0.0;
    switch (spec.kind()) {
        case SpectrumKind::dirac_var: value = -G(spec.param()); break;
        case SpectrumKind::expected_shortfall: {
            double g = spec.param();
            value = -detail::integrate_pieces(G.G, 0.0, g, G.breaks, tol * g, true) / g;
            break;
        }
        case SpectrumKind::exponential: {
            auto f = [&](double s) { return spec.psi(s) * G(s); };
            value = -detail::integrate_pieces(f, 0.0, 1.0, G.breaks, tol, true);
            break;
        }
        case SpectrumKind::power: {
            // s = t^{1/k_p} absorbs the singular weight: psi(s) ds = dt
            double k = spec.param();
            std::vector<double> tb;
            for (double c : G.breaks) tb.push_back(std::pow(c, k));
            auto f = [&](double t) { return G(std::pow(t, 1.0 / k)); };
            value = -detail::integrate_pieces(f, 0.0, 1.0, tb, tol, true);
            break;
        }
    }
    if (!std::isfinite(value)) throw NumericError("risk_of_quantile: divergent integral");
    return value;
}

inline ValidationReport validate(const Spectrum& spec) {
    ValidationReport rep;
    if (spec.kind() == SpectrumKind::dirac_var) {
        rep.nonincreasing = false;
        rep.coherent = false;
        return rep;
    }
    constexpr int npts = 1001;
    for (int i = 0; i < npts; ++i) {
        double s = static_cast<double>(i) / (npts - 1);
        if (spec.kind() == SpectrumKind::power && s == 0.0) continue;
        if (spec.psi(s) < 0.0) rep.nonnegative = false;
        if (spec.differentiable() && spec.psi_prime(s) > 0.0) rep.nonincreasing = false;
        if (i > 0 && spec.kind() == SpectrumKind::expected_shortfall) {
            double sp = static_cast<double>(i - 1) / (npts - 1);
            if (spec.psi(s) > spec.psi(sp)) rep.nonincreasing = false;
        }
    }
    QuantileFunction one{[](double) { return 1.0; }, {}};
    rep.integral = -risk_of_quantile(spec, one);
    rep.unit_integral = std::abs(rep.integral - 1.0) < 1e-10;
    rep.coherent = rep.nonnegative && rep.nonincreasing && rep.unit_integral;
    return rep;
}

// psi_i = integral of psi over [(i-1)/N, i/N]
inline std::vector<double> discretize(const Spectrum& spec, int N) {
    if (N < 1) throw DomainError("discretize: N must be >= 1");
    if (spec.kind() == SpectrumKind::dirac_var)
        throw UnsupportedError("discretize: Dirac VaR spectrum has no weight vector");
    std::vector<double> w(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i)
        w[i] = spec.mass(static_cast<double>(i) / N, static_cast<double>(i + 1) / N);
    return w;
}

}  // namespace hybridmv
