#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hybridmv/errors.hpp"
#include "hybridmv/market_core.hpp"
#include "hybridmv/spectra.hpp"
#include "hybridmv/srmv_dynamic.hpp"

namespace hybridmv {

struct VrmvProblem {
    double x0 = 1.0;
    double x_d = 1.2;
    double omega = 0.0;
    double gamma = 0.1;
    MarketModel market;
};

enum class VrmvRegime { generic, low_gamma, high_gamma };

inline std::string to_string(VrmvRegime r) {
    switch (r) {
        case VrmvRegime::generic: return "generic";
        case VrmvRegime::low_gamma: return "low_gamma";
        case VrmvRegime::high_gamma: return "high_gamma";
    }
    return "unknown";
}

struct VrmvSolution {
    double rho = 0.0;
    double eta = 0.0;
    double beta = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double xi = 0.0;  // K0^{-1}(1 - gamma)
    double beta_lower = 0.0;
    double outer_objective = 0.0;
    double residual_budget = 0.0;
    double residual_target = 0.0;
    VrmvRegime regime = VrmvRegime::generic;
};

struct VrmvInner {
    double rho = 0.0;
    double eta = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

inline double var_lower_bound(const VrmvProblem& p) {
    if (!(p.gamma > 0.0 && p.gamma < 1.0)) throw DomainError("gamma must lie in (0,1)");
    SpdDistribution d = spd_distribution(p.market);
    double k1 = d.partial_moment(d.quantile_upper(p.gamma));
    if (!(k1 > 0.0)) return -std::numeric_limits<double>::max();
    return -p.x0 / k1;
}

namespace detail {

// Moments E[z^k 1{lo < z <= hi}], k = 0,1,2, of z(T) under the time-0 law.
class ZMoments {
public:
    explicit ZMoments(const SpdDistribution& d) : d_(d) {
        for (int k = 0; k < 3; ++k) scale_[k] = std::exp(k * d.m0 + 0.5 * k * k * d.v0 * d.v0);
    }
    std::array<double, 3> operator()(double lo, double hi) const {
        std::array<double, 3> out{0.0, 0.0, 0.0};
        if (!(hi > lo) || hi <= 0.0) return out;
        double wl = lo <= 0.0 ? -kInf : d_.w(lo);
        double wh = std::isfinite(hi) ? d_.w(hi) : kInf;
        for (int k = 0; k < 3; ++k) out[k] = scale_[k] * prob_between(wl - k * d_.v0, wh - k * d_.v0);
        return out;
    }

private:
    SpdDistribution d_;
    std::array<double, 3> scale_{};
};

struct VrmvEval {
    double Ex, Ezx, Ex2, c1, c2;
    double S0, S1, S2;  // moments over the two linear pieces
};

inline VrmvEval vrmv_eval(const ZMoments& M, double xi, double rho, double eta, double beta) {
    VrmvEval e{};
    e.c1 = std::max(rho / eta, xi);
    e.c2 = std::min((rho + 2.0 * beta) / eta, xi);
    auto r1 = M(0.0, e.c2);
    auto r2 = M(std::max(e.c2, 0.0), xi);
    auto r3 = M(xi, e.c1);
    e.S0 = r1[0] + r3[0];
    e.S1 = r1[1] + r3[1];
    e.S2 = r1[2] + r3[2];
    e.Ex = 0.5 * (rho * e.S0 - eta * e.S1) - beta * r2[0];
    e.Ezx = 0.5 * (rho * e.S1 - eta * e.S2) - beta * r2[1];
    e.Ex2 = 0.25 * (rho * rho * e.S0 - 2.0 * rho * eta * e.S1 + eta * eta * e.S2) + beta * beta * r2[0];
    return e;
}

}  // namespace detail

// Budget and target equations for fixed beta, solved by damped Newton on the piecewise-smooth
// system; the regime boundaries C1, C2 are recomputed at every iterate.
inline VrmvInner solve_multipliers_given_beta(const VrmvProblem& p, double beta,
                                              std::optional<std::array<double, 2>> start = {}) {
    require_ambitious_target(p.x0, p.x_d, p.market);
    SpdDistribution d = spd_distribution(p.market);
    double bl = var_lower_bound(p);
    if (beta > 0.0 || beta < bl) throw DomainError("beta outside [beta_lower, 0]");
    detail::ZMoments M(d);
    double xi = d.quantile_upper(p.gamma);

    double rho, eta;
    if (start) {
        rho = (*start)[0];
        eta = (*start)[1];
    } else {
        MvSolution mv = solve_mv(p.x0, p.x_d, p.market);
        rho = mv.rho;
        eta = mv.eta;
    }
    auto resid = [&](double r, double e) {
        auto ev = detail::vrmv_eval(M, xi, r, e, beta);
        return std::array<double, 2>{ev.Ex - p.x_d, ev.Ezx - p.x0};
    };
    auto norm = [](const std::array<double, 2>& f) { return std::hypot(f[0], f[1]); };

    auto f = resid(rho, eta);
    int it = 0;
    for (; it < 100 && norm(f) > 1e-13; ++it) {
        auto ev = detail::vrmv_eval(M, xi, rho, eta, beta);
        // J = [[S0/2, -S1/2], [S1/2, -S2/2]]
        double a = 0.5 * ev.S0, b = -0.5 * ev.S1, c = 0.5 * ev.S1, dd = -0.5 * ev.S2;
        double det = a * dd - b * c;
        if (!(std::abs(det) > 0.0)) break;
        double dr = -(dd * f[0] - b * f[1]) / det;
        double de = -(-c * f[0] + a * f[1]) / det;
        double step = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
            double rn = rho + step * dr, en = eta + step * de;
            if (!(en > 0.0)) continue;
            auto fn = resid(rn, en);
            if (norm(fn) < (1.0 - 1e-4 * step) * norm(f)) {
                rho = rn;
                eta = en;
                f = fn;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    if (!(norm(f) <= 1e-9)) {
        std::ostringstream os;
        os << "VaR-MV inner solve did not converge for beta=" << beta << " (residual " << norm(f) << ")";
        throw SolverError(os.str());
    }
    auto ev = detail::vrmv_eval(M, xi, rho, eta, beta);
    return {rho, eta, ev.c1, ev.c2, norm(f), it};
}

inline double vrmv_beta_objective(const VrmvProblem& p, double beta, const VrmvInner& in) {
    SpdDistribution d = spd_distribution(p.market);
    detail::ZMoments M(d);
    auto ev = detail::vrmv_eval(M, d.quantile_upper(p.gamma), in.rho, in.eta, beta);
    return ev.Ex2 + p.omega * beta;
}

inline VrmvRegime classify_regime(const SpdDistribution& d, double gamma, double rho, double eta,
                                  double beta) {
    double h1 = d.upper(rho / eta);
    double h2 = (rho + 2.0 * beta) / eta <= 0.0 ? 1.0 : d.upper((rho + 2.0 * beta) / eta);
    if (gamma <= h1) return VrmvRegime::low_gamma;
    if (gamma >= h2) return VrmvRegime::high_gamma;
    return VrmvRegime::generic;
}

struct VrmvSearchOptions {
    int scan_points = 33;
    double rel_tol = 1e-8;
};

inline VrmvSolution solve(const VrmvProblem& p, VrmvSearchOptions opt = {}) {
    require_ambitious_target(p.x0, p.x_d, p.market);
    if (p.omega < 0.0) throw DomainError("omega must be nonnegative");
    SpdDistribution d = spd_distribution(p.market);
    const double bl = var_lower_bound(p);
    MvSolution mv = solve_mv(p.x0, p.x_d, p.market);

    struct Point {
        double beta, J;
        VrmvInner in;
        bool ok;
    };
    std::optional<std::array<double, 2>> warm = std::array<double, 2>{mv.rho, mv.eta};
    auto evaluate = [&](double beta) -> Point {
        try {
            VrmvInner in = solve_multipliers_given_beta(p, beta, warm);
            return {beta, vrmv_beta_objective(p, beta, in), in, true};
        } catch (const SolverError&) {
        }
        try {
            VrmvInner in = solve_multipliers_given_beta(p, beta);
            return {beta, vrmv_beta_objective(p, beta, in), in, true};
        } catch (const SolverError&) {
            return {beta, kInf, {}, false};
        }
    };

    // scan from beta = 0 downward; strict improvement keeps ties at the larger beta
    const int n = std::max(3, opt.scan_points);
    std::vector<Point> scan;
    for (int i = 0; i < n; ++i) {
        double beta = bl * static_cast<double>(i) / (n - 1);
        Point pt = evaluate(beta);
        if (pt.ok) warm = std::array<double, 2>{pt.in.rho, pt.in.eta};
        scan.push_back(pt);
    }
    int best = -1;
    for (int i = 0; i < n; ++i)
        if (scan[i].ok && (best < 0 || scan[i].J < scan[best].J)) best = i;
    if (best < 0) throw SolverError("VaR-MV: every inner solve failed on the beta scan");

    Point bestp = scan[best];
    double lo = scan[std::min(best + 1, n - 1)].beta;
    double hi = scan[std::max(best - 1, 0)].beta;
    if (hi > lo) {
        warm = std::array<double, 2>{bestp.in.rho, bestp.in.eta};
        constexpr double g = 0.6180339887498949;
        double a = lo, b = hi;
        double x1 = b - g * (b - a), x2 = a + g * (b - a);
        Point p1 = evaluate(x1), p2 = evaluate(x2);
        double tol = opt.rel_tol * std::abs(bl);
        while (b - a > tol) {
            if (p1.J < p2.J) {
                b = x2;
                x2 = x1;
                p2 = p1;
                x1 = b - g * (b - a);
                p1 = evaluate(x1);
            } else {
                a = x1;
                x1 = x2;
                p1 = p2;
                x2 = a + g * (b - a);
                p2 = evaluate(x2);
            }
        }
        for (const Point& c : {p1, p2}) {
            if (!c.ok) continue;
            double margin = 1e-14 * (1.0 + std::abs(bestp.J));
            if (c.J < bestp.J - margin || (std::abs(c.J - bestp.J) <= margin && c.beta > bestp.beta))
                bestp = c;
        }
    }

    VrmvSolution s;
    s.rho = bestp.in.rho;
    s.eta = bestp.in.eta;
    s.beta = bestp.beta + 0.0;  // no negative zero in reports
    s.c1 = bestp.in.c1;
    s.c2 = bestp.in.c2;
    s.xi = d.quantile_upper(p.gamma);
    s.beta_lower = bl;
    s.outer_objective = bestp.J;
    detail::ZMoments M(d);
    auto ev = detail::vrmv_eval(M, s.xi, s.rho, s.eta, s.beta);
    s.residual_target = ev.Ex - p.x_d;
    s.residual_budget = ev.Ezx - p.x0;
    s.regime = classify_regime(d, p.gamma, s.rho, s.eta, s.beta);
    return s;
}

// Wealth and policy of a solved VaR-MV instance as sums of truncated-lognormal pieces.
class VrmvStrategy {
public:
    VrmvStrategy(VrmvSolution sol, VrmvProblem p) : sol_(sol), p_(std::move(p)) {}

    const VrmvSolution& solution() const { return sol_; }
    const VrmvProblem& problem() const { return p_; }

    double terminal(double z_T) const {
        if (!(z_T > 0.0)) throw DomainError("terminal_wealth: z_T must be positive");
        if (z_T <= sol_.c2) return 0.5 * (sol_.rho - sol_.eta * z_T);
        if (z_T <= sol_.xi) return -sol_.beta;
        if (z_T <= sol_.c1) return 0.5 * (sol_.rho - sol_.eta * z_T);
        return 0.0;
    }

    // (a, b, q1, q2) pieces of x(T) = a + b z(T) on (q1, q2]
    std::vector<std::array<double, 4>> pieces() const {
        std::vector<std::array<double, 4>> out;
        double a = 0.5 * sol_.rho, b = -0.5 * sol_.eta;
        if (sol_.c2 > 0.0) out.push_back({a, b, 0.0, sol_.c2});
        if (sol_.xi > std::max(sol_.c2, 0.0)) out.push_back({-sol_.beta, 0.0, std::max(sol_.c2, 0.0), sol_.xi});
        if (sol_.c1 > sol_.xi) out.push_back({a, b, sol_.xi, sol_.c1});
        return out;
    }

    double wealth(double t, double z) const {
        LognormalMoments mo = lognormal_moments(p_.market, t);
        if (mo.v <= 0.0) return terminal(z);
        double x = 0.0;
        for (const auto& pc : pieces()) x += truncated_expectation(mo, z, pc[0], pc[1], pc[2], pc[3]);
        return x;
    }

    double exposure(double t, double z) const {
        if (t >= p_.market.horizon()) throw DomainError("policy undefined at t = T");
        LognormalMoments mo = lognormal_moments(p_.market, t);
        double e = 0.0;
        for (const auto& pc : pieces()) e -= truncated_expectation_zdz(mo, z, pc[0], pc[1], pc[2], pc[3]);
        return e;
    }

    Vec policy(double t, double z) const { return allocation_direction(p_.market, t) * exposure(t, z); }

private:
    VrmvSolution sol_;
    VrmvProblem p_;
};

// Quantile form: G(s) = G'(s) on [h1, gamma), -beta on [gamma, h2), G'(s) on [h2, 1],
// with G'(s) = (rho - eta K0^{-1}(1 - s)) / 2; degenerate regimes drop pieces.
inline QuantileFunction vrmv_quantile_function(const VrmvSolution& sol, const VrmvProblem& p) {
    SpdDistribution d = spd_distribution(p.market);
    double h1 = d.upper(sol.rho / sol.eta);
    double zb = (sol.rho + 2.0 * sol.beta) / sol.eta;
    double h2 = zb <= 0.0 ? 1.0 : d.upper(zb);
    double gamma = p.gamma;
    double L1 = std::min(h1, gamma), L2 = std::max(h2, gamma);
    auto G = [=](double s) {
        double zq = (s >= 1.0) ? 0.0 : (s <= 0.0 ? kInf : d.quantile_upper(s));
        double gd = 0.5 * (sol.rho - sol.eta * zq);
        if (s < L1) return 0.0;
        if (s < gamma) return gd;
        if (s < L2) return -sol.beta;
        return gd;
    };
    return {G, {L1, gamma, L2}};
}

// Largest gap between x(T) and G(1 - K0(z(T))) on a log-grid, skipping points next to kinks.
// The grid stops at w = -5.5: below that 1 - K0 rounds to 1 and the composition loses digits.
inline double vrmv_quantile_equivalence_error(const VrmvSolution& sol, const VrmvProblem& p,
                                              int points = 10000) {
    SpdDistribution d = spd_distribution(p.market);
    QuantileFunction G = vrmv_quantile_function(sol, p);
    VrmvStrategy strat(sol, p);
    double worst = 0.0;
    for (int i = 0; i < points; ++i) {
        double w = -5.5 + 13.0 * (i + 0.5) / points;
        double z = std::exp(d.m0 + d.v0 * w);
        bool near = false;
        for (double k : {sol.c1, sol.c2, sol.xi, sol.rho / sol.eta})
            if (k > 0.0 && std::abs(z / k - 1.0) < 1e-7) near = true;
        if (near) continue;
        worst = std::max(worst, std::abs(strat.terminal(z) - G(d.upper(z))));
    }
    return worst;
}

inline QuantileFunction quantile_solution(const VrmvSolution& sol, const VrmvProblem& p) {
    double err = vrmv_quantile_equivalence_error(sol, p);
    if (err > 1e-9) {
        std::ostringstream os;
        os << "VaR-MV quantile form disagrees with terminal wealth by " << err;
        throw ConsistencyError(os.str());
    }
    return vrmv_quantile_function(sol, p);
}

}  // namespace hybridmv
