#pragma once

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "hybridmv/errors.hpp"
#include "hybridmv/market_core.hpp"
#include "hybridmv/normal.hpp"
#include "hybridmv/quadrature.hpp"
#include "hybridmv/spectra.hpp"

namespace hybridmv {

// Integration window in the standard-normal variable of ln z(T).
inline constexpr double kWLow = -12.0;
inline constexpr double kWHigh = 14.0;

namespace detail {

inline double find_root(const std::function<double(double)>& f, double lo, double hi, double flo,
                        double fhi) {
    boost::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15 * (1.0 + std::abs(a)); };
    auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
    return 0.5 * (r.first + r.second);
}

// Sign-change scan of f on a uniform grid followed by bracketed refinement.
inline std::vector<double> scan_roots(const std::function<double(double)>& f, double lo, double hi,
                                      int points) {
    std::vector<double> roots;
    double xp = lo, fp = f(lo);
    for (int i = 1; i < points; ++i) {
        double x = lo + (hi - lo) * i / (points - 1);
        double fx = f(x);
        if (fp == 0.0) roots.push_back(xp);
        else if (fp * fx < 0.0) roots.push_back(find_root(f, xp, x, fp, fx));
        xp = x;
        fp = fx;
    }
    if (fp == 0.0) roots.push_back(xp);
    return roots;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Mean-variance baseline with no-bankruptcy: x(T) = (rho - eta z)^+ / 2

struct MvSolution {
    double rho = 0.0;
    double eta = 0.0;
    double ratio() const { return rho / eta; }
};

inline void require_ambitious_target(double x0, double x_d, const MarketModel& market) {
    if (!(x0 > 0.0)) throw DomainError("initial wealth must be positive");
    double riskfree = x0 * std::exp(market.integrated_rate(0.0, market.horizon()));
    if (!(x_d > riskfree)) {
        std::ostringstream os;
        os << "target x_d=" << x_d << " does not exceed risk-free growth " << riskfree;
        throw InfeasibleError(os.str());
    }
}

inline MvSolution solve_mv(double x0, double x_d, const MarketModel& market) {
    require_ambitious_target(x0, x_d, market);
    SpdDistribution d = spd_distribution(market);
    const double B = d.B0();
    // with a = rho/eta: E[(a - z)1{z<=a}] and E[z(a - z)1{z<=a}]
    auto p0 = [&](double a) { return a * d.cdf(a) - d.partial_moment(a); };
    auto p1 = [&](double a) { return a * d.partial_moment(a) - B * normal::cdf(d.w(a) - 2.0 * d.v0); };
    std::function<double(double)> h = [&](double la) {
        double a = std::exp(la);
        return x_d * p1(a) - x0 * p0(a);
    };
    // the ratio grows without bound as x_d approaches risk-free growth, hence the wide upper end
    auto roots = detail::scan_roots(h, d.m0 - 8.0 * d.v0, d.m0 + 40.0 * d.v0, 601);
    if (roots.empty()) throw InfeasibleError("mean-variance baseline: no multiplier ratio found");
    double a = std::exp(roots.front());
    MvSolution s;
    s.eta = 2.0 * x_d / p0(a);
    s.rho = s.eta * a;
    return s;
}

inline double mv_terminal_wealth(const MvSolution& mv, double z_T) {
    return z_T <= mv.ratio() ? 0.5 * (mv.rho - mv.eta * z_T) : 0.0;
}

inline double mv_wealth_process(const MvSolution& mv, const MarketModel& market, double t, double z) {
    return truncated_expectation(lognormal_moments(market, t), z, 0.5 * mv.rho, -0.5 * mv.eta, 0.0,
                                 mv.ratio());
}

inline Vec allocation_direction(const MarketModel& market, double t) {
    const Mat& s = market.sigma(t);
    return (s * s.transpose()).ldlt().solve(market.excess(t));
}

// Two-term closed-form MV policy.
inline Vec mv_policy(const MvSolution& mv, const MarketModel& market, double t, double z) {
    if (t >= market.horizon()) throw DomainError("policy undefined at t = T");
    LognormalMoments mo = lognormal_moments(market, t);
    double k1 = (std::log(mv.ratio() / z) - mo.m) / mo.v - mo.v;
    double k2 = k1 - mo.v;
    double scal = 0.5 * (mv.rho * mo.A * normal::pdf(k1) / mo.v +
                         mv.eta * mo.B * z * (normal::cdf(k2) - normal::pdf(k2) / mo.v));
    return allocation_direction(market, t) * scal;
}

// ---------------------------------------------------------------------------
// SRM-MV

struct SrmvProblem {
    double x0 = 1.0;
    double x_d = 1.2;
    double omega = 0.0;
    Spectrum spectrum = Spectrum::exponential(10.0);
    MarketModel market;
};

struct SrmvSolution {
    double rho = 0.0;
    double eta = 0.0;
    double s_dag = 0.0;
    double z_dag = kInf;
    double residual_budget = 0.0;
    double residual_target = 0.0;
    double residual_boundary = 0.0;
    double objective = 0.0;
    int candidates = 0;
    bool multiple_roots = false;
};

namespace detail {

// Integrals of the SRM-MV solution written in w, with z = exp(m0 + v0 w) and s = 1 - Phi(w).
class SrmvKernel {
public:
    SrmvKernel(const SrmvProblem& p) : p_(p), d_(spd_distribution(p.market)) {
        if (!p.spectrum.differentiable())
            throw UnsupportedError(
                "dynamic SRM-MV needs a differentiable spectrum; step and Dirac spectra break the "
                "monotone pointwise solution");
        if (p.omega < 0.0) throw DomainError("omega must be nonnegative");
        A_ = d_.A0();
        B_ = d_.B0();
        for (double c : p.spectrum.breakpoints()) wbreaks_.push_back(normal::isf(c));
    }

    const SpdDistribution& spd() const { return d_; }
    double z_of(double w) const { return std::exp(d_.m0 + d_.v0 * w); }
    double psi_w(double w) const { return p_.spectrum.psi(normal::sf(w)); }

    // integral over [kWLow, wd] of z psi(s) phi(w)
    double I1(double wd) const {
        double hi = std::min(wd, kWHigh);
        return quad::gauss_legendre_split(
            [&](double w) { return z_of(w) * psi_w(w) * normal::pdf(w); }, kWLow, hi, wbreaks_);
    }

    struct Parts {
        double wd, sd, zd, psid, P0, P1, Q0, Q1;
    };

    Parts parts(double wd) const {
        Parts r{};
        r.wd = wd;
        r.sd = normal::sf(wd);
        r.zd = z_of(wd);
        r.psid = p_.spectrum.psi(r.sd);
        double c0 = normal::cdf(wd), c1 = normal::cdf(wd - d_.v0), c2 = normal::cdf(wd - 2.0 * d_.v0);
        r.P0 = r.zd * c0 - A_ * c1;
        r.P1 = r.zd * A_ * c1 - B_ * c2;
        if (p_.omega > 0.0) {
            r.Q0 = p_.spectrum.mass(r.sd, 1.0) - r.psid * c0;
            r.Q1 = I1(wd) - r.psid * A_ * c1;
        }
        return r;
    }

    // budget mismatch as a function of the boundary in w, eta eliminated by the target
    double budget_gap(double wd) const {
        Parts q = parts(wd);
        double eta = (2.0 * p_.x_d - p_.omega * q.Q0) / q.P0;
        return eta * q.P1 + p_.omega * q.Q1 - 2.0 * p_.x0;
    }

    double g(double w, double rho, double eta) const {
        return 0.5 * (rho - eta * z_of(w) + p_.omega * psi_w(w));
    }

    bool nonnegative(double wd, double rho, double eta) const {
        double hi = std::min(wd, kWHigh);
        constexpr int n = 4000;
        double scale = std::abs(rho) + 1.0;
        for (int i = 0; i <= n; ++i) {
            double w = kWLow + (hi - kWLow) * i / n;
            if (g(w, rho, eta) < -1e-10 * scale) return false;
        }
        return true;
    }

    // E[x^2] - omega * integral psi G, the quantile-problem objective
    double objective(double wd, double rho, double eta) const {
        double hi = std::min(wd, kWHigh);
        return quad::gauss_legendre_split(
            [&](double w) {
                double gv = g(w, rho, eta);
                return (gv * gv - p_.omega * psi_w(w) * gv) * normal::pdf(w);
            },
            kWLow, hi, wbreaks_);
    }

    double A() const { return A_; }
    double B() const { return B_; }

private:
    const SrmvProblem& p_;
    SpdDistribution d_;
    double A_ = 1.0, B_ = 1.0;
    std::vector<double> wbreaks_;
};

}  // namespace detail

inline double srmv_terminal_wealth(const SrmvSolution& sol, const SrmvProblem& p, double z_T);

// Spectral part E[(z(T)/z) psi(1 - K0(z(T))) 1{z(T) <= z_dag}] of the time-t wealth.
inline double srmv_spectral_wealth(const SrmvSolution& sol, const SrmvProblem& p,
                                   const SpdDistribution& d, const LognormalMoments& mo, double z) {
    if (mo.v <= 0.0) {
        return z <= sol.z_dag ? p.spectrum.psi(d.upper(z)) : 0.0;
    }
    const double lz = std::log(z);
    double s_lo = std::max(-12.0, (d.v0 * kWLow + d.m0 - lz - mo.m) / mo.v);
    double s_hi = std::min(12.0, (d.v0 * kWHigh + d.m0 - lz - mo.m) / mo.v);
    if (std::isfinite(sol.z_dag)) s_hi = std::min(s_hi, (std::log(sol.z_dag) - lz - mo.m) / mo.v);
    if (!(s_hi > s_lo)) return 0.0;
    std::vector<double> breaks;
    for (double c : p.spectrum.breakpoints())
        breaks.push_back((d.v0 * normal::isf(c) + d.m0 - lz - mo.m) / mo.v);
    return quad::gauss_legendre_split<8>(
        [&](double s) {
            double e = mo.m + mo.v * s;
            double w = (lz + e - d.m0) / d.v0;
            return std::exp(e) * p.spectrum.psi(normal::sf(w)) * normal::pdf(s);
        },
        s_lo, s_hi, breaks, 0.5);
}

inline SrmvSolution solve_multipliers(const SrmvProblem& p) {
    require_ambitious_target(p.x0, p.x_d, p.market);
    detail::SrmvKernel K(p);
    const SpdDistribution& d = K.spd();

    struct Candidate {
        double wd, rho, eta, obj;
    };
    std::vector<Candidate> valid;
    int found = 0;

    std::function<double(double)> F = [&](double wd) { return K.budget_gap(wd); };
    for (double wd : detail::scan_roots(F, -8.0, 10.0, 361)) {
        ++found;
        auto q = K.parts(wd);
        double eta = (2.0 * p.x_d - p.omega * q.Q0) / q.P0;
        double rho = eta * q.zd - p.omega * q.psid;
        if (eta > 0.0 && K.nonnegative(wd, rho, eta))
            valid.push_back({wd, rho, eta, K.objective(wd, rho, eta)});
    }

    // no truncation: the budget and target equations are linear in (rho, eta)
    if (p.omega > 0.0) {
        double I = K.I1(kInf);
        // rho - eta A = 2 x_d - omega ; rho A - eta B = 2 x0 - omega I
        double r1 = 2.0 * p.x_d - p.omega, r2 = 2.0 * p.x0 - p.omega * I;
        double det = -K.B() + K.A() * K.A();
        double rho = (-r1 * K.B() + K.A() * r2) / det;
        double eta = (r2 - K.A() * r1) / det;
        ++found;
        if (eta > 0.0 && K.nonnegative(kInf, rho, eta))
            valid.push_back({kInf, rho, eta, K.objective(kInf, rho, eta)});
    }

    if (valid.empty()) {
        std::ostringstream os;
        os << "SRM-MV: no multiplier solution with eta > 0 and nonnegative wealth (" << found
           << " stationary candidates examined)";
        throw InfeasibleError(os.str());
    }
    const Candidate* best = &valid.front();
    for (const auto& c : valid)
        if (c.obj < best->obj) best = &c;

    SrmvSolution s;
    s.rho = best->rho;
    s.eta = best->eta;
    s.s_dag = std::isfinite(best->wd) ? normal::sf(best->wd) : 0.0;
    s.z_dag = std::isfinite(best->wd) ? K.z_of(best->wd) : kInf;
    s.objective = best->obj;
    s.candidates = static_cast<int>(valid.size());
    s.multiple_roots = valid.size() > 1;

    // residuals from an independent evaluation of both constraints
    LognormalMoments m0 = lognormal_moments(p.market, 0.0);
    double budget = truncated_expectation(m0, 1.0, 0.5 * s.rho, -0.5 * s.eta, 0.0, s.z_dag);
    if (p.omega > 0.0) budget += 0.5 * p.omega * srmv_spectral_wealth(s, p, d, m0, 1.0);
    double wd = best->wd;
    double target = 0.5 * (s.rho * normal::cdf(wd) - s.eta * K.A() * normal::cdf(wd - d.v0));
    if (p.omega > 0.0) target += 0.5 * p.omega * p.spectrum.mass(s.s_dag, 1.0);
    s.residual_budget = budget - p.x0;
    s.residual_target = target - p.x_d;
    s.residual_boundary =
        std::isfinite(s.z_dag)
            ? s.rho - s.eta * s.z_dag + p.omega * p.spectrum.psi(s.s_dag)
            : 0.0;
    return s;
}

inline QuantileFunction optimal_quantile(const SrmvSolution& sol, const SrmvProblem& p) {
    SpdDistribution d = spd_distribution(p.market);
    auto G = [sol, p, d](double s) {
        if (s < sol.s_dag) return 0.0;
        double zq = (s >= 1.0) ? 0.0 : (s <= 0.0 ? kInf : d.quantile_upper(s));
        double psi = p.omega > 0.0 ? p.spectrum.psi(s) : 0.0;
        return 0.5 * (sol.rho - sol.eta * zq + p.omega * psi);
    };
    std::vector<double> breaks{sol.s_dag};
    for (double c : p.spectrum.breakpoints()) breaks.push_back(c);
    return {G, breaks};
}

inline double srmv_terminal_wealth(const SrmvSolution& sol, const SrmvProblem& p, double z_T) {
    if (!(z_T > 0.0)) throw DomainError("terminal_wealth: z_T must be positive");
    if (z_T > sol.z_dag) return 0.0;
    double psi = 0.0;
    if (p.omega > 0.0) {
        SpdDistribution d = spd_distribution(p.market);
        psi = p.spectrum.psi(d.upper(z_T));
    }
    return 0.5 * (sol.rho - sol.eta * z_T + p.omega * psi);
}

// Evaluates wealth and policy of a solved SRM-MV instance; caches the SPD law.
class SrmvStrategy {
public:
    SrmvStrategy(SrmvSolution sol, SrmvProblem p)
        : sol_(sol), p_(std::move(p)), d_(spd_distribution(p_.market)) {}

    const SrmvSolution& solution() const { return sol_; }
    const SrmvProblem& problem() const { return p_; }

    double terminal(double z_T) const {
        if (z_T > sol_.z_dag) return 0.0;
        double psi = p_.omega > 0.0 ? p_.spectrum.psi(d_.upper(z_T)) : 0.0;
        return 0.5 * (sol_.rho - sol_.eta * z_T + p_.omega * psi);
    }

    double wealth(double t, double z) const {
        if (!(z > 0.0)) throw DomainError("wealth_process: z must be positive");
        LognormalMoments mo = lognormal_moments(p_.market, t);
        if (mo.v <= 0.0) return terminal(z);
        double x = truncated_expectation(mo, z, 0.5 * sol_.rho, -0.5 * sol_.eta, 0.0, sol_.z_dag);
        if (p_.omega > 0.0) x += 0.5 * p_.omega * srmv_spectral_wealth(sol_, p_, d_, mo, z);
        return x;
    }

    // -z dx/dz of the mean-variance-shaped part (rho, eta, truncation at z_dag)
    double exposure_u1(double t, double z) const {
        LognormalMoments mo = moments_before_horizon(t);
        return -truncated_expectation_zdz(mo, z, 0.5 * sol_.rho, -0.5 * sol_.eta, 0.0, sol_.z_dag);
    }

    // -z dx/dz of the spectral part, per unit omega
    double exposure_u2(double t, double z) const {
        LognormalMoments mo = moments_before_horizon(t);
        const double lz = std::log(z);
        double kappa = std::isfinite(sol_.z_dag) ? (std::log(sol_.z_dag) - lz - mo.m) / mo.v : kInf;
        double boundary = 0.0;
        if (std::isfinite(kappa))
            boundary = sol_.z_dag / (mo.v * z) * p_.spectrum.psi(sol_.s_dag) * normal::pdf(kappa);
        double s_lo = std::max(-12.0, (d_.v0 * kWLow + d_.m0 - lz - mo.m) / mo.v);
        double s_hi = std::min({12.0, kappa, (d_.v0 * kWHigh + d_.m0 - lz - mo.m) / mo.v});
        double integral = 0.0;
        if (s_hi > s_lo) {
            integral = quad::gauss_legendre<8>(
                [&](double s) {
                    double e = mo.m + mo.v * s;
                    double w = (lz + e - d_.m0) / d_.v0;
                    return std::exp(e) * p_.spectrum.psi_prime(normal::sf(w)) * normal::pdf(w) *
                           normal::pdf(s) / d_.v0;
                },
                s_lo, s_hi, 0.5);
        }
        return 0.5 * (boundary + integral);
    }

    double exposure(double t, double z) const {
        double e = exposure_u1(t, z);
        if (p_.omega > 0.0) e += p_.omega * exposure_u2(t, z);
        return e;
    }

    Vec policy_u1(double t, double z) const {
        return allocation_direction(p_.market, t) * exposure_u1(t, z);
    }
    Vec policy_u2(double t, double z) const {
        return allocation_direction(p_.market, t) * exposure_u2(t, z);
    }
    Vec policy(double t, double z) const { return allocation_direction(p_.market, t) * exposure(t, z); }

private:
    LognormalMoments moments_before_horizon(double t) const {
        if (t >= p_.market.horizon()) throw DomainError("policy undefined at t = T");
        if (!(t >= 0.0)) throw DomainError("policy: t must be nonnegative");
        return lognormal_moments(p_.market, t);
    }

    SrmvSolution sol_;
    SrmvProblem p_;
    SpdDistribution d_;
};

inline double srmv_wealth_process(const SrmvSolution& sol, const SrmvProblem& p, double t, double z) {
    return SrmvStrategy(sol, p).wealth(t, z);
}

inline Vec srmv_policy(const SrmvSolution& sol, const SrmvProblem& p, double t, double z) {
    return SrmvStrategy(sol, p).policy(t, z);
}

// Spectral risk of the optimal terminal wealth, -E[psi(1 - K0(z(T))) x(T)].
// Integrated in w = (ln z(T) - m0) / v0, where the quantile's infinite slope at s = 1 disappears.
inline double srmv_risk(const SrmvSolution& sol, const SrmvProblem& p) {
    if (!p.spectrum.differentiable() && p.spectrum.kind() != SpectrumKind::expected_shortfall)
        return risk_of_quantile(p.spectrum, optimal_quantile(sol, p));
    SrmvStrategy st(sol, p);
    SpdDistribution d = spd_distribution(p.market);
    std::vector<double> breaks;
    if (std::isfinite(sol.z_dag)) breaks.push_back(d.w(sol.z_dag));
    for (double c : p.spectrum.breakpoints()) breaks.push_back(normal::isf(c));
    double r = quad::gauss_legendre_split(
        [&](double w) {
            double z = std::exp(d.m0 + d.v0 * w);
            return p.spectrum.psi(normal::sf(w)) * st.terminal(z) * normal::pdf(w);
        },
        kWLow, kWHigh, breaks, 0.05);
    return -r;
}

}  // namespace hybridmv
