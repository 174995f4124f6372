#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hybridmv/errors.hpp"
#include "hybridmv/market_core.hpp"
#include "hybridmv/quadrature.hpp"
#include "hybridmv/rng.hpp"
#include "hybridmv/srmv_dynamic.hpp"
#include "hybridmv/vrmv_dynamic.hpp"

namespace hybridmv {

// One risky asset whose Sharpe ratio follows d theta = lambda (theta_bar - theta) dt + gamma_ou dW.
struct OuMarket {
    double r = 0.0;
    double sigma = 0.2;
    double lambda = 0.0;
    double theta_bar = 0.0;
    double gamma_ou = 0.0;
    double theta0 = 0.0;
    double T = 1.0;
};

// One risky asset with square-root variance driven by the same Brownian motion as the price.
struct HestonMarket {
    double mu = 0.08;
    double r = 0.0;
    double iota = 1.0;
    double nu_bar = 0.04;
    double xi = 0.1;
    double nu0 = 0.04;
    double T = 1.0;

    double feller_ratio() const { return 2.0 * iota * nu_bar / (xi * xi); }
};

// Variance is kept above this fraction of nu_bar, both on the PDE grid and along MC paths.
inline constexpr double kHestonVarianceFloor = 0.02;

struct PdeGrid {
    int nz = 200;
    int ns = 200;
    int steps = 400;
    int store_every = 10;
    double z_width_sd = 6.0;
    double s_width_sd = 5.0;
    int smoothing_steps = 2;  // implicit half steps at the start (Rannacher)
};

// Terminal wealth as a function of z(T) with the points where it jumps or kinks.
struct TerminalWealth {
    std::function<double(double)> f;
    std::vector<double> kinks;
};

inline TerminalWealth terminal_wealth_of(const SrmvStrategy& s) {
    std::vector<double> k;
    if (std::isfinite(s.solution().z_dag)) k.push_back(s.solution().z_dag);
    return {[s](double z) { return s.terminal(z); }, k};
}

inline TerminalWealth terminal_wealth_of(const VrmvStrategy& s) {
    std::vector<double> k;
    for (double c : {s.solution().c2, s.solution().xi, s.solution().c1})
        if (c > 0.0) k.push_back(c);
    return {[s](double z) { return s.terminal(z); }, k};
}

inline TerminalWealth constant_terminal(double c) { return {[c](double) { return c; }, {}}; }

// Node values X(t, z, s) on a (ln z, s) lattice, stored at a subset of time levels.
class PdeSolution {
public:
    std::vector<double> y;      // ln z nodes
    std::vector<double> s;      // second state nodes
    std::vector<double> times;  // ascending
    std::vector<std::vector<double>> layers;
    int steps = 0;
    std::string state_name;
    std::string scheme;

    int nz() const { return static_cast<int>(y.size()); }
    int ns() const { return static_cast<int>(s.size()); }
    double node(std::size_t layer, int i, int j) const { return layers[layer][i * ns() + j]; }

    bool inside(double z, double sv) const {
        double ly = std::log(z);
        return ly >= y.front() && ly <= y.back() && sv >= s.front() && sv <= s.back();
    }

    // True when the 4x4 stencil around (z, s) had to be shifted against an edge.
    bool near_boundary(double z, double sv) const {
        auto edge = [](const std::vector<double>& g, double x) {
            double h = g[1] - g[0];
            int k = static_cast<int>(std::floor((x - g[0]) / h));
            return k < 1 || k > static_cast<int>(g.size()) - 3;
        };
        return edge(y, std::log(z)) || edge(s, sv);
    }

    double value(double t, double z, double sv) const { return eval(t, z, sv, 0); }
    // dX/d(ln z)
    double d_log_z(double t, double z, double sv) const { return eval(t, z, sv, 1); }
    double d_state(double t, double z, double sv) const { return eval(t, z, sv, 2); }

    void write_csv(std::ostream& os, bool all_layers = false) const {
        os << "t,z," << state_name << ",X\n";
        os.precision(12);
        std::size_t last = all_layers ? layers.size() : 1;
        for (std::size_t l = 0; l < last; ++l)
            for (int i = 0; i < nz(); ++i)
                for (int j = 0; j < ns(); ++j)
                    os << times[l] << ',' << std::exp(y[i]) << ',' << s[j] << ',' << node(l, i, j)
                       << '\n';
    }

private:
    struct Stencil {
        int base;
        double w[4];
    };

    static Stencil stencil(const std::vector<double>& g, double x, bool derivative) {
        const int n = static_cast<int>(g.size());
        const double h = g[1] - g[0];
        int k = static_cast<int>(std::floor((x - g[0]) / h));
        Stencil st{};
        st.base = std::clamp(k - 1, 0, n - 4);
        double u = (x - g[st.base]) / h;
        if (!derivative) {
            st.w[0] = -(u - 1) * (u - 2) * (u - 3) / 6.0;
            st.w[1] = u * (u - 2) * (u - 3) / 2.0;
            st.w[2] = -u * (u - 1) * (u - 3) / 2.0;
            st.w[3] = u * (u - 1) * (u - 2) / 6.0;
        } else {
            st.w[0] = -((u - 2) * (u - 3) + (u - 1) * (u - 3) + (u - 1) * (u - 2)) / 6.0 / h;
            st.w[1] = ((u - 2) * (u - 3) + u * (u - 3) + u * (u - 2)) / 2.0 / h;
            st.w[2] = -((u - 1) * (u - 3) + u * (u - 3) + u * (u - 1)) / 2.0 / h;
            st.w[3] = ((u - 1) * (u - 2) + u * (u - 2) + u * (u - 1)) / 6.0 / h;
        }
        return st;
    }

    double eval_layer(std::size_t l, double ly, double sv, int what) const {
        Stencil a = stencil(y, ly, what == 1);
        Stencil b = stencil(s, sv, what == 2);
        double out = 0.0;
        for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q) out += a.w[p] * b.w[q] * node(l, a.base + p, b.base + q);
        return out;
    }

    double eval(double t, double z, double sv, int what) const {
        if (!(z > 0.0) || !inside(z, sv)) throw DomainError("PDE query outside the lattice");
        if (t < times.front() || t > times.back()) throw DomainError("PDE query outside [0,T]");
        double ly = std::log(z);
        auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t hi = std::min<std::size_t>(it - times.begin(), times.size() - 1);
        std::size_t lo = hi == 0 ? 0 : hi - 1;
        if (lo == hi || times[hi] == times[lo]) return eval_layer(hi, ly, sv, what);
        double wt = (t - times[lo]) / (times[hi] - times[lo]);
        return (1.0 - wt) * eval_layer(lo, ly, sv, what) + wt * eval_layer(hi, ly, sv, what);
    }
};

namespace detail {

// Coefficients of X_t + a_y X_yy + b_y X_y + a_s X_ss + b_s X_s + c X_ys = r X, y = ln z,
// each depending on the second state only.
struct PdeCoefficients {
    std::vector<double> ydiff, ydrift, sdiff, sdrift, cross;
    double r = 0.0;
    bool s_reflecting = true;
};

struct Tri {
    std::vector<double> l, d, u;
};

inline void stencil_coeffs(double diff, double drift, double h, double& l, double& d, double& u) {
    if (std::abs(drift) * h <= 2.0 * diff) {
        l = diff / (h * h) - drift / (2.0 * h);
        d = -2.0 * diff / (h * h);
        u = diff / (h * h) + drift / (2.0 * h);
    } else if (drift > 0.0) {
        l = diff / (h * h);
        d = -2.0 * diff / (h * h) - drift / h;
        u = diff / (h * h) + drift / h;
    } else {
        l = diff / (h * h) - drift / h;
        d = -2.0 * diff / (h * h) + drift / h;
        u = diff / (h * h);
    }
}

// y-direction operator for one s-node; far field X_zz = 0 eliminated through ghost nodes.
inline Tri y_operator(double diff, double drift, double r, double h, int n) {
    Tri t{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    double l, d, u;
    stencil_coeffs(diff, drift, h, l, d, u);
    for (int i = 0; i < n; ++i) {
        t.l[i] = l;
        t.d[i] = d - r;
        t.u[i] = u;
    }
    // X_zz = 0  <=>  X_yy = X_y
    const double a = 1.0 / (h * h), b = 1.0 / (2.0 * h);
    t.d[0] += t.l[0] * 2.0 * a / (a + b);
    t.u[0] += t.l[0] * -(a - b) / (a + b);
    t.l[0] = 0.0;
    t.d[n - 1] += t.u[n - 1] * 2.0 * a / (a - b);
    t.l[n - 1] += t.u[n - 1] * -(a + b) / (a - b);
    t.u[n - 1] = 0.0;
    return t;
}

inline Tri s_operator(const PdeCoefficients& c, double h) {
    const int n = static_cast<int>(c.sdiff.size());
    Tri t{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    for (int j = 0; j < n; ++j) stencil_coeffs(c.sdiff[j], c.sdrift[j], h, t.l[j], t.d[j], t.u[j]);
    if (c.s_reflecting) {
        t.u[0] += t.l[0];
        t.l[n - 1] += t.u[n - 1];
    } else {
        // linear extrapolation: the edge rows become one-sided first differences
        t.d[0] += 2.0 * t.l[0];
        t.u[0] -= t.l[0];
        t.d[n - 1] += 2.0 * t.u[n - 1];
        t.l[n - 1] -= t.u[n - 1];
    }
    t.l[0] = 0.0;
    t.u[n - 1] = 0.0;
    return t;
}

// Solves (I - k A) x = rhs in place for tridiagonal A; rhs and x are strided views.
inline void implicit_solve(const Tri& A, double k, double* x, int n, int stride, std::vector<double>& cw,
                           std::vector<double>& dw) {
    double b0 = 1.0 - k * A.d[0];
    cw[0] = -k * A.u[0] / b0;
    dw[0] = x[0] / b0;
    for (int i = 1; i < n; ++i) {
        double a = -k * A.l[i], b = 1.0 - k * A.d[i], c = -k * A.u[i];
        double m = b - a * cw[i - 1];
        cw[i] = c / m;
        dw[i] = (x[i * stride] - a * dw[i - 1]) / m;
    }
    x[(n - 1) * stride] = dw[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i * stride] = dw[i] - cw[i] * x[(i + 1) * stride];
}

inline std::vector<double> uniform_grid_through(double lo, double hi, double anchor, int n) {
    double h = (hi - lo) / (n - 1);
    double k = std::floor((anchor - lo) / h);
    double start = anchor - k * h;
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = start + i * h;
    return g;
}

inline PdeSolution solve_pde_2d(const PdeCoefficients& c, std::vector<double> yg, std::vector<double> sg,
                                double T, const TerminalWealth& term, const PdeGrid& grid,
                                const std::string& state_name) {
    const int nz = static_cast<int>(yg.size()), ns = static_cast<int>(sg.size());
    const double hy = yg[1] - yg[0], hs = sg[1] - sg[0];
    const int N = grid.steps;
    const double dt = T / N;

    double cross_max = 0.0;
    for (double v : c.cross) cross_max = std::max(cross_max, std::abs(v));
    double cfl = dt * cross_max / (4.0 * hy * hs);
    if (cfl > 1.0) {
        std::ostringstream os;
        os << "PDE: explicit cross term too strong for the time step (dt*|c|/(4 hy hs) = " << cfl
           << " > 1); raise the number of time steps";
        throw ResolutionError(os.str());
    }

    std::vector<Tri> Ay;
    for (int j = 0; j < ns; ++j) Ay.push_back(y_operator(c.ydiff[j], c.ydrift[j], c.r, hy, nz));
    Tri As = s_operator(c, hs);

    // terminal layer, cell averaged so the kinks do not spoil convergence
    std::vector<double> lk;
    for (double k : term.kinks)
        if (k > 0.0) lk.push_back(std::log(k));
    std::vector<double> U(static_cast<std::size_t>(nz) * ns);
    for (int i = 0; i < nz; ++i) {
        double lo = yg[i] - 0.5 * hy, hi = yg[i] + 0.5 * hy;
        double avg = quad::gauss_legendre_split<8>([&](double v) { return term.f(std::exp(v)); }, lo, hi,
                                                   lk, hy) / hy;
        for (int j = 0; j < ns; ++j) U[i * ns + j] = avg;
    }

    PdeSolution out;
    out.y = yg;
    out.s = sg;
    out.steps = N;
    out.state_name = state_name;
    out.scheme = "douglas-adi";
    std::vector<double> rt{T};
    std::vector<std::vector<double>> rl{U};

    std::vector<double> F1(U.size()), F2(U.size()), Y(U.size());
    std::vector<double> cw(std::max(nz, ns)), dw(std::max(nz, ns));

    auto apply_y = [&](const std::vector<double>& X, std::vector<double>& F) {
        for (int j = 0; j < ns; ++j) {
            const Tri& A = Ay[j];
            for (int i = 0; i < nz; ++i) {
                double v = A.d[i] * X[i * ns + j];
                if (i > 0) v += A.l[i] * X[(i - 1) * ns + j];
                if (i + 1 < nz) v += A.u[i] * X[(i + 1) * ns + j];
                F[i * ns + j] = v;
            }
        }
    };
    auto apply_s = [&](const std::vector<double>& X, std::vector<double>& F) {
        for (int i = 0; i < nz; ++i) {
            const double* x = &X[i * ns];
            for (int j = 0; j < ns; ++j) {
                double v = As.d[j] * x[j];
                if (j > 0) v += As.l[j] * x[j - 1];
                if (j + 1 < ns) v += As.u[j] * x[j + 1];
                F[i * ns + j] = v;
            }
        }
    };
    const double cscale = 1.0 / (4.0 * hy * hs);

    auto douglas = [&](double k, double th) {
        apply_y(U, F1);
        apply_s(U, F2);
        for (int i = 0; i < nz; ++i)
            for (int j = 0; j < ns; ++j) {
                double mixed = 0.0;
                if (i > 0 && i + 1 < nz && j > 0 && j + 1 < ns)
                    mixed = c.cross[j] * cscale *
                            (U[(i + 1) * ns + j + 1] - U[(i + 1) * ns + j - 1] - U[(i - 1) * ns + j + 1] +
                             U[(i - 1) * ns + j - 1]);
                std::size_t q = static_cast<std::size_t>(i) * ns + j;
                Y[q] = U[q] + k * (mixed + F1[q] + F2[q]) - th * k * F1[q];
            }
        for (int j = 0; j < ns; ++j) implicit_solve(Ay[j], th * k, &Y[j], nz, ns, cw, dw);
        for (std::size_t q = 0; q < Y.size(); ++q) Y[q] -= th * k * F2[q];
        for (int i = 0; i < nz; ++i) implicit_solve(As, th * k, &Y[i * ns], ns, 1, cw, dw);
        U.swap(Y);
    };

    for (int n = 1; n <= N; ++n) {
        if (n <= grid.smoothing_steps) {
            douglas(0.5 * dt, 1.0);
            douglas(0.5 * dt, 1.0);
        } else {
            douglas(dt, 0.5);
        }
        for (double v : {U[0], U[U.size() / 2], U.back()})
            if (!std::isfinite(v)) throw NumericError("PDE: non-finite values in the backward sweep");
        if (n % std::max(1, grid.store_every) == 0 || n == N) {
            rt.push_back(T - n * dt);
            rl.push_back(U);
        }
    }
    rt.back() = 0.0;
    for (std::size_t l = rl.size(); l-- > 0;) {
        out.times.push_back(rt[l]);
        out.layers.push_back(std::move(rl[l]));
    }
    return out;
}

inline void check_grid(const PdeGrid& g) {
    if (g.nz < 16 || g.ns < 5 || g.steps < 4)
        throw ResolutionError("PDE grid too coarse: need nz >= 16, ns >= 5 and steps >= 4");
}

// ln z window from the reference lognormal law of z(T) with Sharpe ratio theta_ref.
inline std::vector<double> log_z_grid(double r, double theta_ref, double T, const PdeGrid& g) {
    double v = std::max(std::abs(theta_ref) * std::sqrt(T), 0.1);
    double m = -(r + 0.5 * theta_ref * theta_ref) * T;
    return uniform_grid_through(m - g.z_width_sd * v, m + g.z_width_sd * v, 0.0, g.nz);
}

}  // namespace detail

inline PdeSolution solve_pde_ou(const OuMarket& m, const TerminalWealth& term, const PdeGrid& grid = {}) {
    detail::check_grid(grid);
    if (!(m.sigma > 0.0)) throw DomainError("OU market: sigma must be positive");
    if (m.lambda < 0.0) throw DomainError("OU market: lambda must be nonnegative");
    double sd = std::abs(m.gamma_ou) * std::sqrt(m.lambda > 0.0 ? std::min(m.T, 0.5 / m.lambda) : m.T);
    double lo = std::min(m.theta0, m.theta_bar), hi = std::max(m.theta0, m.theta_bar);
    double half = std::max(grid.s_width_sd * sd, 0.25 * std::max({std::abs(m.theta0), std::abs(m.theta_bar), 0.1}));
    auto sg = detail::uniform_grid_through(lo - half, hi + half, m.theta0, grid.ns);
    auto yg = detail::log_z_grid(m.r, m.theta0, m.T, grid);

    detail::PdeCoefficients c;
    c.r = m.r;
    c.s_reflecting = true;
    for (double th : sg) {
        c.ydiff.push_back(0.5 * th * th);
        c.ydrift.push_back(0.5 * th * th - m.r);
        c.sdiff.push_back(0.5 * m.gamma_ou * m.gamma_ou);
        c.sdrift.push_back(m.lambda * m.theta_bar - (m.lambda + m.gamma_ou) * th);
        c.cross.push_back(-m.gamma_ou * th);
    }
    return detail::solve_pde_2d(c, yg, sg, m.T, term, grid, "theta");
}

// u = (-z theta X_z + gamma_ou X_theta) / sigma
inline double policy_ou(const PdeSolution& sol, const OuMarket& m, double t, double z, double theta) {
    if (t >= m.T) throw DomainError("policy undefined at t = T");
    return (-theta * sol.d_log_z(t, z, theta) + m.gamma_ou * sol.d_state(t, z, theta)) / m.sigma;
}

inline PdeSolution solve_pde_heston(const HestonMarket& m, const TerminalWealth& term,
                                    const PdeGrid& grid = {}) {
    detail::check_grid(grid);
    if (!(m.iota > 0.0 && m.nu_bar > 0.0 && m.xi > 0.0 && m.nu0 > 0.0))
        throw DomainError("Heston market: iota, nu_bar, xi and nu0 must be positive");
    double sd = m.xi * std::sqrt(m.nu_bar / (2.0 * m.iota));
    double lo = std::min(m.nu0, m.nu_bar), hi = std::max(m.nu0, m.nu_bar);
    double half = std::max(grid.s_width_sd * sd, 0.25 * m.nu_bar);
    double floor = kHestonVarianceFloor * std::min(m.nu0, m.nu_bar);
    auto sg = detail::uniform_grid_through(std::max(lo - half, floor), hi + half, m.nu0, grid.ns);
    auto yg = detail::log_z_grid(m.r, (m.mu - m.r) / std::sqrt(m.nu0), m.T, grid);

    const double b = m.mu - m.r;
    detail::PdeCoefficients c;
    c.r = m.r;
    c.s_reflecting = false;
    for (double nu : sg) {
        double th2 = b * b / nu;
        c.ydiff.push_back(0.5 * th2);
        c.ydrift.push_back(0.5 * th2 - m.r);
        c.sdiff.push_back(0.5 * m.xi * m.xi * nu);
        c.sdrift.push_back(m.iota * (m.nu_bar - nu) - b * m.xi);
        c.cross.push_back(-b * m.xi);
    }
    return detail::solve_pde_2d(c, yg, sg, m.T, term, grid, "nu");
}

// u = -z (mu - r) X_z / nu + xi X_nu
inline double policy_heston(const PdeSolution& sol, const HestonMarket& m, double t, double z, double nu) {
    if (t >= m.T) throw DomainError("policy undefined at t = T");
    return -(m.mu - m.r) / nu * sol.d_log_z(t, z, nu) + m.xi * sol.d_state(t, z, nu);
}

// Constant-parameter Black-Scholes market seen at the initial state.
inline MarketModel bs_reference(const OuMarket& m) {
    Vec mu(1);
    mu << m.r + m.theta0 * m.sigma;
    Mat s(1, 1);
    s << m.sigma;
    return MarketModel::constant(m.r, mu, s, m.T);
}

inline MarketModel bs_reference(const HestonMarket& m) {
    Vec mu(1);
    mu << m.mu;
    Mat s(1, 1);
    s << std::sqrt(m.nu_bar);
    return MarketModel::constant(m.r, mu, s, m.T);
}

struct McEstimate {
    double value = 0.0;
    double se = 0.0;
};

namespace detail {

template <class Step>
McEstimate mc_average(const TerminalWealth& term, double T, double t, double z, int paths, int steps,
                      std::uint64_t seed, double s0, Step step) {
    if (paths < 100) throw DomainError("mc_conditional_wealth: need at least 100 paths");
    if (steps < 1) throw DomainError("mc_conditional_wealth: need at least one step");
    if (!(t >= 0.0 && t < T)) throw DomainError("mc_conditional_wealth: t outside [0,T)");
    const double dt = (T - t) / steps, sq = std::sqrt(dt);
    double mean = 0.0, m2 = 0.0;
    for (int p = 0; p < paths; ++p) {
        double lz = 0.0, s = s0;
        for (int k = 0; k < steps; ++k) step(lz, s, dt, sq * rng::gaussian(seed, p, k, 0));
        double zT = z * std::exp(lz);
        double v = std::exp(lz) * term.f(zT);
        double dlt = v - mean;
        mean += dlt / (p + 1);
        m2 += dlt * (v - mean);
    }
    return {mean, std::sqrt(m2 / (paths - 1) / paths)};
}

}  // namespace detail

// E[z(T) x(T) / z(t) | z(t) = z, theta(t) = theta] by log-Euler simulation.
inline McEstimate mc_conditional_wealth(const OuMarket& m, const TerminalWealth& term, double t, double z,
                                        double theta, int paths, int steps, std::uint64_t seed) {
    return detail::mc_average(term, m.T, t, z, paths, steps, seed, theta,
                              [&](double& lz, double& th, double dt, double dW) {
                                  lz += -(m.r + 0.5 * th * th) * dt - th * dW;
                                  th += m.lambda * (m.theta_bar - th) * dt + m.gamma_ou * dW;
                              });
}

inline McEstimate mc_conditional_wealth(const HestonMarket& m, const TerminalWealth& term, double t, double z,
                                        double nu, int paths, int steps, std::uint64_t seed) {
    const double floor = kHestonVarianceFloor * std::min(m.nu0, m.nu_bar);
    return detail::mc_average(term, m.T, t, z, paths, steps, seed, nu,
                              [&](double& lz, double& v, double dt, double dW) {
                                  double ve = std::max(v, floor);
                                  double th = (m.mu - m.r) / std::sqrt(ve);
                                  lz += -(m.r + 0.5 * th * th) * dt - th * dW;
                                  v += m.iota * (m.nu_bar - ve) * dt + m.xi * std::sqrt(ve) * dW;
                              });
}

}  // namespace hybridmv
