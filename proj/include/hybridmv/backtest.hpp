#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hybridmv/errors.hpp"
#include "hybridmv/market_core.hpp"
#include "hybridmv/rng.hpp"
#include "hybridmv/srmv_dynamic.hpp"
#include "hybridmv/static_models.hpp"
#include "hybridmv/vrmv_dynamic.hpp"

namespace hybridmv {

struct SimConfig {
    int paths = 10000;
    int steps = 2000;
    std::uint64_t seed = 20240101;
    int record_paths = 0;   // trajectories kept for the first record_paths paths
    int record_stride = 1;  // every record_stride steps
    int threads = 1;

    void validate() const {
        if (paths < 1) throw DomainError("simulation: paths must be >= 1");
        if (steps < 1) throw DomainError("simulation: steps must be >= 1");
        if (record_paths < 0 || record_stride < 1) throw DomainError("simulation: bad recording settings");
        if (threads < 1) throw DomainError("simulation: threads must be >= 1");
    }
};

struct Trajectory {
    std::vector<double> t;
    std::vector<double> z;
    std::vector<double> wealth;
    std::vector<Vec> allocation;
};

struct PathEnsemble {
    Vec terminal_wealth;
    Vec terminal_closed_form;  // x*(T, z(T)); equals terminal_wealth in closed_form mode
    Vec terminal_z;
    std::vector<Trajectory> trajectories;

    int paths() const { return static_cast<int>(terminal_wealth.size()); }
};

struct SimulatedPaths {
    Mat gross_returns;  // S_i(T)/S_i(0), one row per path
    Vec terminal_z;
    double risk_free_growth = 1.0;
    std::vector<Trajectory> trajectories;  // z only
};

namespace detail {

// One exact log step of the prices and the state-price density over [t, t+dt].
struct StepCoefficients {
    Vec log_drift;     // per asset
    Mat vol;           // sigma * sqrt(dt)
    double z_drift;
    Vec z_vol;         // -theta * sqrt(dt)
    double r_dt;
};

inline std::vector<StepCoefficients> step_table(const MarketModel& m, int steps) {
    const double T = m.horizon(), dt = T / steps;
    std::vector<StepCoefficients> out;
    out.reserve(steps);
    for (int k = 0; k < steps; ++k) {
        double t = k * dt;
        const Mat& s = m.sigma(t);
        StepCoefficients c;
        c.log_drift = (m.mu(t) - 0.5 * s.rowwise().squaredNorm()) * dt;
        c.vol = s * std::sqrt(dt);
        c.r_dt = m.integrated_rate(t, t + dt);
        c.z_drift = -c.r_dt - 0.5 * m.integrated_theta2(t, t + dt);
        c.z_vol = -m.theta(t) * std::sqrt(dt);
        out.push_back(std::move(c));
    }
    return out;
}

// Runs f(begin, end) on contiguous blocks; paths never share state, so the split does not change results.
template <class F>
void parallel_blocks(int n, int threads, F f) {
    threads = std::clamp(threads, 1, std::max(1, n / 64));
    if (threads == 1) {
        f(0, n);
        return;
    }
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
        int a = static_cast<int>(static_cast<long long>(n) * w / threads);
        int b = static_cast<int>(static_cast<long long>(n) * (w + 1) / threads);
        pool.emplace_back([&f, a, b] { f(a, b); });
    }
    for (auto& t : pool) t.join();
}

inline Vec draw(std::uint64_t seed, int path, int step, int n) {
    Vec e(n);
    for (int j = 0; j < n; ++j)
        e[j] = rng::gaussian(seed, static_cast<std::uint64_t>(path), static_cast<std::uint64_t>(step),
                             static_cast<std::uint64_t>(j));
    return e;
}

}  // namespace detail

inline SimulatedPaths simulate_paths(const MarketModel& model, const SimConfig& cfg) {
    cfg.validate();
    const int n = model.n();
    const double T = model.horizon(), dt = T / cfg.steps;
    auto table = detail::step_table(model, cfg.steps);
    SimulatedPaths out;
    out.gross_returns.resize(cfg.paths, n);
    out.terminal_z.resize(cfg.paths);
    out.risk_free_growth = std::exp(model.integrated_rate(0.0, T));
    out.trajectories.resize(std::min(cfg.record_paths, cfg.paths));
    detail::parallel_blocks(cfg.paths, cfg.threads, [&](int a, int b) {
        for (int p = a; p < b; ++p) {
            Vec ls = Vec::Zero(n);
            double lz = 0.0;
            bool rec = p < cfg.record_paths;
            Trajectory tr;
            if (rec) {
                tr.t.push_back(0.0);
                tr.z.push_back(1.0);
            }
            for (int k = 0; k < cfg.steps; ++k) {
                const auto& c = table[k];
                Vec e = detail::draw(cfg.seed, p, k, n);
                ls += c.log_drift + c.vol * e;
                lz += c.z_drift + c.z_vol.dot(e);
                if (rec && ((k + 1) % cfg.record_stride == 0 || k + 1 == cfg.steps)) {
                    tr.t.push_back((k + 1) * dt);
                    tr.z.push_back(std::exp(lz));
                }
            }
            out.gross_returns.row(p) = ls.array().exp().matrix().transpose();
            out.terminal_z[p] = std::exp(lz);
            if (rec) out.trajectories[p] = std::move(tr);
        }
    });
    return out;
}

// A dynamic policy in a complete market: u = (sigma sigma^T)^{-1} b * exposure(t, z).
struct DynamicPolicy {
    std::string name;
    std::function<double(double t, double z)> wealth;
    std::function<double(double z_T)> terminal;
    std::function<double(double t, double z)> exposure;
};

inline DynamicPolicy mv_dynamic_policy(const MvSolution& mv, const MarketModel& market) {
    return {"mv", [mv, market](double t, double z) { return mv_wealth_process(mv, market, t, z); },
            [mv](double zT) { return mv_terminal_wealth(mv, zT); },
            [mv, market](double t, double z) {
                return -truncated_expectation_zdz(lognormal_moments(market, t), z, 0.5 * mv.rho, -0.5 * mv.eta,
                                                  0.0, mv.ratio());
            }};
}

inline DynamicPolicy srmv_dynamic_policy(const SrmvStrategy& s, std::string name = "srmv") {
    return {std::move(name), [s](double t, double z) { return s.wealth(t, z); },
            [s](double zT) { return s.terminal(zT); }, [s](double t, double z) { return s.exposure(t, z); }};
}

inline DynamicPolicy vrmv_dynamic_policy(const VrmvStrategy& s, std::string name = "vrmv") {
    return {std::move(name), [s](double t, double z) { return s.wealth(t, z); },
            [s](double zT) { return s.terminal(zT); }, [s](double t, double z) { return s.exposure(t, z); }};
}

inline DynamicPolicy zero_policy(double x0, const MarketModel& market) {
    return {"cash", [x0, market](double t, double) { return x0 * std::exp(market.integrated_rate(0.0, t)); },
            [x0, market](double) { return x0 * std::exp(market.integrated_rate(0.0, market.horizon())); },
            [](double, double) { return 0.0; }};
}

enum class RolloutMode { closed_form, self_financing };

struct RolloutOptions {
    RolloutMode mode = RolloutMode::self_financing;
    // Exposure is tabulated in ln z once per step over the range occupied by the paths, with node
    // spacing at most this fraction of the remaining conditional standard deviation of ln z(T).
    double table_spacing = 0.25;
    int table_min_nodes = 129;
    int table_max_nodes = 8193;
    bool tabulate = true;
};

namespace detail {

// Cubic Lagrange interpolation on a uniform grid.
class UniformTable {
public:
    UniformTable(double lo, double hi, int nodes, const std::function<double(double)>& f)
        : lo_(lo), h_((hi - lo) / (nodes - 1)), v_(nodes) {
        for (int i = 0; i < nodes; ++i) v_[i] = f(lo_ + i * h_);
    }

    double operator()(double x) const {
        const int n = static_cast<int>(v_.size());
        double u = (x - lo_) / h_;
        int i = std::clamp(static_cast<int>(std::floor(u)) - 1, 0, n - 4);
        double s = u - i;
        double l0 = -(s - 1) * (s - 2) * (s - 3) / 6.0, l1 = s * (s - 2) * (s - 3) / 2.0;
        double l2 = -s * (s - 1) * (s - 3) / 2.0, l3 = s * (s - 1) * (s - 2) / 6.0;
        return l0 * v_[i] + l1 * v_[i + 1] + l2 * v_[i + 2] + l3 * v_[i + 3];
    }

private:
    double lo_, h_;
    std::vector<double> v_;
};

}  // namespace detail

inline PathEnsemble rollout_dynamic(const DynamicPolicy& policy, const MarketModel& model, double x0,
                                    const SimConfig& cfg, RolloutOptions opt = {}) {
    cfg.validate();
    const int n = model.n(), P = cfg.paths;
    const double T = model.horizon(), dt = T / cfg.steps;
    auto table = detail::step_table(model, cfg.steps);

    std::vector<double> lz(P, 0.0), x(P, x0);
    PathEnsemble ens;
    const int rec = std::min(cfg.record_paths, P);
    ens.trajectories.resize(rec);
    auto record = [&](int p, double t, const Vec& u) {
        auto& tr = ens.trajectories[p];
        tr.t.push_back(t);
        tr.z.push_back(std::exp(lz[p]));
        tr.wealth.push_back(opt.mode == RolloutMode::self_financing ? x[p] : policy.wealth(t, std::exp(lz[p])));
        tr.allocation.push_back(u);
    };

    for (int k = 0; k < cfg.steps; ++k) {
        const double t = k * dt;
        const auto& c = table[k];
        Vec dir = allocation_direction(model, t);
        const Vec excess = model.excess(t);

        std::function<double(double)> expo;
        std::optional<detail::UniformTable> tab;
        if (opt.mode == RolloutMode::self_financing || (rec > 0 && k % cfg.record_stride == 0)) {
            if (opt.tabulate && P > opt.table_min_nodes) {
                auto [mn, mx] = std::minmax_element(lz.begin(), lz.end());
                double sd = lognormal_moments(model, t).v;
                double lo = *mn - 1e-9 - 1e-3, hi = *mx + 1e-9 + 1e-3;
                int nodes = static_cast<int>(std::ceil((hi - lo) / (opt.table_spacing * sd))) + 1;
                nodes = std::clamp(nodes, opt.table_min_nodes, opt.table_max_nodes);
                tab.emplace(lo, hi, nodes, [&](double l) { return policy.exposure(t, std::exp(l)); });
                expo = [&](double l) { return (*tab)(l); };
            } else {
                expo = [&](double l) { return policy.exposure(t, std::exp(l)); };
            }
        }

        std::vector<int> failed(P, 0);
        detail::parallel_blocks(P, cfg.threads, [&](int a, int b) {
            for (int p = a; p < b; ++p) {
                Vec e = detail::draw(cfg.seed, p, k, n);
                if (opt.mode == RolloutMode::self_financing) {
                    Vec u = dir * expo(lz[p]);
                    if (p < rec && k % cfg.record_stride == 0) record(p, t, u);
                    x[p] += x[p] * (std::exp(c.r_dt) - 1.0) + excess.dot(u) * dt + u.dot(c.vol * e);
                    if (!(x[p] > -10.0 * x0) || !std::isfinite(x[p])) failed[p] = 1;
                } else if (p < rec && k % cfg.record_stride == 0) {
                    record(p, t, dir * expo(lz[p]));
                }
                lz[p] += c.z_drift + c.z_vol.dot(e);
            }
        });
        auto bad = std::find(failed.begin(), failed.end(), 1);
        if (bad != failed.end()) {
            std::ostringstream os;
            os << "rollout '" << policy.name << "': wealth left [-10 x0, inf) on path " << (bad - failed.begin())
               << " at step " << k;
            throw NumericError(os.str());
        }
    }

    ens.terminal_wealth.resize(P);
    ens.terminal_closed_form.resize(P);
    ens.terminal_z.resize(P);
    for (int p = 0; p < P; ++p) {
        double z = std::exp(lz[p]);
        ens.terminal_z[p] = z;
        ens.terminal_closed_form[p] = policy.terminal(z);
        ens.terminal_wealth[p] = opt.mode == RolloutMode::self_financing ? x[p] : ens.terminal_closed_form[p];
        if (p < rec) {
            auto& tr = ens.trajectories[p];
            tr.t.push_back(T);
            tr.z.push_back(z);
            tr.wealth.push_back(ens.terminal_wealth[p]);
            tr.allocation.push_back(Vec::Zero(n));
        }
    }
    return ens;
}

// Buy-and-hold: x(T) = R'u + R_f u_f on each simulated path.
inline PathEnsemble rollout_static(const StaticSolution& sol, const SimulatedPaths& paths) {
    if (sol.u.size() != paths.gross_returns.cols()) throw DomainError("rollout_static: asset count mismatch");
    PathEnsemble ens;
    ens.terminal_wealth = paths.gross_returns * sol.u + Vec::Constant(paths.gross_returns.rows(),
                                                                      paths.risk_free_growth * sol.u_f);
    ens.terminal_closed_form = ens.terminal_wealth;
    ens.terminal_z = paths.terminal_z;
    return ens;
}

// Scenarios drawn from the model's one-period gross returns.
inline ScenarioSet model_scenarios(const MarketModel& model, int N, std::uint64_t seed, int steps = 1) {
    SimConfig cfg;
    cfg.paths = N;
    cfg.steps = steps;
    cfg.seed = seed;
    SimulatedPaths sp = simulate_paths(model, cfg);
    ScenarioSet s;
    s.returns = sp.gross_returns;
    s.r_free = sp.risk_free_growth;
    return s;
}

// --- metrics -----------------------------------------------------------------------------

enum class SortinoConvention {
    semivariance,       // (mean - w_b) / sqrt(semivariance about the mean)
    benchmark_downside  // (mean - w_b) / sqrt(E[min(x - w_b, 0)^2])
};

struct MetricsReport {
    double mean = 0.0;
    double variance = 0.0;
    double semivariance = 0.0;
    double sharpe = 0.0;
    double sortino = 0.0;
    double var10 = 0.0;
    double var5 = 0.0;
    double rachev10 = 0.0;
    double rachev5 = 0.0;

    // Table column order
    static std::vector<std::string> columns() {
        return {"variance", "semivariance", "sharpe", "sortino", "var10", "var5", "rachev10", "rachev5"};
    }
    std::vector<double> values() const { return {variance, semivariance, sharpe, sortino, var10, var5, rachev10, rachev5}; }
};

namespace detail {

inline double ratio_or_flag(double num, double den) {
    if (den > 0.0) return num / den;
    if (num == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return num > 0.0 ? kInf : -kInf;
}

// lower empirical quantile: smallest sample with empirical CDF >= gamma
inline double lower_quantile(const std::vector<double>& sorted, double gamma) {
    std::size_t n = sorted.size();
    std::size_t k = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n) - 1e-12));
    k = std::clamp<std::size_t>(k, 1, n);
    return sorted[k - 1];
}

inline double rachev(const std::vector<double>& sorted, double alpha) {
    std::size_t n = sorted.size();
    std::size_t k = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) + 1e-12));
    if (k == 0) return std::numeric_limits<double>::quiet_NaN();
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        lo += sorted[i];
        hi += sorted[n - 1 - i];
    }
    lo /= static_cast<double>(k);
    hi /= static_cast<double>(k);
    return ratio_or_flag(hi, std::abs(lo));
}

}  // namespace detail

inline MetricsReport compute_metrics(const Vec& terminal, double x0, const MarketModel& model,
                                     SortinoConvention conv = SortinoConvention::semivariance) {
    const Eigen::Index n = terminal.size();
    if (n < 1) throw DomainError("metrics: empty ensemble");
    if (!terminal.allFinite()) throw NumericError("metrics: non-finite terminal wealth");
    const double wb = x0 * std::exp(model.integrated_rate(0.0, model.horizon()));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    MetricsReport m;
    // a constant sample keeps its value exactly so that the dispersion comes out as a true zero
    m.mean = terminal.minCoeff() == terminal.maxCoeff() ? terminal[0] : terminal.mean();
    if (n < 2) {
        // a single path has no dispersion to report
        m.variance = m.semivariance = m.sharpe = m.sortino = nan;
        m.var10 = m.var5 = m.rachev10 = m.rachev5 = nan;
        return m;
    }
    Vec c = terminal.array() - m.mean;
    m.variance = c.squaredNorm() / static_cast<double>(n - 1);
    m.semivariance = c.cwiseMin(0.0).squaredNorm() / static_cast<double>(n);
    m.sharpe = detail::ratio_or_flag(m.mean - wb, std::sqrt(m.variance));
    double downside = conv == SortinoConvention::semivariance
                          ? std::sqrt(m.semivariance)
                          : std::sqrt((terminal.array() - wb).min(0.0).square().mean());
    m.sortino = detail::ratio_or_flag(m.mean - wb, downside);

    std::vector<double> net(terminal.data(), terminal.data() + n);
    for (double& v : net) v -= x0;
    std::sort(net.begin(), net.end());
    bool tails = n >= 100;
    m.var10 = tails ? -detail::lower_quantile(net, 0.10) : nan;
    m.var5 = tails ? -detail::lower_quantile(net, 0.05) : nan;
    m.rachev10 = tails ? detail::rachev(net, 0.10) : nan;
    m.rachev5 = tails ? detail::rachev(net, 0.05) : nan;
    return m;
}

inline MetricsReport compute_metrics(const PathEnsemble& ens, double x0, const MarketModel& model,
                                     SortinoConvention conv = SortinoConvention::semivariance) {
    return compute_metrics(ens.terminal_wealth, x0, model, conv);
}

struct Histogram {
    std::vector<double> left, right, density;
};

inline Histogram empirical_pdf(const Vec& sample, int bins) {
    if (bins < 2) throw DomainError("empirical_pdf: bins must be >= 2");
    if (sample.size() < 1) throw DomainError("empirical_pdf: empty sample");
    const double lo = sample.minCoeff(), hi = sample.maxCoeff();
    const double n = static_cast<double>(sample.size());
    Histogram h;
    if (!(hi > lo)) {
        // all mass at one point: one bin of unit width
        h.left = {lo - 0.5};
        h.right = {lo + 0.5};
        h.density = {1.0};
        return h;
    }
    const double w = (hi - lo) / bins;
    std::vector<double> count(bins, 0.0);
    for (Eigen::Index i = 0; i < sample.size(); ++i) {
        int b = static_cast<int>((sample[i] - lo) / w);
        count[std::clamp(b, 0, bins - 1)] += 1.0;
    }
    for (int b = 0; b < bins; ++b) {
        h.left.push_back(lo + b * w);
        h.right.push_back(b + 1 == bins ? hi : lo + (b + 1) * w);
        h.density.push_back(count[b] / (n * w));
    }
    return h;
}

// --- CSV --------------------------------------------------------------------------------

inline std::string fmt_num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream s;
    s.precision(12);
    s << v;
    return s.str();
}

inline void write_metrics_csv(std::ostream& os, const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    os << "policy,mean";
    for (const auto& c : MetricsReport::columns()) os << ',' << c;
    os << '\n';
    for (const auto& [name, m] : rows) {
        os << name << ',' << fmt_num(m.mean);
        for (double v : m.values()) os << ',' << fmt_num(v);
        os << '\n';
    }
}

inline void write_histogram_csv(std::ostream& os, const Histogram& h) {
    os << "bin_left,bin_right,density\n";
    for (std::size_t i = 0; i < h.density.size(); ++i)
        os << fmt_num(h.left[i]) << ',' << fmt_num(h.right[i]) << ',' << fmt_num(h.density[i]) << '\n';
}

inline void write_ensemble_csv(std::ostream& os, const PathEnsemble& ens) {
    os << "path,z_T,x_T,x_T_closed_form\n";
    for (int p = 0; p < ens.paths(); ++p)
        os << p << ',' << fmt_num(ens.terminal_z[p]) << ',' << fmt_num(ens.terminal_wealth[p]) << ','
           << fmt_num(ens.terminal_closed_form[p]) << '\n';
}

inline void write_trajectories_csv(std::ostream& os, const PathEnsemble& ens) {
    os << "path,t,z,x";
    int n = 0;
    for (const auto& tr : ens.trajectories)
        if (!tr.allocation.empty()) n = static_cast<int>(tr.allocation.front().size());
    for (int j = 0; j < n; ++j) os << ",u" << j + 1;
    os << '\n';
    for (std::size_t p = 0; p < ens.trajectories.size(); ++p) {
        const auto& tr = ens.trajectories[p];
        for (std::size_t k = 0; k < tr.t.size(); ++k) {
            os << p << ',' << fmt_num(tr.t[k]) << ',' << fmt_num(tr.z[k]) << ',' << fmt_num(tr.wealth[k]);
            for (int j = 0; j < n; ++j) os << ',' << fmt_num(tr.allocation[k][j]);
            os << '\n';
        }
    }
}

}  // namespace hybridmv
