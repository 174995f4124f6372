#pragma once

#include <string>
#include <vector>

#include "hybridmv/backtest.hpp"
#include "hybridmv/spectra.hpp"
#include "hybridmv/srmv_dynamic.hpp"
#include "hybridmv/static_models.hpp"
#include "hybridmv/vrmv_dynamic.hpp"

namespace hybridmv::experiments {

// One risky asset, T = 1.
inline MarketModel one_asset_market() {
    Vec mu(1);
    mu << 0.1068;
    Mat s(1, 1);
    s << 0.22;
    return MarketModel::constant(0.00408, mu, s, 1.0);
}

// Three indices, sigma used as the volatility matrix, r = 3% continuously compounded.
inline MarketModel three_asset_market() {
    Vec mu(3);
    mu << 0.1471, 0.1566, 0.1651;
    Mat s(3, 3);
    s << 0.1365, 0.0568, 0.0709,
         0.0568, 0.2384, 0.0898,
         0.0709, 0.0898, 0.1740;
    return MarketModel::constant(0.03, mu, s, 1.0);
}

struct PerformanceSetup {
    MarketModel market = three_asset_market();
    double x0 = 1.0;
    double x_d = 1.2;
    double omega = 0.3;
    double k_e = 10.0;
    double k_p = 0.6;
    double gamma = 0.1;
    SimConfig sim;
    RolloutMode mode = RolloutMode::closed_form;
    int scenarios = 10000;
    std::uint64_t scenario_seed = 977;
    SortinoConvention sortino = SortinoConvention::semivariance;
};

struct PolicyOutcome {
    std::string name;
    bool dynamic = true;
    PathEnsemble ensemble;
    MetricsReport metrics;
};

// The seven policies of the performance table, dynamic and static, on one shared set of price paths.
// Static policies are fitted on an independent scenario draw and evaluated on the simulated paths.
inline std::vector<PolicyOutcome> run_performance_table(const PerformanceSetup& s) {
    std::vector<PolicyOutcome> out;
    const MarketModel& m = s.market;
    RolloutOptions ro;
    ro.mode = s.mode;
    auto add_dynamic = [&](const DynamicPolicy& pol) {
        PolicyOutcome o{pol.name, true, rollout_dynamic(pol, m, s.x0, s.sim, ro), {}};
        o.metrics = compute_metrics(o.ensemble, s.x0, m, s.sortino);
        out.push_back(std::move(o));
    };

    SimulatedPaths paths = simulate_paths(m, s.sim);
    ScenarioSet sc = model_scenarios(m, s.scenarios, s.scenario_seed);
    StaticProblem sp{sc, sc.covariance(), sc.mean(), s.x0, s.x_d, s.omega};
    auto add_static = [&](std::string name, const StaticSolution& sol) {
        PolicyOutcome o{std::move(name), false, rollout_static(sol, paths), {}};
        o.metrics = compute_metrics(o.ensemble, s.x0, m, s.sortino);
        out.push_back(std::move(o));
    };

    add_dynamic(mv_dynamic_policy(solve_mv(s.x0, s.x_d, m), m));

    Spectrum ex = Spectrum::exponential(s.k_e), pw = Spectrum::power(s.k_p);
    add_static("static-srmv-exp", solve_static_srmv(sp, discretize(ex, s.scenarios)));
    SrmvProblem pe{s.x0, s.x_d, s.omega, ex, m};
    add_dynamic(srmv_dynamic_policy(SrmvStrategy(solve_multipliers(pe), pe), "srmv-exp"));

    add_static("static-srmv-pow", solve_static_srmv(sp, discretize(pw, s.scenarios)));
    SrmvProblem pp{s.x0, s.x_d, s.omega, pw, m};
    add_dynamic(srmv_dynamic_policy(SrmvStrategy(solve_multipliers(pp), pp), "srmv-pow"));

    add_static("static-vrmv", solve_static_vrmv(sp, s.gamma, s.scenarios <= 60 ? VrmvMode::exact : VrmvMode::heuristic));
    VrmvProblem vp{s.x0, s.x_d, s.omega, s.gamma, m};
    add_dynamic(vrmv_dynamic_policy(VrmvStrategy(solve(vp), vp), "vrmv"));
    return out;
}

inline const PolicyOutcome& find(const std::vector<PolicyOutcome>& v, const std::string& name) {
    for (const auto& o : v)
        if (o.name == name) return o;
    throw DomainError("no policy named " + name);
}

}  // namespace hybridmv::experiments
