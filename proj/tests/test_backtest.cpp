#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hybridmv/backtest.hpp"
#include "hybridmv/experiments.hpp"

using namespace hybridmv;

namespace {

SimConfig cfg(int paths, int steps, std::uint64_t seed = 5) {
    SimConfig c;
    c.paths = paths;
    c.steps = steps;
    c.seed = seed;
    return c;
}

double rms_gap(const PathEnsemble& e) {
    return std::sqrt((e.terminal_wealth - e.terminal_closed_form).squaredNorm() / e.paths());
}

}  // namespace

TEST(Simulation, PricingMoments) {
    auto m = experiments::three_asset_market();
    auto sp = simulate_paths(m, cfg(200000, 1));
    double rT = m.integrated_rate(0.0, 1.0);
    EXPECT_NEAR(sp.risk_free_growth, std::exp(rT), 1e-15);
    for (int i = 0; i < 3; ++i) {
        Vec R = sp.gross_returns.col(i);
        Vec zR = R.cwiseProduct(sp.terminal_z);
        double se = std::sqrt((zR.array() - zR.mean()).square().mean() / zR.size());
        EXPECT_NEAR(zR.mean(), 1.0, 4.0 * se);
        double seR = std::sqrt((R.array() - R.mean()).square().mean() / R.size());
        EXPECT_NEAR(R.mean(), std::exp(m.mu(0.0)(i)), 4.0 * seR);
    }
    double sez = std::sqrt((sp.terminal_z.array() - sp.terminal_z.mean()).square().mean() / sp.terminal_z.size());
    EXPECT_NEAR(sp.terminal_z.mean(), std::exp(-rT), 4.0 * sez);
}

TEST(Simulation, ExactLogStepsAgreeAcrossStepCounts) {
    // the log step is exact, so the time grid only changes which normals are drawn
    auto m = experiments::one_asset_market();
    auto a = simulate_paths(m, cfg(100000, 1, 3));
    auto b = simulate_paths(m, cfg(100000, 50, 3));
    double la = a.gross_returns.array().log().mean(), lb = b.gross_returns.array().log().mean();
    EXPECT_NEAR(la, lb, 4.0 * 0.22 * std::sqrt(2.0 / 100000));
    EXPECT_NEAR(la, 0.1068 - 0.5 * 0.22 * 0.22, 4.0 * 0.22 / std::sqrt(100000.0));
}

TEST(Rollout, ZeroPolicyGrowsAtRiskFreeRate) {
    auto m = experiments::one_asset_market();
    auto e = rollout_dynamic(zero_policy(1.0, m), m, 1.0, cfg(500, 50));
    for (int p = 0; p < e.paths(); ++p) EXPECT_NEAR(e.terminal_wealth[p], std::exp(0.00408), 1e-12);
}

TEST(Rollout, MvClosedFormHitsTarget) {
    auto m = experiments::one_asset_market();
    auto mv = solve_mv(1.0, 1.2, m);
    RolloutOptions o;
    o.mode = RolloutMode::closed_form;
    auto e = rollout_dynamic(mv_dynamic_policy(mv, m), m, 1.0, cfg(200000, 1), o);
    Vec x = e.terminal_wealth;
    double se = std::sqrt((x.array() - x.mean()).square().mean() / x.size());
    EXPECT_NEAR(x.mean(), 1.2, 4.0 * se);
    Vec zx = x.cwiseProduct(e.terminal_z);
    double se2 = std::sqrt((zx.array() - zx.mean()).square().mean() / zx.size());
    EXPECT_NEAR(zx.mean(), 1.0, 4.0 * se2);
    EXPECT_EQ((e.terminal_wealth - e.terminal_closed_form).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Rollout, SelfFinancingConverges) {
    auto m = experiments::one_asset_market();
    auto mv = solve_mv(1.0, 1.2, m);
    auto pol = mv_dynamic_policy(mv, m);
    double coarse = rms_gap(rollout_dynamic(pol, m, 1.0, cfg(4000, 100)));
    double fine = rms_gap(rollout_dynamic(pol, m, 1.0, cfg(4000, 400)));
    EXPECT_LT(fine, coarse);
    EXPECT_GE(coarse / fine, 1.3);
    EXPECT_LT(fine, 0.02);
}

TEST(Rollout, SrmvSelfFinancingTracksClosedForm) {
    SrmvProblem p{1.0, 1.2, 0.5, Spectrum::exponential(10.0), experiments::one_asset_market()};
    SrmvStrategy st(solve_multipliers(p), p);
    auto e = rollout_dynamic(srmv_dynamic_policy(st), p.market, 1.0, cfg(2000, 500));
    EXPECT_LT(rms_gap(e), 0.05);
    EXPECT_NEAR(e.terminal_wealth.mean(), e.terminal_closed_form.mean(), 0.01);
}

TEST(Rollout, Deterministic) {
    auto m = experiments::three_asset_market();
    auto mv = solve_mv(1.0, 1.2, m);
    auto pol = mv_dynamic_policy(mv, m);
    SimConfig c = cfg(3000, 40, 99);
    auto a = rollout_dynamic(pol, m, 1.0, c);
    auto b = rollout_dynamic(pol, m, 1.0, c);
    c.threads = 4;
    auto d = rollout_dynamic(pol, m, 1.0, c);
    EXPECT_EQ(a.terminal_wealth, b.terminal_wealth);
    EXPECT_EQ(a.terminal_wealth, d.terminal_wealth);
    auto sa = simulate_paths(m, c);
    c.threads = 1;
    auto sb = simulate_paths(m, c);
    EXPECT_EQ(sa.gross_returns, sb.gross_returns);
}

TEST(Rollout, Trajectories) {
    auto m = experiments::one_asset_market();
    auto mv = solve_mv(1.0, 1.2, m);
    SimConfig c = cfg(200, 20);
    c.record_paths = 3;
    c.record_stride = 5;
    auto e = rollout_dynamic(mv_dynamic_policy(mv, m), m, 1.0, c);
    ASSERT_EQ(e.trajectories.size(), 3u);
    EXPECT_EQ(e.trajectories[0].t.size(), 5u);
    EXPECT_EQ(e.trajectories[0].t.front(), 0.0);
    EXPECT_EQ(e.trajectories[0].wealth.front(), 1.0);
    EXPECT_EQ(e.trajectories[0].t.back(), 1.0);
    std::ostringstream os;
    write_trajectories_csv(os, e);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "path,t,z,x,u1");
}

TEST(Rollout, StaticBuyAndHold) {
    auto m = experiments::three_asset_market();
    auto sp = simulate_paths(m, cfg(1000, 1));
    StaticSolution s;
    s.u = Vec(3);
    s.u << 0.2, 0.3, 0.4;
    s.u_f = 0.1;
    auto e = rollout_static(s, sp);
    Vec mean_r = sp.gross_returns.colwise().mean().transpose();
    EXPECT_NEAR(e.terminal_wealth.mean(), mean_r.dot(s.u) + sp.risk_free_growth * s.u_f, 1e-12);
    s.u = Vec::Ones(2);
    EXPECT_THROW(rollout_static(s, sp), DomainError);
}

TEST(Rollout, ModelScenarios) {
    auto m = experiments::three_asset_market();
    auto s = model_scenarios(m, 50, 7);
    EXPECT_EQ(s.N(), 50);
    EXPECT_EQ(s.n(), 3);
    EXPECT_NO_THROW(s.validate());
}

TEST(Metrics, KnownSample) {
    auto m = experiments::one_asset_market();
    Vec x(100);
    for (int i = 0; i < 100; ++i) x[i] = 0.5 + 0.01 * i;  // 0.50 .. 1.49
    auto r = compute_metrics(x, 1.0, m);
    EXPECT_NEAR(r.mean, 0.995, 1e-12);
    EXPECT_NEAR(r.variance, 0.01 * 0.01 * 100 * 101 / 12.0, 1e-12);
    EXPECT_NEAR(r.var10, -(0.59 - 1.0), 1e-12);
    EXPECT_NEAR(r.var5, -(0.54 - 1.0), 1e-12);
    EXPECT_LE(r.semivariance, r.variance);
    // tails: worst ten average -0.455, best ten +0.445
    EXPECT_NEAR(r.rachev10, 0.445 / 0.455, 1e-12);
    double wb = std::exp(0.00408);
    EXPECT_NEAR(r.sharpe, (0.995 - wb) / std::sqrt(r.variance), 1e-12);
    EXPECT_NEAR(r.sortino, (0.995 - wb) / std::sqrt(r.semivariance), 1e-12);
    auto b = compute_metrics(x, 1.0, m, SortinoConvention::benchmark_downside);
    double down = (x.array() - wb).min(0.0).square().mean();
    EXPECT_NEAR(b.sortino, (0.995 - wb) / std::sqrt(down), 1e-12);
}

TEST(Metrics, SymmetricRachev) {
    auto m = experiments::one_asset_market();
    Vec x(200);
    for (int i = 0; i < 100; ++i) {
        x[i] = 1.0 + 0.003 * (i + 1);
        x[100 + i] = 1.0 - 0.003 * (i + 1);
    }
    auto r = compute_metrics(x, 1.0, m);
    EXPECT_NEAR(r.rachev10, 1.0, 1e-12);
    EXPECT_NEAR(r.rachev5, 1.0, 1e-12);
}

TEST(Metrics, SemivarianceBelowVariance) {
    auto m = experiments::one_asset_market();
    auto sp = simulate_paths(m, cfg(5000, 1));
    for (double a : {0.5, 1.0, 3.0}) {
        Vec x = (sp.gross_returns.col(0).array() * a).matrix() + Vec::Constant(5000, 0.1);
        auto r = compute_metrics(x, 1.0, m);
        EXPECT_LE(r.semivariance, r.variance);
        EXPECT_GT(r.semivariance, 0.0);
    }
}

TEST(Metrics, Degenerate) {
    auto m = experiments::one_asset_market();
    double wb = std::exp(0.00408);
    auto flat = compute_metrics(Vec::Constant(200, wb + 0.1), 1.0, m);
    EXPECT_EQ(flat.variance, 0.0);
    EXPECT_EQ(flat.sharpe, kInf);
    EXPECT_EQ(flat.sortino, kInf);
    auto at_bench = compute_metrics(Vec::Constant(200, wb), 1.0, m);
    EXPECT_TRUE(std::isnan(at_bench.sharpe));
    auto one = compute_metrics(Vec::Constant(1, 1.3), 1.0, m);
    EXPECT_EQ(one.mean, 1.3);
    EXPECT_TRUE(std::isnan(one.variance));
    auto few = compute_metrics(Vec::LinSpaced(50, 0.8, 1.3), 1.0, m);
    EXPECT_TRUE(std::isnan(few.var10));
    EXPECT_FALSE(std::isnan(few.sharpe));
    Vec bad = Vec::Ones(10);
    bad[3] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(compute_metrics(bad, 1.0, m), NumericError);
    EXPECT_THROW(compute_metrics(Vec(), 1.0, m), DomainError);
}

TEST(Histogram, UniformSample) {
    Vec x = Vec::LinSpaced(100000, 2.0, 4.0);
    auto h = empirical_pdf(x, 20);
    ASSERT_EQ(h.density.size(), 20u);
    double mass = 0.0;
    for (std::size_t b = 0; b < 20; ++b) {
        EXPECT_NEAR(h.density[b], 0.5, 1e-3);
        mass += h.density[b] * (h.right[b] - h.left[b]);
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);
    auto point = empirical_pdf(Vec::Constant(5, 1.0), 10);
    EXPECT_EQ(point.density.size(), 1u);
    EXPECT_THROW(empirical_pdf(x, 1), DomainError);
}

TEST(Csv, MetricsHeaderAndFlags) {
    MetricsReport r;
    r.mean = 1.1;
    r.sharpe = kInf;
    r.var10 = std::numeric_limits<double>::quiet_NaN();
    std::ostringstream os;
    write_metrics_csv(os, {{"mv", r}});
    EXPECT_EQ(os.str(), "policy,mean,variance,semivariance,sharpe,sortino,var10,var5,rachev10,rachev5\n"
                        "mv,1.1,0,0,inf,0,nan,0,0,0\n");
}

TEST(SimConfigChecks, Validation) {
    auto m = experiments::one_asset_market();
    EXPECT_THROW(simulate_paths(m, cfg(0, 10)), DomainError);
    EXPECT_THROW(simulate_paths(m, cfg(10, 0)), DomainError);
    SimConfig c = cfg(10, 10);
    c.threads = 0;
    EXPECT_THROW(simulate_paths(m, c), DomainError);
}
