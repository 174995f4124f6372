#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "hybridmv/experiments.hpp"
#include "hybridmv/quadrature.hpp"
#include "hybridmv/srmv_dynamic.hpp"

using namespace hybridmv;

namespace {

SrmvProblem problem(double omega, Spectrum s = Spectrum::exponential(10.0), double x_d = 1.2) {
    return {1.0, x_d, omega, s, experiments::one_asset_market()};
}

// E[x(T)] and E[x(T)^2] by quadrature in the standard normal variable of ln z(T).
std::pair<double, double> moments(const SrmvStrategy& st) {
    auto d = spd_distribution(st.problem().market);
    std::vector<double> br;
    if (std::isfinite(st.solution().z_dag)) br.push_back(d.w(st.solution().z_dag));
    auto x = [&](double w) { return st.terminal(std::exp(d.m0 + d.v0 * w)); };
    double m1 = quad::gauss_legendre_split([&](double w) { return x(w) * normal::pdf(w); }, -12.0, 12.0, br, 0.05);
    double m2 = quad::gauss_legendre_split([&](double w) { return x(w) * x(w) * normal::pdf(w); }, -12.0, 12.0, br, 0.05);
    return {m1, m2};
}

}  // namespace

TEST(SrmvMultipliers, MvBaselineFrozen) {
    auto mv = solve_mv(1.0, 1.2, experiments::one_asset_market());
    EXPECT_NEAR(mv.rho, 4.151038753, 1e-8);
    EXPECT_NEAR(mv.eta, 1.774711581, 1e-8);
}

TEST(SrmvMultipliers, OmegaZeroIsMv) {
    auto p = problem(0.0);
    auto s = solve_multipliers(p);
    auto mv = solve_mv(1.0, 1.2, p.market);
    EXPECT_NEAR(s.rho, mv.rho, 1e-9);
    EXPECT_NEAR(s.eta, mv.eta, 1e-9);
}

TEST(SrmvMultipliers, ExponentialFrozen) {
    auto s = solve_multipliers(problem(0.5));
    EXPECT_NEAR(s.rho, 5.458914170, 1e-8);
    EXPECT_NEAR(s.eta, 3.584591184, 1e-8);
    EXPECT_NEAR(s.s_dag, 0.00680956845, 1e-10);
    EXPECT_NEAR(s.z_dag, 2.825979626, 1e-8);
    EXPECT_GT(s.eta, 0.0);
    EXPECT_LT(s.residual_budget, 1e-9);
    EXPECT_LT(s.residual_target, 1e-9);
    EXPECT_LT(s.residual_boundary, 1e-9);
}

TEST(SrmvMultipliers, MonteCarloResubstitution) {
    auto p = problem(0.5);
    SrmvStrategy st(solve_multipliers(p), p);
    auto mo = lognormal_moments(p.market, 0.0);
    std::mt19937_64 gen(77);
    std::normal_distribution<double> N01;
    const int n = 10'000'000;
    double s1 = 0, q1 = 0, s2 = 0, q2 = 0;
    for (int i = 0; i < n; ++i) {
        double z = std::exp(mo.m + mo.v * N01(gen));
        double x = st.terminal(z);
        s1 += x, q1 += x * x;
        s2 += z * x, q2 += z * x * z * x;
    }
    double m1 = s1 / n, m2 = s2 / n;
    EXPECT_NEAR(m1, p.x_d, 3.0 * std::sqrt((q1 / n - m1 * m1) / n));
    EXPECT_NEAR(m2, p.x0, 3.0 * std::sqrt((q2 / n - m2 * m2) / n));
}

TEST(SrmvMultipliers, PowerFeasibility) {
    auto p = problem(1.5, Spectrum::power(0.6));
    auto s = solve_multipliers(p);
    EXPECT_LT(s.residual_budget, 1e-9);
    EXPECT_LT(s.residual_target, 1e-9);
    auto G = optimal_quantile(s, p);
    for (int i = 0; i < 10000; ++i) EXPECT_GE(G((i + 0.5) / 10000), 0.0);
}

TEST(SrmvMultipliers, DegenerateTargetRejected) {
    auto p = problem(0.5, Spectrum::exponential(10.0), std::exp(0.00408));
    EXPECT_THROW(solve_multipliers(p), InfeasibleError);
}

TEST(OptimalQuantile, BoundaryAndMonotone) {
    for (double w : {0.0, 0.1, 0.25}) {
        auto p = problem(w);
        auto s = solve_multipliers(p);
        auto G = optimal_quantile(s, p);
        EXPECT_NEAR(G(s.s_dag), 0.0, 1e-9);
        double prev = -1.0;
        for (int i = 0; i <= 1000; ++i) {
            double u = s.s_dag + (1.0 - s.s_dag) * i / 1000.0;
            EXPECT_GE(G(u), prev - 1e-12);
            prev = G(u);
        }
    }
}

// A steep spectrum bends the closed form downward on part of [s_dag, 1]; the literal form is kept.
TEST(OptimalQuantile, SteepSpectrumDip) {
    auto p = problem(0.5);
    auto s = solve_multipliers(p);
    auto G = optimal_quantile(s, p);
    EXPECT_NEAR(G(s.s_dag), 0.0, 1e-9);
    EXPECT_GT(G(0.05), G(0.15));
    EXPECT_LT(G(0.15), G(0.3));
}

TEST(OptimalQuantile, PowerLimitAtOne) {
    auto p = problem(1.5, Spectrum::power(0.6));
    auto s = solve_multipliers(p);
    EXPECT_NEAR(optimal_quantile(s, p)(1.0), 0.5 * (s.rho + 1.5 * 0.6), 1e-12);
}

TEST(TerminalWealth, TruncationAndReduction) {
    auto p = problem(0.5);
    auto s = solve_multipliers(p);
    EXPECT_NEAR(srmv_terminal_wealth(s, p, s.z_dag), 0.0, 1e-9);
    EXPECT_EQ(srmv_terminal_wealth(s, p, s.z_dag * 1.01), 0.0);
    auto p0 = problem(0.0);
    auto s0 = solve_multipliers(p0);
    double zT = 0.5 * s0.rho / s0.eta;
    EXPECT_NEAR(srmv_terminal_wealth(s0, p0, zT), 0.5 * (s0.rho - s0.eta * zT), 1e-15);
}

TEST(TerminalWealth, QuantileComposition) {
    auto p = problem(0.5);
    auto s = solve_multipliers(p);
    auto d = spd_distribution(p.market);
    auto G = optimal_quantile(s, p);
    for (double z : {0.2, 0.6, 1.0, 2.0, 2.8}) EXPECT_NEAR(srmv_terminal_wealth(s, p, z), G(d.upper(z)), 1e-9);
}

TEST(TerminalWealth, Nonnegative) {
    auto p = problem(0.5);
    SrmvStrategy st(solve_multipliers(p), p);
    for (int i = 0; i < 100000; ++i) EXPECT_GE(st.terminal(std::exp(-8.0 + 16.0 * i / 99999.0)), 0.0);
}

TEST(WealthProcess, BudgetIdentity) {
    for (auto p : {problem(0.0), problem(0.5), problem(1.5, Spectrum::power(0.6)), problem(2.0, Spectrum::exponential(3.0), 1.3)}) {
        auto s = solve_multipliers(p);
        EXPECT_NEAR(srmv_wealth_process(s, p, 0.0, 1.0), p.x0, 1e-8);
    }
}

TEST(WealthProcess, HorizonContinuity) {
    auto p = problem(0.5);
    SrmvStrategy st(solve_multipliers(p), p);
    for (double z : {0.3, 1.0, 2.0}) {
        EXPECT_NEAR(st.wealth(1.0, z), st.terminal(z), 1e-9);
        EXPECT_NEAR(st.wealth(1.0 - 1e-9, z), st.terminal(z), 1e-3);
    }
}

TEST(WealthProcess, MvTwoTermClosedForm) {
    auto p = problem(0.0);
    auto s = solve_multipliers(p);
    auto mo = lognormal_moments(p.market, 0.5);
    for (double z : {0.5, 1.0, 1.7}) {
        double k = (std::log(s.rho / s.eta / z) - mo.m) / mo.v - mo.v;
        double ref = 0.5 * (s.rho * mo.A * normal::cdf(k) - s.eta * z * mo.B * normal::cdf(k - mo.v));
        EXPECT_NEAR(srmv_wealth_process(s, p, 0.5, z), ref, 1e-12);
    }
}

TEST(WealthProcess, Martingale) {
    auto p = problem(0.5);
    SrmvStrategy st(solve_multipliers(p), p);
    for (double t : {0.25, 0.5, 0.75}) {
        auto mo = lognormal_moments(p.market, t);
        for (double z : {0.6, 1.0, 1.6}) {
            double kd = (std::log(st.solution().z_dag / z) - mo.m) / mo.v;
            double ref = quad::gauss_legendre_split(
                [&](double u) {
                    double g = std::exp(mo.m + mo.v * u);
                    return g * st.terminal(z * g) * normal::pdf(u);
                },
                -12.0, 12.0, {kd}, 0.02);
            EXPECT_NEAR(st.wealth(t, z) / ref, 1.0, 1e-6);
        }
    }
}

TEST(Policy, OmegaZeroMatchesMv) {
    auto p = problem(0.0);
    auto s = solve_multipliers(p);
    auto mv = solve_mv(1.0, 1.2, p.market);
    for (double t : {0.0, 0.3, 0.8})
        for (double z : {0.3, 0.9, 1.5, 3.0})
            EXPECT_NEAR(srmv_policy(s, p, t, z)(0), mv_policy(mv, p.market, t, z)(0), 1e-9);
}

TEST(Policy, FiniteDifference) {
    for (auto p : {problem(0.5), problem(1.5, Spectrum::power(0.6))}) {
        SrmvStrategy st(solve_multipliers(p), p);
        Vec dir = allocation_direction(p.market, 0.4);
        for (double z : {0.4, 0.9, 1.5}) {
            double h = 1e-5 * z;
            double dx = (st.wealth(0.4, z + h) - st.wealth(0.4, z - h)) / (2 * h);
            double ref = -dir(0) * z * dx;
            EXPECT_NEAR(st.policy(0.4, z)(0) / ref, 1.0, 1e-5);
        }
    }
}

TEST(Policy, DecompositionExact) {
    auto p = problem(0.5);
    SrmvStrategy st(solve_multipliers(p), p);
    for (double z : {0.5, 1.2}) {
        Vec u = st.policy(0.5, z);
        Vec parts = st.policy_u1(0.5, z) + 0.5 * st.policy_u2(0.5, z);
        EXPECT_NEAR(u(0), parts(0), 1e-15);
    }
}

TEST(Policy, UndefinedAtHorizon) {
    auto p = problem(0.5);
    SrmvStrategy st(solve_multipliers(p), p);
    EXPECT_THROW(st.policy(1.0, 1.0), DomainError);
}

TEST(Policy, CrossesMvAtHalfHorizon) {
    auto p = problem(0.5);
    SrmvStrategy st(solve_multipliers(p), p);
    auto mv = solve_mv(1.0, 1.2, p.market);
    auto mvu = [&](double z) { return mv_policy(mv, p.market, 0.5, z)(0); };
    EXPECT_GT(st.policy(0.5, 0.5)(0), mvu(0.5));
    EXPECT_LT(st.policy(0.5, 1.2)(0), mvu(1.2));
    EXPECT_GT(st.policy(0.5, 2.5)(0), mvu(2.5));
}

TEST(MvPolicy, SinglePeak) {
    auto m = experiments::one_asset_market();
    auto mv = solve_mv(1.0, 1.2, m);
    for (double t : {0.25, 0.5}) {
        double best = -1, zbest = 0;
        int changes = 0;
        double prev = mv_policy(mv, m, t, 0.05)(0);
        bool rising = true;
        for (int i = 1; i < 600; ++i) {
            double z = 0.05 + 0.005 * i;
            double u = mv_policy(mv, m, t, z)(0);
            if (u > best) best = u, zbest = z;
            if (rising && u < prev) rising = false, ++changes;
            else if (!rising && u > prev) rising = true, ++changes;
            prev = u;
        }
        EXPECT_EQ(changes, 1);
        EXPECT_GE(zbest, 1.2);
        EXPECT_LE(zbest, 1.7);
    }
}

TEST(MvPolicy, VanishesAtRiskFreeTarget) {
    auto m = experiments::one_asset_market();
    double rf = std::exp(0.00408);
    EXPECT_THROW(solve_mv(1.0, rf, m), InfeasibleError);
    double prev = kInf;
    for (double e : {1e-1, 1e-2, 1e-3}) {
        auto mv = solve_mv(1.0, rf * (1.0 + e), m);
        double u = mv_policy(mv, m, 0.0, 1.0)(0);
        EXPECT_GT(u, 0.0);
        EXPECT_LT(u, 0.2 * prev);
        prev = u;
    }
    EXPECT_LT(prev, 0.02);
}

TEST(RiskResponse, SortedSampleOracle) {
    auto p = problem(0.5);
    auto s = solve_multipliers(p);
    SrmvStrategy st(s, p);
    auto mo = lognormal_moments(p.market, 0.0);
    const int n = 1'000'000;
    std::vector<double> x(n);
    std::mt19937_64 gen(3);
    std::normal_distribution<double> N01;
    for (auto& v : x) v = st.terminal(std::exp(mo.m + mo.v * N01(gen)));
    // pair worst-to-best states with the spectrum the same way the closed form does
    std::vector<double> zs(n);
    std::mt19937_64 gen2(3);
    for (auto& z : zs) z = std::exp(mo.m + mo.v * N01(gen2));
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return zs[a] > zs[b]; });
    auto w = discretize(p.spectrum, n);
    double r = 0.0;
    for (int i = 0; i < n; ++i) r -= w[i] * x[idx[i]];
    EXPECT_NEAR(srmv_risk(s, p), r, 5e-3);
}

TEST(RiskResponse, MonotoneInOmega) {
    double prev_risk = kInf, prev_var = -1.0;
    for (double w : {0.0, 0.25, 0.5, 1.0}) {
        auto p = problem(w);
        auto s = solve_multipliers(p);
        double risk = srmv_risk(s, p);
        auto [m1, m2] = moments(SrmvStrategy(s, p));
        EXPECT_NEAR(m1, 1.2, 1e-8);
        double var = m2 - m1 * m1;
        EXPECT_LE(risk, prev_risk + 1e-9);
        EXPECT_GE(var, prev_var - 1e-9);
        prev_risk = risk;
        prev_var = var;
    }
}
