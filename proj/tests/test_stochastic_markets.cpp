#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hybridmv/experiments.hpp"
#include "hybridmv/stochastic_markets.hpp"

using namespace hybridmv;

namespace {

constexpr double kTheta = (0.1068 - 0.00408) / 0.22;

OuMarket flat_ou() { return {0.00408, 0.22, 0.0, kTheta, 0.0, kTheta, 1.0}; }

OuMarket live_ou() { return {0.00408, 0.22, 1.0, 0.4669, 0.1, 0.4669, 1.0}; }

HestonMarket flat_heston() { return {0.1068, 0.00408, 2.0, 0.0484, 1e-6, 0.0484, 1.0}; }

SrmvStrategy srmv_strategy() {
    SrmvProblem p{1.0, 1.2, 0.5, Spectrum::exponential(10.0), experiments::one_asset_market()};
    return SrmvStrategy(solve_multipliers(p), p);
}

PdeGrid thin(int nz = 200, int steps = 400) {
    PdeGrid g;
    g.nz = nz;
    g.ns = 7;
    g.steps = steps;
    return g;
}

}  // namespace

TEST(PdeConstant, HestonDiscount) {
    HestonMarket m{0.08, 0.03, 1.5, 0.04, 0.3, 0.05, 1.0};
    PdeGrid g;
    g.nz = 100;
    g.ns = 60;
    g.steps = 200;
    auto sol = solve_pde_heston(m, constant_terminal(1.0), g);
    EXPECT_NEAR(sol.value(0.0, 1.0, 0.05), std::exp(-0.03), 1e-6);
    EXPECT_NEAR(sol.value(0.5, 0.8, 0.03), std::exp(-0.015), 1e-6);
    EXPECT_NEAR(policy_heston(sol, m, 0.5, 0.8, 0.03), 0.0, 1e-6);
}

TEST(PdeConstant, OuDiscount) {
    auto m = live_ou();
    PdeGrid g;
    g.nz = 80;
    g.ns = 40;
    g.steps = 100;
    auto sol = solve_pde_ou(m, constant_terminal(2.0), g);
    EXPECT_NEAR(sol.value(0.0, 1.0, 0.4669), 2.0 * std::exp(-0.00408), 1e-6);
}

TEST(PdeLinear, MatchesLognormalClosedForm) {
    // x(T) = a + b z(T) gives X = a E[g] + b z E[g^2] with g = z(T)/z(t)
    auto m = flat_ou();
    double a = 1.5, b = -0.4;
    TerminalWealth term{[=](double z) { return a + b * z; }, {}};
    auto sol = solve_pde_ou(m, term, thin());
    auto ref = bs_reference(m);
    for (double t : {0.0, 0.5}) {
        auto mo = lognormal_moments(ref, t);
        for (double z : {0.7, 1.0, 1.4}) {
            double x = truncated_expectation(mo, z, a, b, 0.0, kInf);
            EXPECT_NEAR(sol.value(t, z, kTheta), x, 1e-4);
            double tau = 1.0 - t;
            double closed = a * std::exp(-m.r * tau) + b * z * std::exp((kTheta * kTheta - 2 * m.r) * tau);
            EXPECT_NEAR(x, closed, 1e-12);
            double u = -kTheta * b * z * std::exp((kTheta * kTheta - 2 * m.r) * tau) / m.sigma;
            EXPECT_NEAR(policy_ou(sol, m, t, z, kTheta), u, 1e-3);
        }
    }
}

TEST(PdeReduction, OuMatchesDeterministicSrmv) {
    auto st = srmv_strategy();
    auto m = flat_ou();
    auto sol = solve_pde_ou(m, terminal_wealth_of(st), thin());
    for (double t : {0.0, 0.25, 0.5})
        for (double z : {0.7, 1.0, 1.4}) {
            EXPECT_NEAR(sol.value(t, z, kTheta), st.wealth(t, z), 1e-3);
            EXPECT_NEAR(policy_ou(sol, m, t, z, kTheta), st.policy(t, z)(0), 5e-3);
        }
}

TEST(PdeReduction, HestonMatchesDeterministicSrmv) {
    auto st = srmv_strategy();
    auto m = flat_heston();
    auto sol = solve_pde_heston(m, terminal_wealth_of(st), thin());
    for (double t : {0.0, 0.5})
        for (double z : {0.7, 1.0, 1.4}) EXPECT_NEAR(sol.value(t, z, 0.0484), st.wealth(t, z), 1e-3);
}

TEST(PdeReduction, VrmvTerminal) {
    VrmvProblem p{1.0, 1.2, 0.8, 0.1, experiments::one_asset_market()};
    VrmvStrategy st(solve(p), p);
    auto sol = solve_pde_ou(flat_ou(), terminal_wealth_of(st), thin());
    for (double z : {0.7, 1.0, 1.4}) EXPECT_NEAR(sol.value(0.0, z, kTheta), st.wealth(0.0, z), 1e-3);
}

TEST(PdeReduction, RefinementShrinksError) {
    auto st = srmv_strategy();
    auto err = [&](int nz, int steps) {
        auto sol = solve_pde_ou(flat_ou(), terminal_wealth_of(st), thin(nz, steps));
        double e = 0.0;
        for (double z : {0.7, 1.0, 1.4}) e = std::max(e, std::abs(sol.value(0.0, z, kTheta) - st.wealth(0.0, z)));
        return e;
    };
    double coarse = err(50, 100), fine = err(200, 400);
    EXPECT_LT(fine, coarse);
    EXPECT_LT(fine, 1e-3);
}

TEST(PdeStochastic, OuAgreesWithMonteCarlo) {
    auto m = live_ou();
    auto term = terminal_wealth_of(srmv_strategy());
    auto sol = solve_pde_ou(m, term, PdeGrid{});
    struct Probe {
        double t, z, th;
    };
    for (Probe q : {Probe{0.0, 1.0, 0.4669}, Probe{0.5, 0.8, 0.3}, Probe{0.5, 1.3, 0.6}}) {
        auto mc = mc_conditional_wealth(m, term, q.t, q.z, q.th, 200000, 200, 7);
        EXPECT_NEAR(sol.value(q.t, q.z, q.th), mc.value, 4.0 * mc.se + 2e-3);
    }
}

TEST(PdeStochastic, HestonAgreesWithMonteCarlo) {
    HestonMarket m{0.1068, 0.00408, 2.0, 0.0484, 0.2, 0.0484, 1.0};
    auto term = terminal_wealth_of(srmv_strategy());
    PdeGrid g;
    g.nz = 150;
    g.ns = 80;
    g.steps = 300;
    auto sol = solve_pde_heston(m, term, g);
    auto mc = mc_conditional_wealth(m, term, 0.0, 1.0, 0.0484, 200000, 200, 9);
    EXPECT_NEAR(sol.value(0.0, 1.0, 0.0484), mc.value, 4.0 * mc.se + 3e-3);
}

TEST(PdeErrors, CoarseGridRejected) {
    PdeGrid g;
    g.nz = 10;
    EXPECT_THROW(solve_pde_ou(flat_ou(), constant_terminal(1.0), g), ResolutionError);
    PdeGrid few;
    few.steps = 2;
    EXPECT_THROW(solve_pde_heston(flat_heston(), constant_terminal(1.0), few), ResolutionError);
}

TEST(PdeErrors, CrossTermTimeStep) {
    OuMarket m = live_ou();
    m.gamma_ou = 5.0;
    PdeGrid g;
    g.nz = 400;
    g.ns = 400;
    g.steps = 4;
    EXPECT_THROW(solve_pde_ou(m, constant_terminal(1.0), g), ResolutionError);
}

TEST(PdeErrors, QueriesAndDomains) {
    auto sol = solve_pde_ou(flat_ou(), constant_terminal(1.0), thin(40, 20));
    EXPECT_THROW(sol.value(0.0, 1e-9, kTheta), DomainError);
    EXPECT_THROW(sol.value(1.5, 1.0, kTheta), DomainError);
    EXPECT_THROW(policy_ou(sol, flat_ou(), 1.0, 1.0, kTheta), DomainError);
    OuMarket bad = flat_ou();
    bad.sigma = 0.0;
    EXPECT_THROW(solve_pde_ou(bad, constant_terminal(1.0)), DomainError);
    HestonMarket hb = flat_heston();
    hb.xi = 0.0;
    EXPECT_THROW(solve_pde_heston(hb, constant_terminal(1.0)), DomainError);
    EXPECT_THROW(mc_conditional_wealth(flat_ou(), constant_terminal(1.0), 0.0, 1.0, kTheta, 10, 10, 1), DomainError);
}

TEST(PdeOutput, CsvHeaderAndRows) {
    auto sol = solve_pde_ou(flat_ou(), constant_terminal(1.0), thin(20, 8));
    std::ostringstream os;
    sol.write_csv(os);
    std::string s = os.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "t,z,theta,X");
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 20 * 7);
    EXPECT_EQ(sol.times.front(), 0.0);
    EXPECT_EQ(sol.times.back(), 1.0);
}

TEST(Feller, Ratio) {
    HestonMarket m{0.08, 0.03, 1.5, 0.04, 0.3, 0.05, 1.0};
    EXPECT_NEAR(m.feller_ratio(), 2 * 1.5 * 0.04 / 0.09, 1e-15);
}
