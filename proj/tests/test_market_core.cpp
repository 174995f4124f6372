#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hybridmv/experiments.hpp"
#include "hybridmv/market_core.hpp"
#include "hybridmv/quadrature.hpp"

using namespace hybridmv;

namespace {

MarketModel one_asset() { return experiments::one_asset_market(); }

Mat three_sigma() { return experiments::three_asset_market().sigma(0.0); }

}  // namespace

TEST(RiskPremium, OneAsset) {
    auto m = one_asset();
    EXPECT_NEAR(risk_premium(m, 0.3)(0), (0.1068 - 0.00408) / 0.22, 1e-14);
    EXPECT_NEAR(risk_premium(m, 0.0)(0), 0.46691, 5e-6);
}

TEST(RiskPremium, ZeroExcessReturn) {
    Vec mu(1);
    mu << 0.03;
    Mat s(1, 1);
    s << 0.2;
    auto m = MarketModel::constant(0.03, mu, s, 1.0);
    EXPECT_EQ(risk_premium(m, 0.5)(0), 0.0);
}

TEST(RiskPremium, ThreeAssetResidual) {
    auto m = experiments::three_asset_market();
    Vec th = risk_premium(m, 0.0);
    Vec b = m.excess(0.0);
    EXPECT_LT((m.sigma(0.0) * th - b).norm(), 1e-12);
}

TEST(MarketModel, SingularVolatilityRejected) {
    Vec mu(2);
    mu << 0.1, 0.1;
    Mat s(2, 2);
    s << 0.2, 0.2, 0.2, 0.2;
    EXPECT_THROW(MarketModel::constant(0.0, mu, s, 1.0), DomainError);
}

TEST(LognormalMoments, AtHorizon) {
    auto mo = lognormal_moments(one_asset(), 1.0);
    EXPECT_EQ(mo.m, 0.0);
    EXPECT_EQ(mo.v, 0.0);
    EXPECT_EQ(mo.A, 1.0);
    EXPECT_EQ(mo.B, 1.0);
}

TEST(LognormalMoments, OneAssetAtZero) {
    auto mo = lognormal_moments(one_asset(), 0.0);
    double th = (0.1068 - 0.00408) / 0.22;
    EXPECT_NEAR(mo.v, th, 1e-14);
    EXPECT_NEAR(mo.m, -(0.00408 + 0.5 * th * th), 1e-14);
    EXPECT_NEAR(mo.m, -0.11309, 1e-5);
    EXPECT_LE(mo.A * mo.A, mo.B);
}

TEST(LognormalMoments, PureDiscount) {
    Vec mu(1);
    mu << 0.05;
    Mat s(1, 1);
    s << 0.3;
    auto m = MarketModel::constant(0.05, mu, s, 2.0);
    auto mo = lognormal_moments(m, 0.0);
    EXPECT_NEAR(mo.A, std::exp(-0.1), 1e-15);
}

TEST(LognormalMoments, BeyondHorizonThrows) {
    EXPECT_THROW(lognormal_moments(one_asset(), 1.5), DomainError);
}

TEST(LognormalMoments, TelescopingOnPiecewiseMarket) {
    Vec mu1(1), mu2(1);
    mu1 << 0.10;
    mu2 << 0.04;
    Mat s1(1, 1), s2(1, 1);
    s1 << 0.2;
    s2 << 0.35;
    MarketModel m({0.0, 0.4, 1.0}, {0.01, 0.03}, {mu1, mu2}, {s1, s2});
    double th1 = (0.10 - 0.01) / 0.2, th2 = (0.04 - 0.03) / 0.35;
    for (double t1 : {0.0, 0.1, 0.35, 0.5}) {
        for (double t2 : {0.45, 0.8, 1.0}) {
            if (t2 <= t1) continue;
            double v1 = lognormal_moments(m, t1).v, v2 = lognormal_moments(m, t2).v;
            double a = std::max(0.0, std::min(t2, 0.4) - t1);
            double b = t2 - std::max(t1, 0.4);
            double integral = th1 * th1 * a + th2 * th2 * b;
            EXPECT_NEAR(v1 * v1, v2 * v2 + integral, 1e-12);
        }
    }
    // v strictly decreasing toward zero
    double prev = 1e9;
    for (int i = 0; i <= 20; ++i) {
        double v = lognormal_moments(m, i / 20.0).v;
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(SpdDistribution, MedianAndFullPartialMoment) {
    auto d = spd_distribution(one_asset());
    EXPECT_NEAR(spd_cdf(d, std::exp(d.m0)), 0.5, 1e-15);
    EXPECT_NEAR(spd_partial_moment(d, 1e16), d.A0(), 1e-12);
    EXPECT_EQ(spd_cdf(d, 0.0), 0.0);
    EXPECT_EQ(spd_partial_moment(d, -1.0), 0.0);
    EXPECT_THROW(spd_quantile(d, 1.0), DomainError);
    EXPECT_THROW(spd_quantile(d, 0.0), DomainError);
}

TEST(SpdDistribution, PartialMomentAgainstQuadrature) {
    auto d = spd_distribution(one_asset());
    // integral over w of e^{m0 + v0 w} phi(w) up to the image of y = 1
    double wmax = (std::log(1.0) - d.m0) / d.v0;
    double ref = quad::adaptive_simpson(
        [&](double w) { return std::exp(d.m0 + d.v0 * w) * normal::pdf(w); }, -40.0, wmax, {1e-13, 50});
    EXPECT_NEAR(spd_partial_moment(d, 1.0), ref, 1e-10);
}

TEST(SpdDistribution, QuantileInvertsCdf) {
    auto d = spd_distribution(one_asset());
    for (int i = 0; i < 100; ++i) {
        double y = std::exp(d.m0 + d.v0 * (-5.0 + 10.0 * i / 99.0));
        EXPECT_NEAR(spd_quantile(d, spd_cdf(d, y)) / y, 1.0, 1e-9);
    }
}

TEST(SpdDistribution, MonotoneCdfAndPartialMoment) {
    auto d = spd_distribution(one_asset());
    double c = 0.0, k = 0.0;
    for (int i = 1; i < 400; ++i) {
        double y = 0.01 * i;
        EXPECT_GT(d.cdf(y), c);
        EXPECT_GE(d.partial_moment(y), k);
        c = d.cdf(y);
        k = d.partial_moment(y);
    }
}

TEST(TruncatedExpectation, FullRangeMoments) {
    auto m = one_asset();
    for (double t : {0.0, 0.25, 0.6, 0.99}) {
        auto mo = lognormal_moments(m, t);
        EXPECT_NEAR(truncated_expectation(mo, 0.7, 1.0, 0.0, 0.0, kInf), mo.A, 1e-12);
        EXPECT_NEAR(truncated_expectation(mo, 1.0, 0.0, 1.0, 0.0, kInf), mo.B, 1e-12);
    }
}

TEST(TruncatedExpectation, Additivity) {
    auto mo = lognormal_moments(one_asset(), 0.2);
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> U(0.05, 3.0);
    for (int k = 0; k < 50; ++k) {
        double q[3] = {U(gen), U(gen), U(gen)};
        std::sort(q, q + 3);
        double a = U(gen) - 1.5, b = U(gen) - 1.5, z = U(gen);
        double lhs = truncated_expectation(mo, z, a, b, q[0], q[1]) + truncated_expectation(mo, z, a, b, q[1], q[2]);
        EXPECT_NEAR(lhs, truncated_expectation(mo, z, a, b, q[0], q[2]), 1e-12);
    }
}

TEST(TruncatedExpectation, MonteCarlo) {
    auto mo = lognormal_moments(one_asset(), 0.0);
    std::mt19937_64 gen(20240101);
    std::normal_distribution<double> N01;
    const int n = 10'000'000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double r = std::exp(mo.m + mo.v * N01(gen));
        double x = (r >= 0.5 && r <= 1.5) ? r * (2.0 - r) : 0.0;
        sum += x;
        sum2 += x * x;
    }
    double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
    EXPECT_NEAR(truncated_expectation(mo, 1.0, 2.0, -1.0, 0.5, 1.5), mean, 3.0 * se);
}

TEST(TruncatedExpectation, DerivativeMatchesFiniteDifference) {
    auto mo = lognormal_moments(one_asset(), 0.3);
    for (double z : {0.4, 0.9, 1.7}) {
        double h = 1e-5 * z;
        double fd = (truncated_expectation(mo, z + h, 1.3, -0.8, 0.3, 1.4) -
                     truncated_expectation(mo, z - h, 1.3, -0.8, 0.3, 1.4)) / (2.0 * h);
        EXPECT_NEAR(truncated_expectation_zdz(mo, z, 1.3, -0.8, 0.3, 1.4), z * fd, 1e-7);
    }
}

TEST(TruncatedExpectation, BadBoundsThrow) {
    auto mo = lognormal_moments(one_asset(), 0.0);
    EXPECT_THROW(truncated_expectation(mo, 1.0, 1.0, 0.0, 2.0, 1.0), DomainError);
}

TEST(Calibration, DiagonalCase) {
    Vec lm = Vec::Constant(3, 0.1);
    Mat lc = Mat::Identity(3, 3) * 0.04;
    auto c = calibrate_from_log_stats(lm, lc);
    EXPECT_LT((c.sigma - 0.2 * Mat::Identity(3, 3)).norm(), 1e-15);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(c.mu(i), 0.12, 1e-15);
}

TEST(Calibration, RoundTrip) {
    Vec mu = experiments::three_asset_market().mu(0.0);
    Mat s = three_sigma();
    auto st = log_stats_from_params(mu, s);
    auto c = calibrate_from_log_stats(st.log_mean, st.log_cov);
    EXPECT_LT((c.sigma * c.sigma.transpose() - s * s.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((c.mu - mu).cwiseAbs().maxCoeff(), 1e-10);
    auto back = log_stats_from_params(c.mu, c.sigma);
    EXPECT_LT((back.log_mean - st.log_mean).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((back.log_cov - st.log_cov).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Calibration, OneAssetLogMean) {
    Vec mu(1);
    mu << 0.1068;
    Mat s(1, 1);
    s << 0.22;
    EXPECT_NEAR(log_stats_from_params(mu, s).log_mean(0), 0.0826, 1e-12);
}

TEST(Calibration, NonPositiveDefinite) {
    Vec lm = Vec::Zero(2);
    Mat lc(2, 2);
    lc << 0.04, 0.05, 0.05, 0.04;
    EXPECT_THROW(calibrate_from_log_stats(lm, lc), DomainError);
}
