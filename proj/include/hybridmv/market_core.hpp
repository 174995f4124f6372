#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hybridmv/errors.hpp"
#include "hybridmv/normal.hpp"

namespace hybridmv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard deviations used in place of an infinite truncation bound.
inline constexpr double kSentinelSd = 38.0;

// Black-Scholes market with parameters piecewise constant on a time grid.
class MarketModel {
public:
    // knots = {0 = t_0 < t_1 < ... < t_K = T}; r, mu, sigma hold one entry per piece.
    MarketModel(std::vector<double> knots, std::vector<double> r, std::vector<Vec> mu,
                std::vector<Mat> sigma)
        : knots_(std::move(knots)), r_(std::move(r)), mu_(std::move(mu)), sigma_(std::move(sigma)) {
        const std::size_t k = r_.size();
        if (k == 0 || knots_.size() != k + 1 || mu_.size() != k || sigma_.size() != k)
            throw DomainError("market: inconsistent piece counts");
        if (knots_.front() != 0.0) throw DomainError("market: first knot must be 0");
        for (std::size_t i = 0; i < k; ++i)
            if (!(knots_[i + 1] > knots_[i])) throw DomainError("market: knots must increase");
        n_ = static_cast<int>(mu_[0].size());
        if (n_ < 1) throw DomainError("market: need at least one asset");
        for (std::size_t i = 0; i < k; ++i) {
            if (mu_[i].size() != n_ || sigma_[i].rows() != n_ || sigma_[i].cols() != n_)
                throw DomainError("market: dimension mismatch");
            if (!std::isfinite(r_[i]) || !mu_[i].allFinite() || !sigma_[i].allFinite())
                throw DomainError("market: parameters must be finite");
            Eigen::LLT<Mat> llt(sigma_[i] * sigma_[i].transpose());
            if (llt.info() != Eigen::Success || sigma_[i].fullPivLu().rank() < n_)
                throw DomainError("market: sigma*sigma^T is not positive definite (nondegeneracy)");
            Vec b = mu_[i] - r_[i] * Vec::Ones(n_);
            Vec th = sigma_[i].fullPivLu().solve(b);
            theta_.push_back(th);
            theta2_.push_back(th.squaredNorm());
        }
    }

    static MarketModel constant(double r, const Vec& mu, const Mat& sigma, double T) {
        return MarketModel({0.0, T}, {r}, {mu}, {sigma});
    }

    int n() const { return n_; }
    double horizon() const { return knots_.back(); }
    std::size_t pieces() const { return r_.size(); }
    const std::vector<double>& knots() const { return knots_; }

    std::size_t piece(double t) const {
        if (t < 0.0 || t > horizon()) throw DomainError("market: time outside [0,T]");
        auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        std::size_t idx = static_cast<std::size_t>(it - knots_.begin());
        return std::min(idx == 0 ? 0 : idx - 1, pieces() - 1);
    }

    double rate(double t) const { return r_[piece(t)]; }
    const Vec& mu(double t) const { return mu_[piece(t)]; }
    const Mat& sigma(double t) const { return sigma_[piece(t)]; }
    Vec excess(double t) const { return mu(t) - rate(t) * Vec::Ones(n_); }
    const Vec& theta(double t) const { return theta_[piece(t)]; }

    double rate_piece(std::size_t k) const { return r_[k]; }
    const Vec& mu_piece(std::size_t k) const { return mu_[k]; }
    const Mat& sigma_piece(std::size_t k) const { return sigma_[k]; }
    const Vec& theta_piece(std::size_t k) const { return theta_[k]; }

    // Exact integral over [t1,t2] of a piecewise-constant quantity.
    template <class G>
    double integrate(double t1, double t2, G g) const {
        double total = 0.0;
        for (std::size_t k = 0; k < pieces(); ++k) {
            double lo = std::max(t1, knots_[k]), hi = std::min(t2, knots_[k + 1]);
            if (hi > lo) total += g(k) * (hi - lo);
        }
        return total;
    }

    double integrated_rate(double t1, double t2) const {
        return integrate(t1, t2, [&](std::size_t k) { return r_[k]; });
    }
    double integrated_theta2(double t1, double t2) const {
        return integrate(t1, t2, [&](std::size_t k) { return theta2_[k]; });
    }

private:
    std::vector<double> knots_;
    std::vector<double> r_;
    std::vector<Vec> mu_;
    std::vector<Mat> sigma_;
    std::vector<Vec> theta_;
    std::vector<double> theta2_;
    int n_ = 0;
};

inline Vec risk_premium(const MarketModel& model, double t) { return model.theta(t); }

struct LognormalMoments {
    double m = 0.0;
    double v = 0.0;
    double A = 1.0;
    double B = 1.0;
};

inline LognormalMoments make_moments(double m, double v) {
    return {m, v, std::exp(m + 0.5 * v * v), std::exp(2.0 * m + 2.0 * v * v)};
}

inline LognormalMoments lognormal_moments(const MarketModel& model, double t) {
    const double T = model.horizon();
    if (t > T || t < 0.0) throw DomainError("lognormal_moments: t outside [0,T]");
    double th2 = model.integrated_theta2(t, T);
    double m = -(model.integrated_rate(t, T) + 0.5 * th2);
    return make_moments(m, std::sqrt(th2));
}

// Distribution of z(T) seen from time 0: ln z(T) ~ N(m0, v0^2).
struct SpdDistribution {
    double m0 = 0.0;
    double v0 = 0.0;

    double A0() const { return std::exp(m0 + 0.5 * v0 * v0); }
    double B0() const { return std::exp(2.0 * m0 + 2.0 * v0 * v0); }
    double w(double y) const { return (std::log(y) - m0) / v0; }

    // K0
    double cdf(double y) const { return y <= 0.0 ? 0.0 : normal::cdf(w(y)); }
    // 1 - K0, kept accurate for large y
    double upper(double y) const { return y <= 0.0 ? 1.0 : normal::sf(w(y)); }
    double quantile(double s) const {
        if (!(s > 0.0 && s < 1.0)) throw DomainError("spd quantile: s outside (0,1)");
        return std::exp(m0 + v0 * normal::quantile(s));
    }
    // K0^{-1}(1 - q), accurate for small q
    double quantile_upper(double q) const {
        if (!(q > 0.0 && q < 1.0)) throw DomainError("spd quantile: q outside (0,1)");
        return std::exp(m0 + v0 * normal::isf(q));
    }
    // K1(y) = E[z(T) 1{z(T) <= y}]
    double partial_moment(double y) const {
        return y <= 0.0 ? 0.0 : A0() * normal::cdf(w(y) - v0);
    }
    // K0'(y)
    double density(double y) const { return y <= 0.0 ? 0.0 : normal::pdf(w(y)) / (y * v0); }
};

inline SpdDistribution spd_distribution(const MarketModel& model) {
    LognormalMoments mo = lognormal_moments(model, 0.0);
    if (!(mo.v > 0.0)) throw DomainError("state-price density is atomic (zero risk premium)");
    return {mo.m, mo.v};
}

inline double spd_cdf(const SpdDistribution& d, double y) { return d.cdf(y); }
inline double spd_quantile(const SpdDistribution& d, double s) { return d.quantile(s); }
inline double spd_partial_moment(const SpdDistribution& d, double y) { return d.partial_moment(y); }

// Phi(hi) - Phi(lo), evaluated on the tail that avoids cancellation.
inline double prob_between(double lo, double hi) {
    if (hi <= lo) return 0.0;
    if (lo > 0.0) return normal::sf(lo) - normal::sf(hi);
    return normal::cdf(hi) - normal::cdf(lo);
}

namespace detail {

inline double k_of(double q, double z_t, const LognormalMoments& mo, bool lower) {
    if (lower && q <= 0.0) return -kSentinelSd;
    if (!lower && !std::isfinite(q)) return kSentinelSd;
    if (!lower && q <= 0.0) return -kSentinelSd;
    double k = (std::log(q / z_t) - mo.m) / mo.v - mo.v;
    return std::clamp(k, -kSentinelSd, kSentinelSd);
}

}  // namespace detail

// E[(z(T)/z_t)(a + b z(T)) 1{q1 <= z(T) <= q2} | z(t) = z_t]
inline double truncated_expectation(const LognormalMoments& mo, double z_t, double a, double b,
                                    double q1, double q2) {
    if (q1 > q2) throw DomainError("truncated_expectation: q1 > q2");
    if (!(z_t > 0.0)) throw DomainError("truncated_expectation: z_t must be positive");
    if (mo.v <= 0.0) {
        double zT = z_t * std::exp(mo.m);
        return (zT >= q1 && zT <= q2) ? (zT / z_t) * (a + b * zT) : 0.0;
    }
    double k1 = detail::k_of(q1, z_t, mo, true);
    double k2 = detail::k_of(q2, z_t, mo, false);
    double out = 0.0;
    if (a != 0.0) out += a * mo.A * prob_between(k1, k2);
    if (b != 0.0) out += b * z_t * mo.B * prob_between(k1 - mo.v, k2 - mo.v);
    return out;
}

// z_t times the derivative of truncated_expectation with respect to z_t.
inline double truncated_expectation_zdz(const LognormalMoments& mo, double z_t, double a,
                                        double b, double q1, double q2) {
    if (q1 > q2) throw DomainError("truncated_expectation: q1 > q2");
    if (mo.v <= 0.0) throw DomainError("truncated_expectation: derivative undefined at t = T");
    double k1 = detail::k_of(q1, z_t, mo, true);
    double k2 = detail::k_of(q2, z_t, mo, false);
    double p1 = (k1 <= -kSentinelSd) ? 0.0 : normal::pdf(k1);
    double p2 = (k2 >= kSentinelSd) ? 0.0 : normal::pdf(k2);
    double p1v = (k1 <= -kSentinelSd) ? 0.0 : normal::pdf(k1 - mo.v);
    double p2v = (k2 >= kSentinelSd) ? 0.0 : normal::pdf(k2 - mo.v);
    double out = 0.0;
    if (a != 0.0) out += a * mo.A * (p1 - p2) / mo.v;
    if (b != 0.0)
        out += b * z_t * mo.B * (prob_between(k1 - mo.v, k2 - mo.v) + (p1v - p2v) / mo.v);
    return out;
}

struct CalibratedParams {
    Vec mu;
    Mat sigma;
};

// Inverts the GBM log-return statistics: sigma is the lower Cholesky factor of log_cov.
inline CalibratedParams calibrate_from_log_stats(const Vec& log_mean, const Mat& log_cov) {
    if (log_cov.rows() != log_cov.cols() || log_cov.rows() != log_mean.size())
        throw DomainError("calibration: dimension mismatch");
    if ((log_cov - log_cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + log_cov.cwiseAbs().maxCoeff()))
        throw DomainError("calibration: covariance not symmetric");
    Eigen::LLT<Mat> llt(log_cov);
    if (llt.info() != Eigen::Success) throw DomainError("calibration: covariance not positive definite");
    Mat L = llt.matrixL();
    Vec mu = log_mean + 0.5 * L.rowwise().squaredNorm();
    return {mu, L};
}

struct LogStats {
    Vec log_mean;
    Mat log_cov;
};

// Annual log-return mean and covariance implied by GBM parameters.
inline LogStats log_stats_from_params(const Vec& mu, const Mat& sigma) {
    Mat cov = sigma * sigma.transpose();
    return {mu - 0.5 * cov.diagonal(), cov};
}

}  // namespace hybridmv
