#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "hybridmv/errors.hpp"
#include "hybridmv/market_core.hpp"

namespace hybridmv::qp {

// min 1/2 x'Hx + f'x  s.t.  A x = b,  G x <= h
struct Problem {
    Mat H;
    Vec f;
    Mat A;
    Vec b;
    Mat G;
    Vec h;
};

struct Options {
    double tol = 1e-9;
    int max_iter = 200;
};

struct Result {
    Vec x;
    Vec y;  // equality multipliers
    Vec z;  // inequality multipliers
    double objective = 0.0;
    int iterations = 0;
};

inline double objective(const Problem& p, const Vec& x) { return 0.5 * x.dot(p.H * x) + p.f.dot(x); }

namespace detail {

inline double max_step(const Vec& v, const Vec& dv) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    return a;
}

}  // namespace detail

// Mehrotra predictor-corrector on the dense KKT system.
inline Result solve(const Problem& p, Options opt = {}) {
    const Eigen::Index n = p.H.rows(), me = p.A.rows(), mi = p.G.rows();
    if (p.H.cols() != n || p.f.size() != n || (me > 0 && p.A.cols() != n) || (mi > 0 && p.G.cols() != n) ||
        p.b.size() != me || p.h.size() != mi)
        throw DomainError("qp: inconsistent dimensions");

    Mat K(n + me, n + me);
    auto factor = [&](const Vec& d) {
        K.setZero();
        K.topLeftCorner(n, n) = p.H;
        if (mi > 0) K.topLeftCorner(n, n) += p.G.transpose() * d.asDiagonal() * p.G;
        K.topLeftCorner(n, n).diagonal().array() += 1e-13;
        if (me > 0) {
            K.topRightCorner(n, me) = p.A.transpose();
            K.bottomLeftCorner(me, n) = p.A;
        }
        return Eigen::PartialPivLU<Mat>(K);
    };

    Vec x = Vec::Zero(n), y = Vec::Zero(me), s = Vec::Ones(mi), z = Vec::Ones(mi);
    {
        // least-squares start that honours the equalities
        auto lu = factor(Vec::Ones(mi));
        Vec rhs(n + me);
        rhs.head(n) = -p.f;
        if (mi > 0) rhs.head(n) += p.G.transpose() * p.h;
        rhs.tail(me) = p.b;
        Vec sol = lu.solve(rhs);
        if (sol.allFinite()) x = sol.head(n);
        if (mi > 0) {
            s = p.h - p.G * x;
            double lo = s.minCoeff();
            if (lo < 1.0) s.array() += 1.0 - lo;
        }
    }

    const double nb = 1.0 + (me > 0 ? p.b.lpNorm<Eigen::Infinity>() : 0.0);
    const double nh = 1.0 + (mi > 0 ? p.h.lpNorm<Eigen::Infinity>() : 0.0);
    const double nf = 1.0 + p.f.lpNorm<Eigen::Infinity>();

    Result res;
    for (int it = 0; it < opt.max_iter; ++it) {
        Vec rd = p.H * x + p.f;
        if (me > 0) rd += p.A.transpose() * y;
        if (mi > 0) rd += p.G.transpose() * z;
        Vec rp = me > 0 ? Vec(p.A * x - p.b) : Vec();
        Vec ri = mi > 0 ? Vec(p.G * x + s - p.h) : Vec();
        double gap = mi > 0 ? s.dot(z) : 0.0;
        double obj = objective(p, x);
        bool feasible = (me == 0 || rp.lpNorm<Eigen::Infinity>() <= opt.tol * nb) &&
                        (mi == 0 || ri.lpNorm<Eigen::Infinity>() <= opt.tol * nh);
        if (feasible && rd.lpNorm<Eigen::Infinity>() <= opt.tol * nf && gap <= opt.tol * (1.0 + std::abs(obj))) {
            res.x = x;
            res.y = y;
            res.z = z;
            res.objective = obj;
            res.iterations = it;
            return res;
        }
        if (mi > 0 && z.maxCoeff() > 1e14) break;

        Vec d = mi > 0 ? Vec(z.array() / s.array()) : Vec();
        auto lu = factor(d);
        auto direction = [&](const Vec& rc, Vec& dx, Vec& dy, Vec& dz, Vec& ds) {
            Vec rhs(n + me);
            rhs.head(n) = -rd;
            if (mi > 0) rhs.head(n) -= p.G.transpose() * ((-rc.array() + z.array() * ri.array()) / s.array()).matrix();
            if (me > 0) rhs.tail(me) = -rp;
            Vec sol = lu.solve(rhs);
            dx = sol.head(n);
            dy = sol.tail(me);
            if (mi > 0) {
                Vec gdx = p.G * dx;
                dz = ((-rc.array() + z.array() * ri.array() + z.array() * gdx.array()) / s.array()).matrix();
                ds = -ri - gdx;
            }
        };

        Vec dx, dy, dz, ds;
        if (mi == 0) {
            direction(Vec(), dx, dy, dz, ds);
            x += dx;
            y += dy;
            continue;
        }
        const double mu = gap / mi;
        Vec rc = (s.array() * z.array()).matrix();
        direction(rc, dx, dy, dz, ds);
        double aff = std::min(detail::max_step(s, ds), detail::max_step(z, dz));
        double mu_aff = (s + aff * ds).dot(z + aff * dz) / mi;
        double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
        rc = (s.array() * z.array() + ds.array() * dz.array() - sigma * mu).matrix();
        direction(rc, dx, dy, dz, ds);
        double a = std::min(1.0, 0.99 * std::min(detail::max_step(s, ds), detail::max_step(z, dz)));
        x += a * dx;
        y += a * dy;
        z += a * dz;
        s += a * ds;
        if (!x.allFinite() || !z.allFinite()) break;
    }

    Vec rp = me > 0 ? Vec(p.A * x - p.b) : Vec();
    Vec ri = mi > 0 ? Vec(p.G * x - p.h) : Vec();
    double viol = 0.0;
    if (me > 0) viol = std::max(viol, rp.lpNorm<Eigen::Infinity>() / nb);
    if (mi > 0) viol = std::max(viol, ri.maxCoeff() / nh);
    std::ostringstream os;
    if (!x.allFinite() || viol > 1e-6) {
        os << "qp: constraints appear infeasible (violation " << viol << ")";
        throw InfeasibleError(os.str());
    }
    os << "qp: interior point did not converge in " << opt.max_iter << " iterations";
    throw SolverError(os.str());
}

}  // namespace hybridmv::qp
