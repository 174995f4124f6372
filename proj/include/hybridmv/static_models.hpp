#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "hybridmv/errors.hpp"
#include "hybridmv/market_core.hpp"
#include "hybridmv/qp.hpp"
#include "hybridmv/rng.hpp"

namespace hybridmv {

// N x n gross-return scenarios and the gross risk-free return over the horizon.
struct ScenarioSet {
    Mat returns;
    double r_free = 1.0;

    int N() const { return static_cast<int>(returns.rows()); }
    int n() const { return static_cast<int>(returns.cols()); }

    void validate() const {
        if (N() < 2) throw DomainError("scenario set: need at least two scenarios");
        if (!(r_free > 0.0)) throw DomainError("scenario set: risk-free gross return must be positive");
        if (!returns.allFinite() || returns.minCoeff() <= 0.0)
            throw DomainError("scenario set: gross returns must be positive and finite");
    }

    Vec mean() const { return returns.colwise().mean().transpose(); }

    Mat covariance() const {
        Mat c = returns.rowwise() - returns.colwise().mean();
        return (c.transpose() * c) / static_cast<double>(N());
    }

    Vec wealth(const Vec& u, double u_f) const { return returns * u + Vec::Constant(N(), r_free * u_f); }
};

// CSV with a header row and one scenario per line.
inline ScenarioSet read_scenarios_csv(std::istream& in, double r_free) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("scenario CSV: empty input");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                row.push_back(std::stod(cell, &pos));
            } catch (const std::exception&) {
                throw ConfigError("scenario CSV: bad number '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ConfigError("scenario CSV: ragged rows");
        rows.push_back(row);
    }
    if (rows.empty()) throw ConfigError("scenario CSV: no scenarios");
    ScenarioSet s;
    s.r_free = r_free;
    s.returns.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) s.returns(i, j) = rows[i][j];
    s.validate();
    return s;
}

inline void write_scenarios_csv(std::ostream& os, const ScenarioSet& s) {
    for (int j = 0; j < s.n(); ++j) os << (j ? "," : "") << "R" << j + 1;
    os << '\n';
    os.precision(17);
    for (int i = 0; i < s.N(); ++i) {
        for (int j = 0; j < s.n(); ++j) os << (j ? "," : "") << s.returns(i, j);
        os << '\n';
    }
}

inline void require_unit_weights(const std::vector<double>& w) {
    double sum = std::accumulate(w.begin(), w.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-10) throw DomainError("spectrum weights must sum to one");
}

// -sum psi_i x_(i:N), x sorted ascending.
inline double sorted_srm(const std::vector<double>& psi, const Vec& x) {
    if (static_cast<Eigen::Index>(psi.size()) != x.size()) throw DomainError("sorted_srm: size mismatch");
    require_unit_weights(psi);
    std::vector<double> v(x.data(), x.data() + x.size());
    std::sort(v.begin(), v.end());
    double out = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) out -= psi[i] * v[i];
    return out;
}

// Y(nu) = sum_{j<N} dpsi_j (j nu_j - sum_i (nu_j - x_i)^+) - psi_N sum_i x_i
inline double y_function(const Vec& nu, const Vec& x, const std::vector<double>& psi) {
    const Eigen::Index N = x.size();
    if (nu.size() != N || static_cast<Eigen::Index>(psi.size()) != N) throw DomainError("y_function: size mismatch");
    double y = 0.0;
    for (Eigen::Index j = 0; j + 1 < N; ++j) {
        double dpsi = psi[j + 1] - psi[j];
        double hinge = (Vec::Constant(N, nu[j]) - x).cwiseMax(0.0).sum();
        y += dpsi * (static_cast<double>(j + 1) * nu[j] - hinge);
    }
    return y - psi[N - 1] * x.sum();
}

inline double y_function(const Vec& nu, const Vec& u, double u_f, const ScenarioSet& sc,
                         const std::vector<double>& psi) {
    return y_function(nu, sc.wealth(u, u_f), psi);
}

struct YMinimum {
    Vec nu;
    double value = 0.0;
};

// The minimiser puts nu_j at the j-th order statistic.
inline YMinimum minimize_y(const Vec& x, const std::vector<double>& psi) {
    for (std::size_t j = 0; j + 1 < psi.size(); ++j)
        if (psi[j + 1] - psi[j] > 1e-15) throw DomainError("minimize_y: weights must be nonincreasing");
    YMinimum m;
    m.nu = x;
    std::sort(m.nu.data(), m.nu.data() + m.nu.size());
    m.value = y_function(m.nu, x, psi);
    return m;
}

enum class StaticStatus { optimal, heuristic, infeasible };

inline std::string to_string(StaticStatus s) {
    switch (s) {
        case StaticStatus::optimal: return "optimal";
        case StaticStatus::heuristic: return "heuristic";
        case StaticStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

struct StaticSolution {
    Vec u;
    double u_f = 0.0;
    double objective = 0.0;
    double variance = 0.0;
    double risk_component = 0.0;
    StaticStatus status = StaticStatus::infeasible;
    int iterations = 0;
    std::vector<int> tail;  // VaR-MV: scenarios allowed below the VaR level
};

struct StaticProblem {
    ScenarioSet scenarios;
    Mat Q;
    Vec ER;
    double x0 = 1.0;
    double x_d = 1.2;
    double omega = 0.0;

    int n() const { return static_cast<int>(ER.size()); }

    void validate() const {
        scenarios.validate();
        if (Q.rows() != n() || Q.cols() != n() || scenarios.n() != n())
            throw DomainError("static problem: dimension mismatch");
        if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + Q.cwiseAbs().maxCoeff()))
            throw DomainError("static problem: Q must be symmetric");
        Eigen::SelfAdjointEigenSolver<Mat> es(Q);
        if (es.eigenvalues().minCoeff() < -1e-12 * (1.0 + Q.cwiseAbs().maxCoeff()))
            throw DomainError("static problem: Q must be positive semidefinite");
        if (omega < 0.0) throw DomainError("static problem: omega must be nonnegative");
        if (!(x0 > 0.0)) throw DomainError("static problem: x0 must be positive");
    }
};

namespace detail {

// Variables (u, u_f, extra...) with budget/target equalities and no-bankruptcy rows.
inline qp::Problem static_base(const StaticProblem& p, int extra) {
    const int n = p.n(), nv = n + 1 + extra, N = p.scenarios.N();
    qp::Problem q;
    q.H = Mat::Zero(nv, nv);
    q.H.topLeftCorner(n, n) = 2.0 * p.Q;
    q.f = Vec::Zero(nv);
    q.A = Mat::Zero(2, nv);
    q.A.block(0, 0, 1, n) = p.ER.transpose();
    q.A(0, n) = p.scenarios.r_free;
    q.A.block(1, 0, 1, n).setOnes();
    q.A(1, n) = 1.0;
    q.b = Vec(2);
    q.b << p.x_d, p.x0;
    q.G = Mat::Zero(N, nv);
    q.G.leftCols(n) = -p.scenarios.returns;
    q.G.col(n).setConstant(-p.scenarios.r_free);
    q.h = Vec::Zero(N);
    return q;
}

inline void append_rows(qp::Problem& q, const Mat& G, const Vec& h) {
    Mat g(q.G.rows() + G.rows(), q.G.cols());
    g << q.G, G;
    Vec hh(q.h.size() + h.size());
    hh << q.h, h;
    q.G = std::move(g);
    q.h = std::move(hh);
}

inline StaticSolution unpack(const StaticProblem& p, const Vec& x) {
    StaticSolution s;
    s.u = x.head(p.n());
    s.u_f = x[p.n()];
    s.variance = s.u.dot(p.Q * s.u);
    return s;
}

}  // namespace detail

// Static SRM-MV by outer approximation: the discrete SRM is the maximum over rank assignments of
// linear functions, so each iterate contributes the supporting cut of its own ordering.
inline StaticSolution solve_static_srmv(const StaticProblem& p, const std::vector<double>& psi,
                                        int max_cuts = 500, double tol = 1e-7) {
    p.validate();
    const int n = p.n(), N = p.scenarios.N();
    if (static_cast<int>(psi.size()) != N) throw DomainError("static SRM-MV: one weight per scenario required");
    require_unit_weights(psi);
    for (int j = 0; j + 1 < N; ++j)
        if (psi[j + 1] - psi[j] > 1e-15) throw DomainError("static SRM-MV: weights must be nonincreasing");

    if (p.omega == 0.0) {
        qp::Problem q = detail::static_base(p, 0);
        auto r = qp::solve(q);
        StaticSolution s = detail::unpack(p, r.x);
        s.risk_component = sorted_srm(psi, p.scenarios.wealth(s.u, s.u_f));
        s.objective = s.variance;
        s.status = StaticStatus::optimal;
        return s;
    }

    qp::Problem q = detail::static_base(p, 1);
    q.f[n + 1] = p.omega;
    auto add_cut = [&](const Vec& wealth) {
        std::vector<int> order(N);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return wealth[a] < wealth[b]; });
        Mat row = Mat::Zero(1, n + 2);
        for (int k = 0; k < N; ++k) {
            row.block(0, 0, 1, n) -= psi[k] * p.scenarios.returns.row(order[k]);
            row(0, n) -= psi[k] * p.scenarios.r_free;
        }
        row(0, n + 1) = -1.0;
        detail::append_rows(q, row, Vec::Zero(1));
    };

    // first cut at the mean-variance point
    {
        qp::Problem q0 = detail::static_base(p, 0);
        auto r0 = qp::solve(q0);
        add_cut(p.scenarios.wealth(r0.x.head(n), r0.x[n]));
    }
    for (int it = 1; it <= max_cuts; ++it) {
        auto r = qp::solve(q);
        StaticSolution s = detail::unpack(p, r.x);
        Vec wealth = p.scenarios.wealth(s.u, s.u_f);
        double srm = sorted_srm(psi, wealth);
        double envelope = r.x[n + 1];
        if (srm - envelope <= tol) {
            s.risk_component = srm;
            s.objective = s.variance + p.omega * srm;
            s.status = StaticStatus::optimal;
            s.iterations = it;
            return s;
        }
        add_cut(wealth);
    }
    throw SolverError("static SRM-MV: cutting planes did not converge within the cut limit");
}

// --- static VaR-MV -------------------------------------------------------------------------

inline int tail_capacity(double gamma, int N) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("static VaR-MV: gamma must lie in (0,1)");
    // (1/N) sum (1 - z_i) >= 1 - gamma  <=>  sum z_i <= gamma N
    return static_cast<int>(std::floor(gamma * N + 1e-9));
}

// QP with a fixed set of scenarios released from the VaR constraint.
inline StaticSolution solve_static_vrmv_given_tail(const StaticProblem& p, const std::vector<int>& tail) {
    const int n = p.n(), N = p.scenarios.N();
    std::vector<char> released(N, 0);
    for (int i : tail) released.at(i) = 1;
    qp::Problem q = detail::static_base(p, 1);
    q.f[n + 1] = p.omega;
    int kept = N - static_cast<int>(tail.size());
    Mat G = Mat::Zero(kept, n + 2);
    int r = 0;
    for (int i = 0; i < N; ++i) {
        if (released[i]) continue;
        // z_gamma >= -kappa_i
        G.block(r, 0, 1, n) = -p.scenarios.returns.row(i);
        G(r, n) = -p.scenarios.r_free;
        G(r, n + 1) = -1.0;
        ++r;
    }
    detail::append_rows(q, G, Vec::Zero(kept));
    auto res = qp::solve(q);
    StaticSolution s = detail::unpack(p, res.x);
    Vec wealth = p.scenarios.wealth(s.u, s.u_f);
    s.risk_component = -kInf;
    for (int i = 0; i < N; ++i)
        if (!released[i]) s.risk_component = std::max(s.risk_component, -wealth[i]);
    s.objective = s.variance + p.omega * s.risk_component;
    s.tail = tail;
    std::sort(s.tail.begin(), s.tail.end());
    return s;
}

// Box bounds on each u_k over the feasible set, from LPs solved with the interior-point method.
inline std::vector<std::pair<double, double>> static_box_bounds(const StaticProblem& p) {
    const int n = p.n();
    std::vector<std::pair<double, double>> out;
    for (int k = 0; k <= n; ++k) {
        double lo = 0.0, hi = 0.0;
        for (int sgn : {1, -1}) {
            qp::Problem q = detail::static_base(p, 0);
            q.H.setZero();
            q.H.diagonal().setConstant(1e-10);
            q.f[k] = sgn;
            auto r = qp::solve(q, {1e-9, 400});
            (sgn > 0 ? lo : hi) = r.x[k];
        }
        out.emplace_back(lo, hi);
    }
    return out;
}

// Big-M: twice the largest attainable scenario wealth over the feasible box.
inline double static_big_m(const StaticProblem& p) {
    auto box = static_box_bounds(p);
    const int n = p.n();
    double m = 0.0;
    for (int i = 0; i < p.scenarios.N(); ++i) {
        double w = 0.0;
        for (int k = 0; k < n; ++k)
            w += std::max(std::abs(box[k].first), std::abs(box[k].second)) * p.scenarios.returns(i, k);
        w += std::max(std::abs(box[n].first), std::abs(box[n].second)) * p.scenarios.r_free;
        m = std::max(m, w);
    }
    return 2.0 * m;
}

namespace detail {

inline std::vector<int> lowest(const Vec& wealth, int k) {
    std::vector<int> idx(wealth.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return wealth[a] < wealth[b]; });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace detail

// Tail-fixing: release the K lowest scenarios of the incumbent, re-solve, repeat to a fixed point.
inline StaticSolution solve_static_vrmv_heuristic(const StaticProblem& p, double gamma, int starts = 10,
                                                  std::uint64_t seed = 2024) {
    p.validate();
    const int N = p.scenarios.N(), K = tail_capacity(gamma, N);
    const int n = p.n();
    qp::Problem q0 = detail::static_base(p, 0);
    auto mv = qp::solve(q0);
    Vec w0 = p.scenarios.wealth(mv.x.head(n), mv.x[n]);

    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return w0[a] < w0[b]; });
    const int pool = std::min(N, std::max(4 * K, K + 1));

    StaticSolution best;
    bool have = false;
    int total = 0;
    for (int st = 0; st < std::max(1, starts); ++st) {
        std::vector<int> tail;
        if (st == 0) {
            tail = detail::lowest(w0, K);
        } else {
            // random K-subset of the weakest scenarios under the MV allocation
            std::vector<std::pair<double, int>> keyed;
            for (int k = 0; k < pool; ++k) keyed.emplace_back(rng::uniform(seed, st, k, 0), order[k]);
            std::sort(keyed.begin(), keyed.end());
            for (int k = 0; k < K; ++k) tail.push_back(keyed[k].second);
            std::sort(tail.begin(), tail.end());
        }
        std::set<std::vector<int>> seen;
        StaticSolution cur;
        for (int it = 0; it < 100; ++it) {
            ++total;
            cur = solve_static_vrmv_given_tail(p, tail);
            seen.insert(tail);
            auto next = detail::lowest(p.scenarios.wealth(cur.u, cur.u_f), K);
            if (seen.count(next)) break;
            tail = next;
        }
        if (!have || cur.objective < best.objective - 1e-12) {
            best = cur;
            have = true;
        }
    }
    best.status = StaticStatus::heuristic;
    best.iterations = total;
    return best;
}

// Branch-and-bound over the big-M formulation with QP relaxations, best-first by bound then node id.
inline StaticSolution solve_static_vrmv_exact(const StaticProblem& p, double gamma, int max_nodes = 200000) {
    p.validate();
    const int N = p.scenarios.N(), n = p.n();
    if (N > 60) throw DomainError("static VaR-MV exact mode supports at most 60 scenarios; use heuristic mode");
    const int K = tail_capacity(gamma, N);
    const double M = static_big_m(p);

    StaticSolution inc = solve_static_vrmv_heuristic(p, gamma, 10);
    double ub = inc.objective;

    // variables: u (n), u_f, z_gamma, z_1..z_N
    const int nv = n + 2 + N;
    auto relaxation = [&](const std::vector<int>& fix) {
        qp::Problem q = detail::static_base(p, 1 + N);
        q.f[n + 1] = p.omega;
        Mat G = Mat::Zero(3 * N + 1, nv);
        Vec h = Vec::Zero(3 * N + 1);
        for (int i = 0; i < N; ++i) {
            // -kappa_i - M z_i - z_gamma <= 0
            G.block(i, 0, 1, n) = -p.scenarios.returns.row(i);
            G(i, n) = -p.scenarios.r_free;
            G(i, n + 1) = -1.0;
            G(i, n + 2 + i) = -M;
            // 0 <= z_i <= 1, tightened by the branching fixes
            double lo = fix[i] == 1 ? 1.0 : 0.0, hi = fix[i] == 0 ? 0.0 : 1.0;
            G(N + i, n + 2 + i) = 1.0;
            h[N + i] = hi;
            G(2 * N + i, n + 2 + i) = -1.0;
            h[2 * N + i] = -lo;
        }
        G.block(3 * N, n + 2, 1, N).setOnes();
        h[3 * N] = K;
        detail::append_rows(q, G, h);
        return qp::solve(q);
    };

    struct Node {
        double bound;
        long id;
        std::vector<int> fix;  // -1 free, 0 or 1 fixed
    };
    auto cmp = [](const Node& a, const Node& b) {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.id > b.id;
    };
    std::priority_queue<Node, std::vector<Node>, decltype(cmp)> open(cmp);
    long next_id = 0;
    open.push({-kInf, next_id++, std::vector<int>(N, -1)});
    int explored = 0;
    const double prune_tol = 1e-9 * (1.0 + std::abs(ub));

    while (!open.empty()) {
        Node node = open.top();
        open.pop();
        if (node.bound >= ub - prune_tol) continue;
        if (++explored > max_nodes) throw SolverError("static VaR-MV: branch-and-bound node limit reached");
        qp::Result r;
        try {
            r = relaxation(node.fix);
        } catch (const InfeasibleError&) {
            continue;
        }
        double lb = r.objective;
        if (lb >= ub - prune_tol) continue;
        int branch = -1;
        double most = 1e-6;
        for (int i = 0; i < N; ++i) {
            double v = r.x[n + 2 + i];
            double frac = std::min(v, 1.0 - v);
            if (node.fix[i] < 0 && frac > most) {
                most = frac;
                branch = i;
            }
        }
        if (branch < 0) {
            // integral relaxation: evaluate its tail set exactly
            std::vector<int> tail;
            for (int i = 0; i < N; ++i)
                if (r.x[n + 2 + i] > 0.5) tail.push_back(i);
            StaticSolution cand = solve_static_vrmv_given_tail(p, tail);
            if (cand.objective < ub) {
                ub = cand.objective;
                inc = cand;
            }
            continue;
        }
        for (int v : {1, 0}) {
            Node child{lb, next_id++, node.fix};
            child.fix[branch] = v;
            int ones = static_cast<int>(std::count(child.fix.begin(), child.fix.end(), 1));
            if (ones > K) continue;
            open.push(std::move(child));
        }
    }

    // canonical tail: the K lowest scenarios of the incumbent give the same optimum
    StaticSolution out = solve_static_vrmv_given_tail(p, detail::lowest(p.scenarios.wealth(inc.u, inc.u_f), K));
    if (!(out.objective <= inc.objective + 1e-9 * (1.0 + std::abs(inc.objective)))) out = inc;
    out.status = StaticStatus::optimal;
    out.iterations = explored;
    return out;
}

enum class VrmvMode { exact, heuristic };

inline StaticSolution solve_static_vrmv(const StaticProblem& p, double gamma, VrmvMode mode) {
    return mode == VrmvMode::exact ? solve_static_vrmv_exact(p, gamma) : solve_static_vrmv_heuristic(p, gamma);
}

// --- literal QP export -------------------------------------------------------------------

// Sparse text form of a QP: min sum_{(i,j,v) in QUADRATIC} v x_i x_j + sum LINEAR + CONSTANT.
struct LiteralQp {
    struct Var {
        std::string name;
        double lo, hi;
    };
    struct Row {
        char sense;  // 'L' (<=) or 'E' (=)
        double rhs;
    };
    std::vector<Var> vars;
    std::vector<std::tuple<int, int, double>> quadratic;
    std::vector<std::pair<int, double>> linear;
    std::vector<Row> rows;
    std::vector<std::tuple<int, int, double>> matrix;

    double objective(const std::vector<double>& x) const {
        double v = 0.0;
        for (auto [i, j, c] : quadratic) v += c * x[i] * x[j];
        for (auto [i, c] : linear) v += c * x[i];
        return v;
    }

    // largest constraint or bound violation
    double violation(const std::vector<double>& x) const {
        std::vector<double> lhs(rows.size(), 0.0);
        for (auto [r, c, v] : matrix) lhs[r] += v * x[c];
        double worst = 0.0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double d = lhs[r] - rows[r].rhs;
            worst = std::max(worst, rows[r].sense == 'E' ? std::abs(d) : d);
        }
        for (std::size_t i = 0; i < vars.size(); ++i)
            worst = std::max({worst, vars[i].lo - x[i], x[i] - vars[i].hi});
        return worst;
    }
};

// The static SRM-MV program with one y_{i,j} per scenario pair, as printed.
inline LiteralQp literal_srmv_qp(const StaticProblem& p, const std::vector<double>& psi) {
    p.validate();
    const int n = p.n(), N = p.scenarios.N();
    if (static_cast<int>(psi.size()) != N) throw DomainError("literal QP: one weight per scenario required");
    LiteralQp q;
    for (int k = 0; k < n; ++k) q.vars.push_back({"u" + std::to_string(k + 1), -kInf, kInf});
    q.vars.push_back({"u_f", -kInf, kInf});
    const int nu0 = n + 1, y0 = nu0 + N;
    for (int j = 0; j < N; ++j) q.vars.push_back({"nu" + std::to_string(j + 1), -kInf, kInf});
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            q.vars.push_back({"y" + std::to_string(i + 1) + "_" + std::to_string(j + 1), 0.0, kInf});
    auto y = [&](int i, int j) { return y0 + i * N + j; };

    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (p.Q(a, b) != 0.0) q.quadratic.emplace_back(a, b, p.Q(a, b));
    std::map<int, double> lin;
    for (int j = 0; j + 1 < N; ++j) {
        double dpsi = psi[j + 1] - psi[j];
        lin[nu0 + j] += p.omega * dpsi * (j + 1);
        for (int i = 0; i < N; ++i) lin[y(i, j)] -= p.omega * dpsi;
    }
    for (int i = 0; i < N; ++i) {
        for (int k = 0; k < n; ++k) lin[k] -= p.omega * psi[N - 1] * p.scenarios.returns(i, k);
        lin[n] -= p.omega * psi[N - 1] * p.scenarios.r_free;
    }
    for (auto [i, c] : lin)
        if (c != 0.0) q.linear.emplace_back(i, c);

    int row = 0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            // nu_j - R_i'u - R_f u_f - y_ij <= 0
            q.rows.push_back({'L', 0.0});
            q.matrix.emplace_back(row, nu0 + j, 1.0);
            for (int k = 0; k < n; ++k) q.matrix.emplace_back(row, k, -p.scenarios.returns(i, k));
            q.matrix.emplace_back(row, n, -p.scenarios.r_free);
            q.matrix.emplace_back(row, y(i, j), -1.0);
            ++row;
        }
    q.rows.push_back({'E', p.x_d});
    for (int k = 0; k < n; ++k) q.matrix.emplace_back(row, k, p.ER[k]);
    q.matrix.emplace_back(row, n, p.scenarios.r_free);
    ++row;
    q.rows.push_back({'E', p.x0});
    for (int k = 0; k <= n; ++k) q.matrix.emplace_back(row, k, 1.0);
    ++row;
    for (int i = 0; i < N; ++i) {
        q.rows.push_back({'L', 0.0});
        for (int k = 0; k < n; ++k) q.matrix.emplace_back(row, k, -p.scenarios.returns(i, k));
        q.matrix.emplace_back(row, n, -p.scenarios.r_free);
        ++row;
    }
    return q;
}

// Literal big-M MIQP for the static VaR-MV model; z_i variables are flagged binary in their names.
inline LiteralQp literal_vrmv_miqp(const StaticProblem& p, double gamma) {
    p.validate();
    const int n = p.n(), N = p.scenarios.N(), K = tail_capacity(gamma, N);
    const double M = static_big_m(p);
    LiteralQp q;
    for (int k = 0; k < n; ++k) q.vars.push_back({"u" + std::to_string(k + 1), -kInf, kInf});
    q.vars.push_back({"u_f", -kInf, kInf});
    q.vars.push_back({"z_gamma", -kInf, kInf});
    for (int i = 0; i < N; ++i) q.vars.push_back({"bin_z" + std::to_string(i + 1), 0.0, 1.0});
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (p.Q(a, b) != 0.0) q.quadratic.emplace_back(a, b, p.Q(a, b));
    if (p.omega != 0.0) q.linear.emplace_back(n + 1, p.omega);
    int row = 0;
    for (int i = 0; i < N; ++i) {
        q.rows.push_back({'L', 0.0});
        for (int k = 0; k < n; ++k) q.matrix.emplace_back(row, k, -p.scenarios.returns(i, k));
        q.matrix.emplace_back(row, n, -p.scenarios.r_free);
        q.matrix.emplace_back(row, n + 1, -1.0);
        q.matrix.emplace_back(row, n + 2 + i, -M);
        ++row;
    }
    q.rows.push_back({'L', static_cast<double>(K)});
    for (int i = 0; i < N; ++i) q.matrix.emplace_back(row, n + 2 + i, 1.0);
    ++row;
    q.rows.push_back({'E', p.x_d});
    for (int k = 0; k < n; ++k) q.matrix.emplace_back(row, k, p.ER[k]);
    q.matrix.emplace_back(row, n, p.scenarios.r_free);
    ++row;
    q.rows.push_back({'E', p.x0});
    for (int k = 0; k <= n; ++k) q.matrix.emplace_back(row, k, 1.0);
    ++row;
    for (int i = 0; i < N; ++i) {
        q.rows.push_back({'L', 0.0});
        for (int k = 0; k < n; ++k) q.matrix.emplace_back(row, k, -p.scenarios.returns(i, k));
        q.matrix.emplace_back(row, n, -p.scenarios.r_free);
        ++row;
    }
    return q;
}

// Format:
//   VARIABLES <count>            then "<index> <name> <lower> <upper>"
//   QUADRATIC <nnz>              then "<i> <j> <value>"   (objective term value * x_i * x_j)
//   LINEAR <nnz>                 then "<i> <value>"
//   ROWS <count>                 then "<row> <L|E> <rhs>"
//   MATRIX <nnz>                 then "<row> <col> <value>"
//   END
inline void write_literal_qp(std::ostream& os, const LiteralQp& q) {
    os.precision(17);
    auto num = [](double v) {
        if (std::isinf(v)) return std::string(v > 0 ? "inf" : "-inf");
        std::ostringstream s;
        s.precision(17);
        s << v;
        return s.str();
    };
    os << "VARIABLES " << q.vars.size() << '\n';
    for (std::size_t i = 0; i < q.vars.size(); ++i)
        os << i << ' ' << q.vars[i].name << ' ' << num(q.vars[i].lo) << ' ' << num(q.vars[i].hi) << '\n';
    os << "QUADRATIC " << q.quadratic.size() << '\n';
    for (auto [i, j, v] : q.quadratic) os << i << ' ' << j << ' ' << num(v) << '\n';
    os << "LINEAR " << q.linear.size() << '\n';
    for (auto [i, v] : q.linear) os << i << ' ' << num(v) << '\n';
    os << "ROWS " << q.rows.size() << '\n';
    for (std::size_t r = 0; r < q.rows.size(); ++r) os << r << ' ' << q.rows[r].sense << ' ' << num(q.rows[r].rhs) << '\n';
    os << "MATRIX " << q.matrix.size() << '\n';
    for (auto [r, c, v] : q.matrix) os << r << ' ' << c << ' ' << num(v) << '\n';
    os << "END\n";
}

inline LiteralQp read_literal_qp(std::istream& in) {
    LiteralQp q;
    auto expect = [&](const std::string& tag) {
        std::string t;
        std::size_t count = 0;
        if (!(in >> t >> count) || t != tag) throw ConfigError("literal QP: expected section " + tag);
        return count;
    };
    auto number = [&]() {
        std::string s;
        in >> s;
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        try {
            return std::stod(s);
        } catch (const std::exception&) {
            throw ConfigError("literal QP: bad number '" + s + "'");
        }
    };
    std::size_t nv = expect("VARIABLES");
    for (std::size_t k = 0; k < nv; ++k) {
        std::size_t idx;
        LiteralQp::Var v;
        in >> idx >> v.name;
        v.lo = number();
        v.hi = number();
        q.vars.push_back(v);
    }
    std::size_t nq = expect("QUADRATIC");
    for (std::size_t k = 0; k < nq; ++k) {
        int i, j;
        in >> i >> j;
        q.quadratic.emplace_back(i, j, number());
    }
    std::size_t nl = expect("LINEAR");
    for (std::size_t k = 0; k < nl; ++k) {
        int i;
        in >> i;
        q.linear.emplace_back(i, number());
    }
    std::size_t nr = expect("ROWS");
    for (std::size_t k = 0; k < nr; ++k) {
        std::size_t idx;
        char sense;
        in >> idx >> sense;
        q.rows.push_back({sense, number()});
    }
    std::size_t nm = expect("MATRIX");
    for (std::size_t k = 0; k < nm; ++k) {
        int r, c;
        in >> r >> c;
        q.matrix.emplace_back(r, c, number());
    }
    std::string end;
    if (!(in >> end) || end != "END") throw ConfigError("literal QP: missing END");
    return q;
}

}  // namespace hybridmv
