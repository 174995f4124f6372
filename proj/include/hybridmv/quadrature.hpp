#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "hybridmv/errors.hpp"

namespace hybridmv::quad {

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb, double whole,
                    double tol, int depth, bool& ok) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0) {
        ok = false;
        return left + right + delta / 15.0;
    }
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, ok) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, ok);
}

}  // namespace detail

struct SimpsonOptions {
    double abs_tol = 1e-10;
    int max_depth = 40;
};

// Adaptive Simpson. The interval is pre-split into 8 panels so narrow features are not missed.
template <class F>
double adaptive_simpson(const F& f, double a, double b, SimpsonOptions opt = {}) {
    if (a == b) return 0.0;
    constexpr int panels = 8;
    double h = (b - a) / panels;
    double total = 0.0;
    bool ok = true;
    for (int i = 0; i < panels; ++i) {
        double lo = a + i * h, hi = (i + 1 == panels) ? b : a + (i + 1) * h;
        double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
        double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += detail::simpson_step(f, lo, hi, fa, fm, fb, whole, opt.abs_tol / panels,
                                      opt.max_depth, ok);
    }
    if (!ok) throw NumericError("adaptive Simpson: maximum depth reached");
    if (!std::isfinite(total)) throw NumericError("adaptive Simpson: non-finite integral");
    return total;
}

// Gauss-Legendre nodes and weights on [-1,1], built once per order.
template <int N>
const std::array<std::array<double, 2>, N>& gauss_legendre_rule() {
    static const auto rule = [] {
        std::array<std::array<double, 2>, N> r{};
        for (int i = 0; i < N; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= N; ++k) {
                    double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = pk;
                }
                dp = N * (x * p1 - p0) / (x * x - 1.0);
                double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            r[i] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
        }
        return r;
    }();
    return rule;
}

// Composite Gauss-Legendre with panels no wider than max_width.
template <int Order = 16, class F>
double gauss_legendre(const F& f, double a, double b, double max_width = 0.25) {
    if (!(b > a)) return 0.0;
    const auto& rule = gauss_legendre_rule<Order>();
    int panels = std::max(1, static_cast<int>(std::ceil((b - a) / max_width)));
    double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        double c = a + (p + 0.5) * h;
        double s = 0.0;
        for (const auto& [x, w] : rule) s += w * f(c + 0.5 * h * x);
        total += 0.5 * h * s;
    }
    return total;
}

// Same rule split at interior breakpoints so jumps in f sit on panel edges.
template <int Order = 16, class F>
double gauss_legendre_split(const F& f, double a, double b, std::vector<double> breaks,
                            double max_width = 0.25) {
    if (!(b > a)) return 0.0;
    std::sort(breaks.begin(), breaks.end());
    double total = 0.0, lo = a;
    for (double c : breaks) {
        if (c <= lo || c >= b) continue;
        total += gauss_legendre<Order>(f, lo, c, max_width);
        lo = c;
    }
    return total + gauss_legendre<Order>(f, lo, b, max_width);
}

}  // namespace hybridmv::quad
