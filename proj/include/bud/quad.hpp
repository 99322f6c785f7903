#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <vector>

#include "bud/common.hpp"

namespace bud {

struct GlRule {
    std::vector<double> nodes;    // on (0,1)
    std::vector<double> weights;  // sum to 1
};

// Gauss-Legendre rule on (0,1), n nodes; Newton iteration on P_n.
inline GlRule make_gauss_legendre(int n) {
    GlRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));  // initial guess on [-1,1]
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.nodes[i] = 0.5 * (1.0 - x);
        r.nodes[n - 1 - i] = 0.5 * (1.0 + x);
        double w = 1.0 / ((1.0 - x * x) * pp * pp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    return r;
}

// Shared cache; rules are immutable once built.
inline const GlRule& gauss_legendre(int n) {
    static std::map<int, GlRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
    return it->second;
}

template <class F>
double gl_integrate(const F& f, double lo, double hi, int n) {
    const GlRule& r = gauss_legendre(n);
    double h = hi - lo, acc = 0.0;
    for (int i = 0; i < n; ++i) acc += r.weights[i] * f(lo + h * r.nodes[i]);
    return acc * h;
}

namespace detail {
template <class F>
double adaptive_gl_rec(const F& f, double lo, double hi, double whole, double tol, int depth) {
    double mid = 0.5 * (lo + hi);
    double left = gl_integrate(f, lo, mid, 15);
    double right = gl_integrate(f, mid, hi, 15);
    if (depth > 40 || std::abs(left + right - whole) <= tol) return left + right;
    return adaptive_gl_rec(f, lo, mid, left, 0.5 * tol, depth + 1) +
           adaptive_gl_rec(f, mid, hi, right, 0.5 * tol, depth + 1);
}
}  // namespace detail

// Adaptive Gauss-Legendre on (lo, hi) to absolute tolerance tol.
template <class F>
double adaptive_gl(const F& f, double lo, double hi, double tol) {
    return detail::adaptive_gl_rec(f, lo, hi, gl_integrate(f, lo, hi, 15), tol, 0);
}

// Uniform grid on [0,1] used for density/entropy work.  Composite Simpson
// weights (grid size is made odd so the rule applies cleanly).
struct UnitGrid {
    explicit UnitGrid(int n_points) {
        int n = n_points < 3 ? 3 : n_points;
        if (n % 2 == 0) ++n;
        x.resize(n);
        w.resize(n);
        double h = 1.0 / (n - 1);
        for (int i = 0; i < n; ++i) {
            x[i] = i * h;
            double c = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            w[i] = c * h / 3.0;
        }
    }
    size_t size() const { return x.size(); }
    std::vector<double> x;
    std::vector<double> w;
};

inline double grid_integrate(const UnitGrid& g, const std::vector<double>& f) {
    double acc = 0.0;
    for (size_t i = 0; i < g.size(); ++i) acc += g.w[i] * f[i];
    return acc;
}

}  // namespace bud
