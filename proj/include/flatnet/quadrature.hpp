#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <vector>

#include "flatnet/errors.hpp"

namespace flatnet {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;  ///< sum of per-interval |K15 - G7| estimates
    std::size_t intervals = 0;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes on [-1, 1] (nonnegative half) and weights.
inline constexpr std::array<double, 8> gk15_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> k15_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> g7_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(const F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double fc = f(c);
    double k = k15_weights[7] * fc;
    double g = g7_weights[3] * fc;
    for (std::size_t i = 0; i < 7; ++i) {
        const double dx = h * gk15_nodes[i];
        const double s = f(c - dx) + f(c + dx);
        k += k15_weights[i] * s;
        if (i % 2 == 1) g += g7_weights[i / 2] * s;
    }
    return {a, b, k * h, std::abs((k - g) * h)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod: bisects the panel with the largest error
/// estimate until the total estimate is below abs_tol. Panels narrower than
/// min_width are never split. `breaks` are interior points where the
/// integrand may be singular; they become panel edges and are never sampled.
template <class F>
QuadratureResult integrate_adaptive(const F& f, double a, double b, double abs_tol = 1e-8,
                                    std::span<const double> breaks = {}, double min_width = 1e-12,
                                    std::size_t max_panels = 200000) {
    if (!(b > a)) throw InvalidArgument("integration interval must satisfy a < b");
    if (!(abs_tol > 0.0)) throw InvalidArgument("quadrature tolerance must be positive");
    std::vector<double> edges{a};
    for (double p : breaks)
        if (p > a && p < b) edges.push_back(p);
    edges.push_back(b);

    std::priority_queue<detail::Panel> heap;
    std::vector<detail::Panel> settled;
    double value = 0.0, error = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        if (!(edges[i + 1] > edges[i])) continue;
        auto p = detail::gk15(f, edges[i], edges[i + 1]);
        value += p.value;
        error += p.error;
        heap.push(p);
    }
    std::size_t panels = heap.size();
    while (error > abs_tol && !heap.empty() && panels < max_panels) {
        const auto worst = heap.top();
        heap.pop();
        if (worst.b - worst.a < min_width) {
            settled.push_back(worst);
            continue;
        }
        const double mid = 0.5 * (worst.a + worst.b);
        const auto left = detail::gk15(f, worst.a, mid);
        const auto right = detail::gk15(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++panels;
    }
    // Re-sum from the panels to shed the drift of incremental updates.
    double v = 0.0, e = 0.0;
    std::size_t count = settled.size() + heap.size();
    for (const auto& p : settled) {
        v += p.value;
        e += p.error;
    }
    while (!heap.empty()) {
        v += heap.top().value;
        e += heap.top().error;
        heap.pop();
    }
    return {v, e, count};
}

}  // namespace flatnet
