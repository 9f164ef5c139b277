#pragma once

// First derivatives by reverse mode, second derivatives by finite
// differences: central differences of the analytic gradient for Hessian
// columns and Hessian-vector products, second differences of the loss for
// weight-Hessian diagonals.

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "flatnet/errors.hpp"
#include "flatnet/loss.hpp"
#include "flatnet/matrix.hpp"
#include "flatnet/net.hpp"

namespace flatnet {

inline constexpr std::size_t default_input_hessian_cap = 64;
inline constexpr std::size_t default_weight_hessian_cap = 2000;

/// cbrt(machine epsilon), the base step of every Hessian difference.
inline double hessian_step_base() { return std::cbrt(std::numeric_limits<double>::epsilon()); }

/// Weight gradient in the flat layout of the network it came from.
struct GradW {
    Architecture architecture;
    std::vector<double> values;

    LayerView layer(std::size_t l) const { return layer_view(architecture, values, l); }
};

namespace detail {

/// Propagates d loss / d yhat back through a recorded forward pass.
/// Adds scale * dL/dW into grad (if non-empty) and writes dL/dx into
/// input_grad (if non-empty). delta is scratch storage.
inline void backprop(const Architecture& arch, std::span<const double> params, const ForwardCache& cache,
                     double dloss, double scale, std::span<double> grad, std::span<double> input_grad,
                     std::vector<double>& delta, std::vector<double>& next) {
    const std::size_t L = arch.layer_count();
    delta.assign(1, dloss);
    for (std::size_t l = L; l-- > 0;) {
        const std::size_t rows = arch.rows(l), cols = arch.cols(l);
        const std::size_t off = arch.layer_offset(l);
        const double* w = params.data() + off;
        const auto& in = cache.a[l];
        if (!grad.empty()) {
            double* g = grad.data() + off;
            for (std::size_t r = 0; r < rows; ++r) {
                const double d = scale * delta[r];
                if (d == 0.0) continue;
                double* gr = g + r * cols;
                for (std::size_t c = 0; c < cols; ++c) gr[c] += d * in[c];
            }
        }
        if (l == 0 && input_grad.empty()) break;
        next.assign(cols, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double d = delta[r];
            if (d == 0.0) continue;
            const double* wr = w + r * cols;
            for (std::size_t c = 0; c < cols; ++c) next[c] += wr[c] * d;
        }
        if (l == 0) {
            for (std::size_t c = 0; c < cols; ++c) input_grad[c] = next[c];
            break;
        }
        const auto& z = cache.z[l];
        const auto& a = cache.a[l];
        for (std::size_t c = 0; c < cols; ++c) next[c] *= activate_derivative(arch.activation, z[c], a[c]);
        delta.swap(next);
    }
}

inline void check_input(const Architecture& arch, std::span<const double> x) {
    if (x.size() != arch.input_width)
        throw InvalidArgument("input has length " + std::to_string(x.size()) + ", network expects " +
                              std::to_string(arch.input_width));
}

}  // namespace detail

/// Batch-mean loss for raw (architecture, weights).
inline double batch_loss(const Architecture& arch, std::span<const double> params, const Batch& batch,
                         LossKind kind) {
    if (batch.empty()) throw InvalidArgument("loss over an empty batch");
    ForwardCache cache;
    double s = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k)
        s += pointwise_loss(kind, forward_cached(arch, params, batch.x(k), cache), batch.y(k));
    return s / static_cast<double>(batch.size());
}

/// Writes the batch-mean weight gradient into grad and returns the batch-mean loss.
inline double loss_and_gradient(const Architecture& arch, std::span<const double> params, const Batch& batch,
                                LossKind kind, std::span<double> grad) {
    if (batch.empty()) throw InvalidArgument("gradient over an empty batch");
    std::fill(grad.begin(), grad.end(), 0.0);
    ForwardCache cache;
    std::vector<double> delta, next;
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const double yhat = forward_cached(arch, params, batch.x(k), cache);
        loss += pointwise_loss(kind, yhat, batch.y(k));
        detail::backprop(arch, params, cache, pointwise_loss_derivative(kind, yhat, batch.y(k)), scale, grad, {},
                         delta, next);
    }
    return loss * scale;
}

inline GradW grad_weights(const Network& net, const Batch& batch, LossKind kind) {
    GradW g{net.architecture(), std::vector<double>(net.parameter_count())};
    loss_and_gradient(net.architecture(), net.params(), batch, kind, g.values);
    return g;
}

/// d loss(x, w, y) / dx at one sample.
inline std::vector<double> grad_input(const Network& net, std::span<const double> x, double y, LossKind kind) {
    const auto& arch = net.architecture();
    detail::check_input(arch, x);
    ForwardCache cache;
    std::vector<double> delta, next, out(arch.input_width);
    const double yhat = forward_cached(arch, net.params(), x, cache);
    detail::backprop(arch, net.params(), cache, pointwise_loss_derivative(kind, yhat, y), 1.0, {}, out, delta, next);
    return out;
}

/// d yhat / dx: the input Jacobian of the scalar output.
inline std::vector<double> input_jacobian(const Network& net, std::span<const double> x) {
    const auto& arch = net.architecture();
    detail::check_input(arch, x);
    ForwardCache cache;
    std::vector<double> delta, next, out(arch.input_width);
    forward_cached(arch, net.params(), x, cache);
    detail::backprop(arch, net.params(), cache, 1.0, 1.0, {}, out, delta, next);
    return out;
}

/// Symmetrized Hessian plus the max |H - H^T| measured before symmetrization.
struct SymmetricHessian {
    Matrix matrix;
    double asymmetry = 0.0;

    double trace() const { return matrix.trace(); }
};

using InputHessian = SymmetricHessian;

/// Input Hessian of the loss at one sample: central differences of
/// grad_input columns with step cbrt(eps) (1 + |x_j|), then (H + H^T) / 2.
inline InputHessian input_hessian(const Network& net, std::span<const double> x, double y, LossKind kind,
                                  std::size_t cap = default_input_hessian_cap) {
    const auto& arch = net.architecture();
    detail::check_input(arch, x);
    const std::size_t n = arch.input_width;
    if (n > cap)
        throw CapacityError("input Hessian of width " + std::to_string(n) + " exceeds cap " + std::to_string(cap));
    Matrix h(n, n);
    std::vector<double> xp(x.begin(), x.end());
    for (std::size_t j = 0; j < n; ++j) {
        const double step = hessian_step_base() * (1.0 + std::abs(x[j]));
        xp[j] = x[j] + step;
        const auto gp = grad_input(net, xp, y, kind);
        xp[j] = x[j] - step;
        const auto gm = grad_input(net, xp, y, kind);
        xp[j] = x[j];
        for (std::size_t i = 0; i < n; ++i) h(i, j) = (gp[i] - gm[i]) / (2.0 * step);
    }
    InputHessian out{std::move(h), 0.0};
    out.asymmetry = out.matrix.asymmetry();
    out.matrix.symmetrize();
    return out;
}

/// H^w v by central differences of the analytic gradient along v with
/// step cbrt(eps) (1 + ||w||) / ||v||.
inline std::vector<double> hvp_weights(const Network& net, const Batch& batch, LossKind kind,
                                       std::span<const double> v) {
    const auto& arch = net.architecture();
    const std::size_t d = net.parameter_count();
    if (v.size() != d)
        throw InvalidArgument("direction has length " + std::to_string(v.size()) + ", network has " +
                              std::to_string(d) + " weights");
    const double vnorm = norm2(v);
    if (!(vnorm > 0.0)) throw InvalidArgument("Hessian-vector product needs a nonzero direction");
    const auto w = net.params();
    const double step = hessian_step_base() * (1.0 + norm2(w)) / vnorm;
    std::vector<double> wp(d), wm(d), gp(d), gm(d);
    for (std::size_t i = 0; i < d; ++i) {
        wp[i] = w[i] + step * v[i];
        wm[i] = w[i] - step * v[i];
    }
    loss_and_gradient(arch, wp, batch, kind, gp);
    loss_and_gradient(arch, wm, batch, kind, gm);
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = (gp[i] - gm[i]) / (2.0 * step);
    return out;
}

/// Full weight Hessian built column by column from gradient differences.
inline SymmetricHessian full_weight_hessian(const Network& net, const Batch& batch, LossKind kind,
                                            std::size_t cap = default_weight_hessian_cap) {
    const auto& arch = net.architecture();
    const std::size_t d = net.parameter_count();
    if (d > cap)
        throw CapacityError("weight Hessian with d = " + std::to_string(d) + " exceeds materialization cap " +
                            std::to_string(cap) + "; use weight_hessian_diag or hvp_weights instead");
    if (batch.empty()) throw InvalidArgument("Hessian over an empty batch");
    Matrix h(d, d);
    const auto w = net.params();
    std::vector<double> wp(w.begin(), w.end()), gp(d), gm(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double step = hessian_step_base() * (1.0 + std::abs(w[j]));
        wp[j] = w[j] + step;
        loss_and_gradient(arch, wp, batch, kind, gp);
        wp[j] = w[j] - step;
        loss_and_gradient(arch, wp, batch, kind, gm);
        wp[j] = w[j];
        for (std::size_t i = 0; i < d; ++i) h(i, j) = (gp[i] - gm[i]) / (2.0 * step);
    }
    SymmetricHessian out{std::move(h), 0.0};
    out.asymmetry = out.matrix.asymmetry();
    out.matrix.symmetrize();
    return out;
}

/// Weight-Hessian diagonal, grouped per layer.
struct WeightHessianDiag {
    std::vector<std::vector<double>> layer_diagonals;  ///< empty for filtered-out layers
    std::vector<double> layer_traces;                  ///< 0 for filtered-out layers
    double total_trace = 0.0;
};

namespace detail {

/// Change of the output when delta is added to pre-activation z[l+1][row],
/// everything else as recorded in cache. Only differences are propagated
/// (layers before l+1 are not touched), so the result keeps its relative
/// precision however small delta is.
inline double perturbed_output(const Architecture& arch, std::span<const double> params, const ForwardCache& cache,
                               std::size_t l, std::size_t row, double delta, std::vector<double>& cur,
                               std::vector<double>& nxt) {
    const std::size_t L = arch.layer_count();
    if (l + 1 == L) return delta;

    const double da = activation_difference(arch.activation, cache.z[l + 1][row], delta);
    // Layer l+1 pre-activations shift along column `row` of W^(l+2).
    {
        const std::size_t rows = arch.rows(l + 1), cols = arch.cols(l + 1);
        const double* w = params.data() + arch.layer_offset(l + 1);
        cur.resize(rows);
        for (std::size_t r = 0; r < rows; ++r) cur[r] = w[r * cols + row] * da;
    }
    for (std::size_t k = l + 2; k < L; ++k) {
        const auto& z = cache.z[k];
        for (std::size_t r = 0; r < cur.size(); ++r) cur[r] = activation_difference(arch.activation, z[r], cur[r]);
        const std::size_t rows = arch.rows(k), cols = arch.cols(k);
        const double* w = params.data() + arch.layer_offset(k);
        nxt.assign(rows, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < cols; ++c) s += w[r * cols + c] * cur[c];
            nxt[r] = s;
        }
        cur.swap(nxt);
    }
    return cur[0];
}

}  // namespace detail

/// h_ii ~ (L(w + h e_i) - 2 L(w) + L(w - h e_i)) / h^2 with h = cbrt(eps)(1 + |w_i|),
/// L the batch-mean loss. `layers` selects zero-based layers; empty means all.
inline WeightHessianDiag weight_hessian_diag(const Network& net, const Batch& batch, LossKind kind,
                                             std::span<const std::size_t> layers = {}) {
    if (batch.empty()) throw InvalidArgument("Hessian diagonal over an empty batch");
    const auto& arch = net.architecture();
    const auto w = net.params();
    const std::size_t L = arch.layer_count();
    std::vector<bool> wanted(L, layers.empty());
    for (auto l : layers) {
        if (l >= L) throw InvalidArgument("layer filter index " + std::to_string(l) + " out of range");
        wanted[l] = true;
    }

    const std::size_t n = batch.size();
    std::vector<ForwardCache> caches(n);
    for (std::size_t k = 0; k < n; ++k) forward_cached(arch, w, batch.x(k), caches[k]);

    WeightHessianDiag out;
    out.layer_diagonals.resize(L);
    out.layer_traces.assign(L, 0.0);
    std::vector<double> cur, nxt;
    for (std::size_t l = 0; l < L; ++l) {
        if (!wanted[l]) continue;
        const std::size_t rows = arch.rows(l), cols = arch.cols(l), off = arch.layer_offset(l);
        auto& diag = out.layer_diagonals[l];
        diag.resize(rows * cols);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                const double step = hessian_step_base() * (1.0 + std::abs(w[off + r * cols + c]));
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double in = caches[k].a[l][c];
                    if (in == 0.0) continue;
                    const double yhat = caches[k].output();
                    const double up = detail::perturbed_output(arch, w, caches[k], l, r, step * in, cur, nxt);
                    const double dn = detail::perturbed_output(arch, w, caches[k], l, r, -step * in, cur, nxt);
                    acc += pointwise_loss_difference(kind, yhat, batch.y(k), up) +
                           pointwise_loss_difference(kind, yhat, batch.y(k), dn);
                }
                const double h = acc / static_cast<double>(n) / (step * step);
                diag[r * cols + c] = h;
                out.layer_traces[l] += h;
            }
        out.total_trace += out.layer_traces[l];
    }
    return out;
}

}  // namespace flatnet
