#pragma once

// Generalization metrics of a trained forecaster: losses, input-space
// curvature and sensitivity, weight-space curvature, the scale-invariant
// quadratic form w^T H^w w, hit rate, and input-noise probes.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "flatnet/data.hpp"
#include "flatnet/diff.hpp"
#include "flatnet/errors.hpp"
#include "flatnet/loss.hpp"
#include "flatnet/net.hpp"

namespace flatnet {

/// Floor of every relative comparison against a possibly tiny reference.
inline constexpr double relative_floor = 1e-12;

inline double loss(const Network& net, const DataView& slice, LossKind kind) {
    if (slice.empty()) throw InvalidArgument("loss over an empty slice");
    return batch_loss(net.architecture(), net.params(), Batch(slice), kind);
}

/// (1/N) sum_i Tr(H^x) at each sample of the slice.
inline double mean_input_hessian_trace(const Network& net, const DataView& slice, LossKind kind,
                                       std::size_t cap = default_input_hessian_cap) {
    if (slice.empty()) throw InvalidArgument("input Hessian trace over an empty slice");
    double s = 0.0;
    for (std::size_t i = 0; i < slice.size(); ++i) s += input_hessian(net, slice.x(i), slice.y(i), kind, cap).trace();
    return s / static_cast<double>(slice.size());
}

/// (1/N) sum_i ||J^{x_i}||_F.
inline double mean_jacobian_frobenius(const Network& net, const DataView& slice) {
    if (slice.empty()) throw InvalidArgument("Jacobian norm over an empty slice");
    double s = 0.0;
    for (std::size_t i = 0; i < slice.size(); ++i) s += norm2(input_jacobian(net, slice.x(i)));
    return s / static_cast<double>(slice.size());
}

/// w^T H^w w through a single Hessian-vector product. Zero weights give 0.
inline double scaled_quadform(const Network& net, const Batch& batch, LossKind kind) {
    if (batch.empty()) throw InvalidArgument("scaled quadratic form over an empty batch");
    const auto w = net.params();
    if (!(norm2(w) > 0.0)) return 0.0;
    const auto hw = hvp_weights(net, batch, kind, w);
    return dot(w, hw);
}

/// Fraction of pairs where sign(yhat) == sign(y), sign(0) = +1.
inline double hit_rate(const Network& net, const DataView& slice) {
    if (slice.empty()) throw InvalidArgument("hit rate over an empty slice");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < slice.size(); ++i) {
        const bool up_pred = net.forward(slice.x(i)) >= 0.0;
        const bool up_true = slice.y(i) >= 0.0;
        if (up_pred == up_true) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(slice.size());
}

/// Population standard deviation over every input entry of the slice; the
/// natural unit for a relative noise amplitude.
inline double input_std(const DataView& slice) {
    if (slice.empty()) throw InvalidArgument("input spread of an empty slice");
    const auto xs = slice.inputs();
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

struct NoiseProbe {
    double delta_hat = 0.0;         ///< Monte-Carlo E[L(x + a eps) - L(x)]
    double trace_prediction = 0.0;  ///< (a^2 / 2) E_x[Tr H^x]
    double relative_gap = 0.0;
    double amplitude = 0.0;
    std::size_t draws = 0;
};

/// Compares the Monte-Carlo loss increase under isotropic input noise of
/// amplitude `alpha` with its second-order prediction (alpha^2/2) Tr(H^x).
/// Each draw evaluates the pair +eps, -eps (both N(0, I)); the odd Taylor
/// terms cancel inside the pair so the first-order noise does not swamp the
/// curvature signal.
inline NoiseProbe noise_robustness_probe(const Network& net, const DataView& slice, LossKind kind, double alpha,
                                         std::size_t draws, std::uint64_t seed) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("noise amplitude must be positive");
    if (draws == 0) throw InvalidArgument("noise probe needs at least one draw");
    if (slice.empty()) throw InvalidArgument("noise probe over an empty slice");
    const auto& arch = net.architecture();
    const std::size_t n0 = slice.width();
    if (n0 != arch.input_width) throw InvalidArgument("slice width does not match the network input");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> base(slice.size());
    ForwardCache cache;
    for (std::size_t i = 0; i < slice.size(); ++i)
        base[i] = pointwise_loss(kind, forward_cached(arch, net.params(), slice.x(i), cache), slice.y(i));

    std::vector<double> eps(n0), xp(n0), xm(n0);
    double acc = 0.0;
    for (std::size_t r = 0; r < draws; ++r)
        for (std::size_t i = 0; i < slice.size(); ++i) {
            const auto x = slice.x(i);
            for (std::size_t j = 0; j < n0; ++j) {
                eps[j] = normal(rng);
                xp[j] = x[j] + alpha * eps[j];
                xm[j] = x[j] - alpha * eps[j];
            }
            const double lp = pointwise_loss(kind, forward_cached(arch, net.params(), xp, cache), slice.y(i));
            const double lm = pointwise_loss(kind, forward_cached(arch, net.params(), xm, cache), slice.y(i));
            acc += 0.5 * ((lp - base[i]) + (lm - base[i]));
        }

    NoiseProbe p;
    p.amplitude = alpha;
    p.draws = draws;
    p.delta_hat = acc / (static_cast<double>(draws) * static_cast<double>(slice.size()));
    p.trace_prediction = 0.5 * alpha * alpha * mean_input_hessian_trace(net, slice, kind);
    p.relative_gap = std::abs(p.delta_hat - p.trace_prediction) / std::max(std::abs(p.trace_prediction), relative_floor);
    return p;
}

/// Same machinery as the noise probe with sigma in the role of the noise
/// amplitude: the expected jittered-cost excess against its curvature term.
inline NoiseProbe jitter_regularizer_check(const Network& net, const DataView& slice, LossKind kind, double sigma,
                                           std::size_t draws, std::uint64_t seed) {
    return noise_robustness_probe(net, slice, kind, sigma, draws, seed);
}

struct MetricToggles {
    bool input_hessian = true;
    bool weight_hessian = true;
    bool scaled_quadform = true;
    bool hit_rate = false;
};

/// One evaluated run. Curvature metrics are taken on the training slice,
/// test loss and hit rate on the test slice.
struct MetricsReport {
    std::uint64_t seed = 0;
    double learning_rate = 0.0;
    std::size_t batch_size = 0;  ///< 0 means full batch
    std::size_t iterations = 0;

    double train_loss = 0.0;
    double test_loss = 0.0;
    double gap = 0.0;
    std::optional<double> tr_input_hessian;
    double jacobian_frobenius = 0.0;
    std::optional<double> tr_weight_hessian_total;
    std::vector<std::optional<double>> tr_weight_hessian_per_layer;
    std::optional<double> scaled_quadform;
    std::optional<double> hit_rate;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline void require_finite(const MetricsReport& r) {
    auto check = [](double v, const char* name) {
        if (!std::isfinite(v)) throw Error(std::string("metric '") + name + "' is not finite");
    };
    auto check_opt = [&](const std::optional<double>& v, const char* name) {
        if (v) check(*v, name);
    };
    check(r.train_loss, "train_loss");
    check(r.test_loss, "test_loss");
    check(r.gap, "gap");
    check_opt(r.tr_input_hessian, "tr_hx");
    check(r.jacobian_frobenius, "jac_fro");
    check_opt(r.tr_weight_hessian_total, "tr_hw_total");
    for (const auto& v : r.tr_weight_hessian_per_layer) check_opt(v, "tr_hw_layer");
    check_opt(r.scaled_quadform, "scaled_quadform");
    check_opt(r.hit_rate, "hit_rate");
}

inline MetricsReport evaluate(const Network& net, const WindowedDataset& data, LossKind kind,
                              const MetricToggles& toggles = {}) {
    const auto train = data.train();
    const auto test = data.test();
    MetricsReport r;
    r.train_loss = loss(net, train, kind);
    r.test_loss = loss(net, test, kind);
    r.gap = r.test_loss - r.train_loss;
    if (toggles.input_hessian) r.tr_input_hessian = mean_input_hessian_trace(net, train, kind);
    r.jacobian_frobenius = mean_jacobian_frobenius(net, train);
    r.tr_weight_hessian_per_layer.assign(net.layer_count(), std::nullopt);
    if (toggles.weight_hessian) {
        const auto diag = weight_hessian_diag(net, Batch(train), kind);
        r.tr_weight_hessian_total = diag.total_trace;
        for (std::size_t l = 0; l < net.layer_count(); ++l) r.tr_weight_hessian_per_layer[l] = diag.layer_traces[l];
    }
    if (toggles.scaled_quadform) r.scaled_quadform = scaled_quadform(net, Batch(train), kind);
    if (toggles.hit_rate) r.hit_rate = flatnet::hit_rate(net, test);
    require_finite(r);
    return r;
}

}  // namespace flatnet
