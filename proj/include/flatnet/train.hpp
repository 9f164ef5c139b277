#pragma once

// Plain SGD, w <- w - eta g_S, with the three controls studied here:
// learning rate, batch size and iteration budget, plus optional
// L2-normalized gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "flatnet/data.hpp"
#include "flatnet/diff.hpp"
#include "flatnet/errors.hpp"
#include "flatnet/loss.hpp"
#include "flatnet/metrics.hpp"
#include "flatnet/net.hpp"

namespace flatnet {

inline constexpr std::size_t convergence_window = 100;
inline constexpr double divergence_factor = 1e6;
inline constexpr double min_gradient_norm = 1e-12;

struct TrainConfig {
    double learning_rate = 0.05;
    std::optional<std::size_t> batch_size;  ///< nullopt: full batch
    std::size_t iterations = 1000;
    LossKind loss = LossKind::mse;
    bool normalize_gradient = false;
    std::uint64_t seed = 0;
    std::optional<std::size_t> snapshot_every;
    std::vector<std::size_t> snapshot_at;  ///< extra snapshot iterations
    std::optional<double> convergence_delta;
    bool with_replacement = false;
    MetricToggles snapshot_metrics{true, true, false, false};

    void validate(std::size_t train_size) const {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw InvalidArgument("learning rate must be positive");
        if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
        if (train_size < 1) throw InvalidArgument("training set is empty");
        if (batch_size) {
            if (*batch_size < 1) throw InvalidArgument("batch size must be >= 1");
            if (*batch_size > train_size)
                throw InvalidArgument("batch size " + std::to_string(*batch_size) + " exceeds training set size " +
                                      std::to_string(train_size));
        }
        if (snapshot_every && *snapshot_every < 1) throw InvalidArgument("snapshot interval must be >= 1");
        if (convergence_delta && !(*convergence_delta > 0.0))
            throw InvalidArgument("convergence delta must be positive");
    }
};

/// Curvature metrics recorded during training (training slice).
struct Snapshot {
    std::optional<double> tr_input_hessian;
    double jacobian_frobenius = 0.0;
    std::optional<double> tr_weight_hessian_total;
    std::vector<double> tr_weight_hessian_per_layer;

    friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct TraceRecord {
    std::size_t iteration = 0;  ///< updates applied so far
    double train_loss = 0.0;    ///< full training-set loss at that point
    std::optional<Snapshot> snapshot;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct TrainTrace {
    std::vector<TraceRecord> records;  ///< starts at iteration 0
    Network network;
    bool converged = false;

    const TraceRecord& final_record() const { return records.back(); }
    std::optional<Snapshot> snapshot_at(std::size_t iteration) const {
        for (const auto& r : records)
            if (r.iteration == iteration) return r.snapshot;
        return std::nullopt;
    }
};

inline Snapshot take_snapshot(const Network& net, const DataView& train, LossKind kind, const MetricToggles& m) {
    Snapshot s;
    if (m.input_hessian) s.tr_input_hessian = mean_input_hessian_trace(net, train, kind);
    s.jacobian_frobenius = mean_jacobian_frobenius(net, train);
    if (m.weight_hessian) {
        const auto d = weight_hessian_diag(net, Batch(train), kind);
        s.tr_weight_hessian_total = d.total_trace;
        s.tr_weight_hessian_per_layer = d.layer_traces;
    }
    return s;
}

/// Draws mini-batch index sets: epochs of a shuffled permutation consumed
/// in chunks of M (a tail shorter than M is dropped and the permutation
/// reshuffled), or i.i.d. uniform draws when sampling with replacement.
class BatchSampler {
public:
    BatchSampler(std::size_t n, std::optional<std::size_t> batch, bool with_replacement, std::uint64_t seed)
        : n_(n), m_(batch.value_or(n)), full_(!batch), replace_(with_replacement), rng_(seed), order_(n) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        cursor_ = n_;  // force a shuffle on first use
        current_.resize(m_);
        if (full_) std::iota(current_.begin(), current_.end(), std::size_t{0});
    }

    bool full_batch() const noexcept { return full_; }

    std::span<const std::size_t> next() {
        if (full_) return current_;
        if (replace_) {
            std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
            for (auto& i : current_) i = pick(rng_);
            return current_;
        }
        if (cursor_ + m_ > n_) {
            std::shuffle(order_.begin(), order_.end(), rng_);
            cursor_ = 0;
        }
        std::copy_n(order_.begin() + static_cast<std::ptrdiff_t>(cursor_), m_, current_.begin());
        cursor_ += m_;
        return current_;
    }

private:
    std::size_t n_, m_;
    bool full_, replace_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> current_;
    std::size_t cursor_ = 0;
};

inline TrainTrace sgd_train(const Network& initial, const WindowedDataset& data, const TrainConfig& config) {
    const auto train = data.train();
    config.validate(train.size());
    if (train.width() != initial.architecture().input_width)
        throw InvalidArgument("dataset width does not match the network input");

    const auto& arch = initial.architecture();
    std::vector<double> w(initial.params().begin(), initial.params().end());
    std::vector<double> grad(w.size());
    BatchSampler sampler(train.size(), config.batch_size, config.with_replacement, config.seed);
    const Batch full(train);

    TrainTrace trace{{}, initial, false};
    const bool snapshots = config.snapshot_every || !config.snapshot_at.empty();
    auto snapshot_due = [&](std::size_t t) {
        if (config.snapshot_every && t % *config.snapshot_every == 0) return true;
        if (snapshots && t == config.iterations) return true;
        return std::find(config.snapshot_at.begin(), config.snapshot_at.end(), t) != config.snapshot_at.end();
    };
    auto snapshot_of = [&](std::size_t t) -> std::optional<Snapshot> {
        if (!snapshot_due(t)) return std::nullopt;
        return take_snapshot(Network(arch, w), train, config.loss, config.snapshot_metrics);
    };

    double initial_loss = 0.0;
    auto check_loss = [&](double l, std::size_t t) {
        if (!std::isfinite(l))
            throw DivergenceError("training diverged: non-finite loss at iteration " + std::to_string(t), t);
        if (t > 0 && l > divergence_factor * std::max(initial_loss, relative_floor))
            throw DivergenceError("training diverged: loss " + std::to_string(l) + " at iteration " +
                                      std::to_string(t) + " exceeds 1e6 x initial loss " +
                                      std::to_string(initial_loss),
                                  t);
    };

    std::size_t t = 0;
    for (; t < config.iterations; ++t) {
        const auto idx = sampler.next();
        double current;
        if (sampler.full_batch()) {
            current = loss_and_gradient(arch, w, full, config.loss, grad);
        } else {
            current = batch_loss(arch, w, full, config.loss);
            loss_and_gradient(arch, w, Batch(train, idx), config.loss, grad);
        }
        if (t == 0) initial_loss = current;
        check_loss(current, t);
        trace.records.push_back({t, current, snapshot_of(t)});

        if (config.convergence_delta && t >= convergence_window &&
            std::abs(current - trace.records[t - convergence_window].train_loss) < *config.convergence_delta) {
            trace.converged = true;
            break;
        }

        double step = config.learning_rate;
        if (config.normalize_gradient) {
            const double g = norm2(grad);
            if (g >= min_gradient_norm) step /= g;
        }
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * grad[i];
    }
    if (!trace.converged) {
        const double final_loss = batch_loss(arch, w, full, config.loss);
        check_loss(final_loss, t);
        trace.records.push_back({t, final_loss, snapshot_of(t)});
    } else if (snapshots && !trace.records.back().snapshot) {
        trace.records.back().snapshot = take_snapshot(Network(arch, w), train, config.loss, config.snapshot_metrics);
    }
    trace.network = Network(arch, std::move(w));
    return trace;
}

struct GradNoise {
    double trace_k = 0.0;       ///< (1/(N-1)) sum_i ||g_i - g||^2
    double per_m_scaled = 0.0;  ///< trace_k / M
};

/// Trace of the per-sample gradient covariance on the training slice.
inline GradNoise grad_noise_trace(const Network& net, const WindowedDataset& data, std::size_t batch_size,
                                  LossKind kind = LossKind::mse) {
    const auto train = data.train();
    const std::size_t n = train.size();
    if (n < 2) throw InvalidArgument("gradient noise needs at least 2 training pairs");
    if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
    const auto& arch = net.architecture();
    const std::size_t d = net.parameter_count();
    std::vector<std::vector<double>> per(n, std::vector<double>(d));
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t one[] = {i};
        loss_and_gradient(arch, net.params(), Batch(train, one), kind, per[i]);
        for (std::size_t k = 0; k < d; ++k) mean[k] += per[i][k];
    }
    for (auto& v : mean) v /= static_cast<double>(n);
    double s = 0.0;
    for (const auto& g : per)
        for (std::size_t k = 0; k < d; ++k) s += (g[k] - mean[k]) * (g[k] - mean[k]);
    GradNoise out;
    out.trace_k = s / static_cast<double>(n - 1);
    out.per_m_scaled = out.trace_k / static_cast<double>(batch_size);
    return out;
}

}  // namespace flatnet
