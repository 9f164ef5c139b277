#pragma once

// Small fixtures shared by the test binaries.

#include <cmath>
#include <random>
#include <vector>

#include "flatnet/data.hpp"
#include "flatnet/loss.hpp"
#include "flatnet/net.hpp"
#include "oracles.hpp"

namespace support {

/// Owns the storage behind a DataView.
struct Pairs {
    std::vector<double> inputs;
    std::vector<double> targets;
    std::size_t width = 0;

    flatnet::DataView view() const { return flatnet::DataView(inputs, targets, width); }
    std::vector<oracle::Sample> samples() const {
        std::vector<oracle::Sample> s;
        for (std::size_t i = 0; i < targets.size(); ++i)
            s.push_back({std::vector<double>(inputs.begin() + i * width, inputs.begin() + (i + 1) * width), targets[i]});
        return s;
    }
};

/// Wraps pairs as a dataset whose first `split` pairs are the training slice.
inline flatnet::WindowedDataset dataset(const Pairs& p, std::size_t split) {
    return flatnet::WindowedDataset(p.inputs, p.targets, p.width, p.width, split, {}, {}, false);
}

inline Pairs random_pairs(std::size_t width, std::size_t count, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Pairs p{{}, {}, width};
    for (std::size_t i = 0; i < count * width; ++i) p.inputs.push_back(n(rng));
    for (std::size_t i = 0; i < count; ++i) p.targets.push_back(n(rng));
    return p;
}

/// True when every relu pre-activation and every mae residual is at least
/// `margin` away from its kink, so finite differences with much smaller
/// steps see a smooth function.
inline bool away_from_kinks(const flatnet::Network& net, const Pairs& p, flatnet::LossKind kind, double margin) {
    const auto& arch = net.architecture();
    flatnet::ForwardCache cache;
    const auto v = p.view();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double yhat = flatnet::forward_cached(arch, net.params(), v.x(i), cache);
        if (kind == flatnet::LossKind::mae && std::abs(yhat - v.y(i)) < margin) return false;
        if (arch.activation == flatnet::Activation::relu)
            for (std::size_t l = 1; l + 1 < cache.z.size(); ++l)
                for (double z : cache.z[l])
                    if (std::abs(z) < margin) return false;
    }
    return true;
}

inline flatnet::Network random_network(const flatnet::Architecture& arch, std::uint64_t seed, double scale = 0.7) {
    return flatnet::Network(arch, oracle::random_weights(arch.parameter_count(), seed, scale));
}

inline std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace support
