#pragma once

// Bias-free fully-connected forecaster
//   y(x, w) = W^(L) f(W^(L-1) ... f(W^(1) x))
// with a linear output head. Weights are stored as one flat vector,
// layer-major and row-major within a layer; every derivative routine and
// every Hessian index uses this order.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flatnet/errors.hpp"

namespace flatnet {

enum class Activation { tanh, relu, linear };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::linear: return "linear";
    }
    return "unknown";
}

inline Activation parse_activation(std::string_view s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    if (s == "linear") return Activation::linear;
    throw InvalidArgument("unknown activation '" + std::string(s) + "' (expected tanh, relu or linear)");
}

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::tanh: return std::tanh(z);
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::linear: return z;
    }
    return z;
}

/// f'(z) given the pre-activation z and the activation value a = f(z).
inline double activate_derivative(Activation act, double z, double a) {
    switch (act) {
        case Activation::tanh: return 1.0 - a * a;
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::linear: return 1.0;
    }
    return 1.0;
}

/// f(z + dz) - f(z) without cancellation: tanh uses
/// tanh(z + d) - tanh(z) = tanh(d) sech^2(z) / (1 + tanh(z) tanh(d)).
inline double activation_difference(Activation act, double z, double dz) {
    switch (act) {
        case Activation::tanh: {
            const double t = std::tanh(dz), a = std::tanh(z), s = 1.0 / std::cosh(z);
            return t * s * s / (1.0 + a * t);
        }
        case Activation::relu: {
            const double zn = z + dz;
            if (z > 0.0 && zn > 0.0) return dz;
            if (z <= 0.0 && zn <= 0.0) return 0.0;
            return (zn > 0.0 ? zn : 0.0) - (z > 0.0 ? z : 0.0);
        }
        case Activation::linear: return dz;
    }
    return dz;
}

struct Architecture {
    std::size_t input_width = 1;
    std::vector<std::size_t> hidden_widths;
    Activation activation = Activation::tanh;

    static constexpr std::size_t output_width = 1;

    void validate() const {
        if (input_width == 0) throw InvalidArgument("input width must be >= 1");
        for (auto w : hidden_widths)
            if (w == 0) throw InvalidArgument("hidden widths must be >= 1");
    }

    /// Number of weight matrices L.
    std::size_t layer_count() const noexcept { return hidden_widths.size() + 1; }

    /// n_0, n_1, ..., n_L (n_L = 1).
    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w;
        w.reserve(hidden_widths.size() + 2);
        w.push_back(input_width);
        w.insert(w.end(), hidden_widths.begin(), hidden_widths.end());
        w.push_back(output_width);
        return w;
    }

    /// Rows and columns of W^(l+1) for zero-based layer index l.
    std::size_t rows(std::size_t l) const { return l < hidden_widths.size() ? hidden_widths[l] : output_width; }
    std::size_t cols(std::size_t l) const { return l == 0 ? input_width : hidden_widths[l - 1]; }

    std::size_t layer_size(std::size_t l) const { return rows(l) * cols(l); }

    /// Offset of zero-based layer l in the flat weight vector.
    std::size_t layer_offset(std::size_t l) const {
        std::size_t off = 0;
        for (std::size_t k = 0; k < l; ++k) off += layer_size(k);
        return off;
    }

    /// d = sum_l n_l n_{l-1}.
    std::size_t parameter_count() const { return layer_offset(layer_count()); }

    /// Which zero-based layer owns flat coordinate i.
    std::size_t layer_of(std::size_t i) const {
        std::size_t off = 0;
        for (std::size_t l = 0; l < layer_count(); ++l) {
            off += layer_size(l);
            if (i < off) return l;
        }
        throw InvalidArgument("parameter index out of range");
    }

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Read-only view of one weight matrix inside the flat vector.
struct LayerView {
    std::span<const double> data;
    std::size_t rows = 0;
    std::size_t cols = 0;

    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return data.subspan(r * cols, cols); }
};

inline LayerView layer_view(const Architecture& arch, std::span<const double> params, std::size_t l) {
    return {params.subspan(arch.layer_offset(l), arch.layer_size(l)), arch.rows(l), arch.cols(l)};
}

/// Per-layer pre-activations z and activations a of one forward pass.
/// a[0] is the input; z[l], a[l] for l = 1..L; output = z[L].
struct ForwardCache {
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> a;

    double output() const { return z.back()[0]; }
};

/// Forward pass recording every layer into cache. Reuses cache storage.
inline double forward_cached(const Architecture& arch, std::span<const double> params, std::span<const double> x,
                             ForwardCache& cache) {
    const std::size_t L = arch.layer_count();
    cache.z.resize(L + 1);
    cache.a.resize(L + 1);
    cache.a[0].assign(x.begin(), x.end());
    cache.z[0].assign(x.begin(), x.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t rows = arch.rows(l), cols = arch.cols(l);
        const double* w = params.data() + off;
        const auto& in = cache.a[l];
        auto& z = cache.z[l + 1];
        auto& a = cache.a[l + 1];
        z.resize(rows);
        a.resize(rows);
        const bool head = (l + 1 == L);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* wr = w + r * cols;
            double s = 0.0;
            for (std::size_t c = 0; c < cols; ++c) s += wr[c] * in[c];
            z[r] = s;
            a[r] = head ? s : activate(arch.activation, s);
        }
        off += rows * cols;
    }
    return cache.output();
}

inline double forward(const Architecture& arch, std::span<const double> params, std::span<const double> x) {
    ForwardCache cache;
    return forward_cached(arch, params, x, cache);
}

class Network {
public:
    Network(Architecture arch, std::vector<double> params) : arch_(std::move(arch)), params_(std::move(params)) {
        arch_.validate();
        if (params_.size() != arch_.parameter_count())
            throw InvalidArgument("weight vector has " + std::to_string(params_.size()) + " entries, architecture needs " +
                                  std::to_string(arch_.parameter_count()));
        for (double v : params_)
            if (!std::isfinite(v)) throw InvalidArgument("network weights must be finite");
    }

    static Network zeros(Architecture arch) {
        arch.validate();
        const auto d = arch.parameter_count();
        return Network(std::move(arch), std::vector<double>(d, 0.0));
    }

    const Architecture& architecture() const noexcept { return arch_; }
    std::span<const double> params() const noexcept { return params_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }
    std::size_t layer_count() const noexcept { return arch_.layer_count(); }
    LayerView layer(std::size_t l) const { return layer_view(arch_, params_, l); }

    /// Same architecture, new weights.
    Network with_params(std::vector<double> params) const { return Network(arch_, std::move(params)); }

    double forward(std::span<const double> x) const {
        if (x.size() != arch_.input_width)
            throw InvalidArgument("input has length " + std::to_string(x.size()) + ", network expects " +
                                  std::to_string(arch_.input_width));
        return flatnet::forward(arch_, params_, x);
    }

    friend bool operator==(const Network&, const Network&) = default;

private:
    Architecture arch_;
    std::vector<double> params_;
};

/// Standard deviation of the init distribution for zero-based layer l:
/// 1/sqrt(width of the adjacent hidden layer). Hidden matrices use the
/// width they produce, the head uses its fan-in, so uniform-width nets get
/// N(0, 1/N_width) everywhere. Without hidden layers the fan-in is used.
inline double init_stddev(const Architecture& arch, std::size_t l) {
    const std::size_t width = l < arch.hidden_widths.size() ? arch.hidden_widths[l] : arch.cols(l);
    return 1.0 / std::sqrt(static_cast<double>(width));
}

inline Network init(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> params(arch.parameter_count());
    std::size_t off = 0;
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
        const double sd = init_stddev(arch, l);
        for (std::size_t i = 0; i < arch.layer_size(l); ++i) params[off + i] = sd * normal(rng);
        off += arch.layer_size(l);
    }
    return Network(arch, std::move(params));
}

/// W^(l) <- alpha W^(l), W^(l+1) <- W^(l+1) / alpha for zero-based l. The
/// network function is unchanged because relu is positively homogeneous.
inline Network alpha_scale(const Network& net, double alpha, std::size_t l) {
    const auto& arch = net.architecture();
    if (arch.activation != Activation::relu)
        throw ActivationError("alpha scaling needs relu activation, network uses " +
                              std::string(to_string(arch.activation)));
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be a positive finite number");
    if (l + 1 >= arch.layer_count())
        throw InvalidArgument("layer pair (" + std::to_string(l) + ", " + std::to_string(l + 1) +
                              ") does not exist; need a hidden layer between them");
    std::vector<double> p(net.params().begin(), net.params().end());
    const std::size_t a0 = arch.layer_offset(l), a1 = arch.layer_offset(l + 1);
    for (std::size_t i = a0; i < a1; ++i) p[i] *= alpha;
    for (std::size_t i = a1; i < a1 + arch.layer_size(l + 1); ++i) p[i] /= alpha;
    return net.with_params(std::move(p));
}

}  // namespace flatnet
