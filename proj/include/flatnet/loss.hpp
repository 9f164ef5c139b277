#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>

#include "flatnet/data.hpp"
#include "flatnet/errors.hpp"

namespace flatnet {

enum class LossKind { mse, mae };

inline std::string_view to_string(LossKind k) { return k == LossKind::mse ? "mse" : "mae"; }

inline LossKind parse_loss(std::string_view s) {
    if (s == "mse") return LossKind::mse;
    if (s == "mae") return LossKind::mae;
    throw InvalidArgument("unknown loss '" + std::string(s) + "' (expected mse or mae)");
}

inline double pointwise_loss(LossKind k, double yhat, double y) {
    const double e = yhat - y;
    return k == LossKind::mse ? e * e : std::abs(e);
}

/// d loss / d yhat. The mae kink at yhat == y gets derivative 0.
inline double pointwise_loss_derivative(LossKind k, double yhat, double y) {
    const double e = yhat - y;
    if (k == LossKind::mse) return 2.0 * e;
    return e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
}

/// loss(yhat + delta, y) - loss(yhat, y), formed algebraically so a tiny
/// delta keeps its relative precision.
inline double pointwise_loss_difference(LossKind k, double yhat, double y, double delta) {
    const double e = yhat - y;
    if (k == LossKind::mse) return delta * (2.0 * e + delta);
    const double en = e + delta;
    if (e > 0.0 && en > 0.0) return delta;
    if (e < 0.0 && en < 0.0) return -delta;
    return std::abs(en) - std::abs(e);
}

/// A set of training pairs: a data view, optionally restricted to indices.
class Batch {
public:
    Batch(DataView view) : view_(view) {}  // NOLINT: implicit on purpose, a view is a full batch
    Batch(DataView view, std::span<const std::size_t> indices) : view_(view), indices_(indices) {
        for (auto i : indices_)
            if (i >= view_.size()) throw InvalidArgument("batch index out of range");
    }

    std::size_t size() const noexcept { return indices_.empty() ? view_.size() : indices_.size(); }
    bool empty() const noexcept { return size() == 0; }
    std::size_t width() const noexcept { return view_.width(); }
    std::span<const double> x(std::size_t k) const { return view_.x(index(k)); }
    double y(std::size_t k) const { return view_.y(index(k)); }

private:
    std::size_t index(std::size_t k) const { return indices_.empty() ? k : indices_[k]; }

    DataView view_;
    std::span<const std::size_t> indices_;
};

}  // namespace flatnet
