#pragma once

// Series generation, CSV ingestion, returns and windowing into supervised
// one-step-ahead forecasting pairs.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flatnet/errors.hpp"

namespace flatnet {

enum class SeriesOrigin { gaussian_noise, noisy_sine, csv, derived };

inline std::string_view to_string(SeriesOrigin o) {
    switch (o) {
        case SeriesOrigin::gaussian_noise: return "gaussian-noise";
        case SeriesOrigin::noisy_sine: return "noisy-sine";
        case SeriesOrigin::csv: return "csv";
        case SeriesOrigin::derived: return "derived";
    }
    return "unknown";
}

/// Raw univariate time sequence. Length >= 2, all values finite.
class Series {
public:
    Series(std::vector<double> values, std::string name, SeriesOrigin origin)
        : values_(std::move(values)), name_(std::move(name)), origin_(origin) {
        if (values_.size() < 2) throw InvalidArgument("series '" + name_ + "' needs at least 2 values");
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (!std::isfinite(values_[i]))
                throw InvalidArgument("series '" + name_ + "' has non-finite value at index " +
                                      std::to_string(i));
    }

    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::string& name() const noexcept { return name_; }
    SeriesOrigin origin() const noexcept { return origin_; }

private:
    std::vector<double> values_;
    std::string name_;
    SeriesOrigin origin_;
};

inline Series gen_gaussian_noise(std::size_t count, std::uint64_t seed) {
    if (count < 2) throw InvalidArgument("gaussian noise series needs count >= 2");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(count);
    for (auto& x : v) x = normal(rng);
    return Series(std::move(v), "gaussian-noise", SeriesOrigin::gaussian_noise);
}

/// y_i = sin(0.1 i) + c * eps_i for i = 0..count-1.
inline Series gen_noisy_sine(std::size_t count, double c, std::uint64_t seed) {
    if (count < 2) throw InvalidArgument("noisy sine series needs count >= 2");
    if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidArgument("noise amplitude c must be >= 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double eps = normal(rng);
        v[i] = std::sin(0.1 * static_cast<double>(i)) + c * eps;
    }
    return Series(std::move(v), "noisy-sine", SeriesOrigin::noisy_sine);
}

/// Column selector for load_csv: a header name or a zero-based index.
using ColumnRef = std::variant<std::string, std::size_t>;

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            return cells;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool is_blank(std::string_view s) {
    return s.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace detail

/// Reads one numeric column of a headed, comma-separated file. Rows are
/// reported 1-based counting the header as row 1; blank lines are skipped.
inline Series load_csv(const std::string& path, const ColumnRef& column) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV file '" + path + "'");

    std::string line;
    std::size_t row = 0;
    std::size_t col_index = 0;
    bool have_header = false;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++row;
        if (detail::is_blank(line)) continue;
        const auto cells = detail::split_commas(line);
        if (!have_header) {
            have_header = true;
            if (const auto* name = std::get_if<std::string>(&column)) {
                bool found = false;
                for (std::size_t c = 0; c < cells.size(); ++c)
                    if (cells[c] == *name) {
                        col_index = c;
                        found = true;
                        break;
                    }
                if (!found) throw ColumnNotFound("column '" + *name + "' not found in '" + path + "'");
            } else {
                col_index = std::get<std::size_t>(column);
                if (col_index >= cells.size())
                    throw ColumnNotFound("column index " + std::to_string(col_index) + " out of range in '" +
                                         path + "'");
            }
            continue;
        }
        if (col_index >= cells.size())
            throw ParseError(path + ": row " + std::to_string(row) + " has no column " +
                                 std::to_string(col_index + 1),
                             row, col_index + 1);
        double v = 0.0;
        if (!detail::parse_double(cells[col_index], v))
            throw ParseError(path + ": cannot parse '" + std::string(cells[col_index]) + "' at row " +
                                 std::to_string(row) + ", column " + std::to_string(col_index + 1),
                             row, col_index + 1);
        values.push_back(v);
    }
    if (!have_header) throw ParseError(path + ": empty file", 1, 1);
    if (values.size() < 2)
        throw InvalidArgument(path + ": need at least 2 numeric rows, found " + std::to_string(values.size()));

    std::string label = std::holds_alternative<std::string>(column)
                            ? std::get<std::string>(column)
                            : "column" + std::to_string(std::get<std::size_t>(column));
    return Series(std::move(values), std::move(label), SeriesOrigin::csv);
}

/// r_t = S_{t+1} - S_t (zero-based output indexing).
inline std::vector<double> returns(std::span<const double> values) {
    if (values.size() < 2) throw InvalidArgument("returns need at least 2 values");
    std::vector<double> r(values.size() - 1);
    for (std::size_t t = 0; t + 1 < values.size(); ++t) r[t] = values[t + 1] - values[t];
    return r;
}

/// Series form of returns(). The result must itself be a valid series, so
/// the input needs length >= 3.
inline Series to_returns(const Series& s) {
    if (s.size() < 3) throw InvalidArgument("returns of a length-2 series cannot form a series");
    return Series(returns(s.values()), s.name() + "-returns", SeriesOrigin::derived);
}

struct NormStats {
    double mean = 0.0;
    double std = 1.0;

    double apply(double v) const { return (v - mean) / std; }
    double invert(double z) const { return z * std + mean; }

    friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Non-owning view of consecutive (x, y) pairs stored row-major.
class DataView {
public:
    DataView() = default;
    DataView(std::span<const double> inputs, std::span<const double> targets, std::size_t width)
        : inputs_(inputs), targets_(targets), width_(width) {
        if (width_ == 0 || inputs_.size() != targets_.size() * width_)
            throw InvalidArgument("data view shape mismatch");
    }

    std::size_t size() const noexcept { return targets_.size(); }
    bool empty() const noexcept { return targets_.empty(); }
    std::size_t width() const noexcept { return width_; }
    std::span<const double> x(std::size_t i) const { return inputs_.subspan(i * width_, width_); }
    double y(std::size_t i) const { return targets_[i]; }
    std::span<const double> inputs() const noexcept { return inputs_; }
    std::span<const double> targets() const noexcept { return targets_; }

    DataView slice(std::size_t begin, std::size_t end) const {
        if (begin > end || end > size()) throw InvalidArgument("data view slice out of range");
        return DataView(inputs_.subspan(begin * width_, (end - begin) * width_),
                        targets_.subspan(begin, end - begin), width_);
    }

private:
    std::span<const double> inputs_;
    std::span<const double> targets_;
    std::size_t width_ = 0;
};

/// Supervised pairs x^i = (y^{i-n}, ..., y^{i-1}) -> y^i. The first
/// split_index pairs (chronologically) form the training slice.
class WindowedDataset {
public:
    WindowedDataset(std::vector<double> inputs, std::vector<double> targets, std::size_t input_width,
                    std::size_t window, std::size_t split_index, NormStats norm,
                    std::vector<NormStats> series_norms, bool normalized)
        : inputs_(std::move(inputs)),
          targets_(std::move(targets)),
          input_width_(input_width),
          window_(window),
          split_index_(split_index),
          norm_(norm),
          series_norms_(std::move(series_norms)),
          normalized_(normalized) {
        if (inputs_.size() != targets_.size() * input_width_)
            throw InvalidArgument("inputs and targets disagree in length");
        if (split_index_ < 1 || split_index_ + 1 > targets_.size())
            throw InvalidArgument("split index must lie in [1, pairs-1]");
    }

    std::size_t size() const noexcept { return targets_.size(); }
    std::size_t input_width() const noexcept { return input_width_; }
    std::size_t window() const noexcept { return window_; }
    std::size_t split_index() const noexcept { return split_index_; }
    const NormStats& norm() const noexcept { return norm_; }
    std::span<const NormStats> series_norms() const noexcept { return series_norms_; }
    bool normalized() const noexcept { return normalized_; }

    DataView all() const { return DataView(inputs_, targets_, input_width_); }
    DataView train() const { return all().slice(0, split_index_); }
    DataView test() const { return all().slice(split_index_, size()); }

private:
    std::vector<double> inputs_;
    std::vector<double> targets_;
    std::size_t input_width_;
    std::size_t window_;
    std::size_t split_index_;
    NormStats norm_;
    std::vector<NormStats> series_norms_;
    bool normalized_;
};

/// Training-portion statistics of one series: the values touched by the
/// first split_index pairs, i.e. indices [0, split_index + n).
inline NormStats training_stats(std::span<const double> values, std::size_t n, std::size_t split_index) {
    const std::size_t used = split_index + n;
    double mean = 0.0;
    for (std::size_t i = 0; i < used; ++i) mean += values[i];
    mean /= static_cast<double>(used);
    double var = 0.0;
    for (std::size_t i = 0; i < used; ++i) var += (values[i] - mean) * (values[i] - mean);
    var /= static_cast<double>(used);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) throw InvalidArgument("degenerate series: zero variance on the training portion");
    return {mean, sd};
}

/// Windows one or more equal-length series. The target is the next value of
/// the first series; inputs concatenate the per-series windows in order.
inline WindowedDataset window(std::span<const Series> series, std::size_t n, double split = 0.7,
                              bool normalize = false) {
    if (series.empty()) throw InvalidArgument("window needs at least one series");
    if (n == 0) throw InvalidArgument("window length must be positive");
    if (!(split > 0.0 && split < 1.0)) throw InvalidArgument("split fraction must lie in (0, 1)");
    const std::size_t len = series.front().size();
    for (const auto& s : series)
        if (s.size() != len) throw InvalidArgument("multi-series windowing needs equal lengths");
    if (len < n + 2)
        throw InvalidArgument("series of length " + std::to_string(len) + " too short for window " +
                              std::to_string(n) + " (need >= " + std::to_string(n + 2) + ")");

    const std::size_t pairs = len - n;
    std::size_t split_index = static_cast<std::size_t>(std::floor(split * static_cast<double>(pairs)));
    split_index = std::clamp<std::size_t>(split_index, 1, pairs - 1);

    std::vector<NormStats> stats;
    stats.reserve(series.size());
    if (normalize)
        for (const auto& s : series) stats.push_back(training_stats(s.values(), n, split_index));
    else
        stats.assign(series.size(), NormStats{});

    const std::size_t width = n * series.size();
    std::vector<double> inputs(pairs * width);
    std::vector<double> targets(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
        for (std::size_t k = 0; k < series.size(); ++k)
            for (std::size_t j = 0; j < n; ++j)
                inputs[i * width + k * n + j] = stats[k].apply(series[k][i + j]);
        targets[i] = stats[0].apply(series[0][i + n]);
    }
    const NormStats target_norm = stats.front();
    return WindowedDataset(std::move(inputs), std::move(targets), width, n, split_index, target_norm,
                           std::move(stats), normalize);
}

inline WindowedDataset window(const Series& s, std::size_t n, double split = 0.7, bool normalize = false) {
    return window(std::span<const Series>(&s, 1), n, split, normalize);
}

}  // namespace flatnet
