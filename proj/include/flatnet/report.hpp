#pragma once

// Sweep reports: one record per (grid point, seed), CSV and JSON emission
// with a fixed column order, read-back, aggregates and rank correlations.
//
// CSV columns, in order:
//   seed, eta, batch, iters, train_loss, test_loss, gap, tr_hx, jac_fro,
//   tr_hw_total, tr_hw_layer_1 .. tr_hw_layer_L, scaled_quadform, hit_rate,
//   status
// batch is "full" for full-batch runs. Reals use 17 significant digits;
// metrics that were not computed (or runs that failed) are empty cells.

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "flatnet/data.hpp"
#include "flatnet/errors.hpp"
#include "flatnet/metrics.hpp"
#include "flatnet/stats.hpp"

namespace flatnet {

struct GridPoint {
    double learning_rate = 0.05;
    std::optional<std::size_t> batch_size;  ///< nullopt: full batch
    std::size_t iterations = 1000;

    friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct RunRecord {
    GridPoint point;
    std::uint64_t seed = 0;
    std::string status = "ok";  ///< ok | diverged | error
    std::string message;
    std::optional<MetricsReport> metrics;  ///< present iff status == "ok"

    bool ok() const { return status == "ok" && metrics.has_value(); }
    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct SweepReport {
    std::size_t layer_count = 0;
    std::vector<RunRecord> records;  ///< grid-major, then seed order

    std::size_t ok_count() const {
        std::size_t n = 0;
        for (const auto& r : records) n += r.ok() ? 1 : 0;
        return n;
    }
    std::size_t failure_count() const { return records.size() - ok_count(); }
};

inline std::vector<std::string> report_columns(std::size_t layer_count) {
    std::vector<std::string> c = {"seed", "eta",  "batch",   "iters",   "train_loss", "test_loss",
                                  "gap",  "tr_hx", "jac_fro", "tr_hw_total"};
    for (std::size_t l = 1; l <= layer_count; ++l) c.push_back("tr_hw_layer_" + std::to_string(l));
    c.push_back("scaled_quadform");
    c.push_back("hit_rate");
    c.push_back("status");
    return c;
}

/// Numeric value of a column for one record; nullopt when absent.
/// "batch" maps full batch to nullopt. Throws for unknown columns.
inline std::optional<double> column_value(const RunRecord& r, const std::string& column) {
    if (column == "seed") return static_cast<double>(r.seed);
    if (column == "eta") return r.point.learning_rate;
    if (column == "batch")
        return r.point.batch_size ? std::optional<double>(static_cast<double>(*r.point.batch_size)) : std::nullopt;
    if (column == "iters") return static_cast<double>(r.point.iterations);
    const bool known = column == "train_loss" || column == "test_loss" || column == "gap" || column == "tr_hx" ||
                       column == "jac_fro" || column == "tr_hw_total" || column == "scaled_quadform" ||
                       column == "hit_rate" || column.rfind("tr_hw_layer_", 0) == 0;
    if (!known) throw InvalidArgument("unknown report column '" + column + "'");
    if (!r.metrics) return std::nullopt;
    const auto& m = *r.metrics;
    if (column == "train_loss") return m.train_loss;
    if (column == "test_loss") return m.test_loss;
    if (column == "gap") return m.gap;
    if (column == "tr_hx") return m.tr_input_hessian;
    if (column == "jac_fro") return m.jacobian_frobenius;
    if (column == "tr_hw_total") return m.tr_weight_hessian_total;
    if (column == "scaled_quadform") return m.scaled_quadform;
    if (column == "hit_rate") return m.hit_rate;
    std::size_t layer = 0;
    try {
        layer = std::stoul(column.substr(12));
    } catch (const std::exception&) {
        throw InvalidArgument("unknown report column '" + column + "'");
    }
    if (layer < 1 || layer > m.tr_weight_hessian_per_layer.size())
        throw InvalidArgument("unknown report column '" + column + "'");
    return m.tr_weight_hessian_per_layer[layer - 1];
}

inline void require_column(const SweepReport& rep, const std::string& column) {
    const auto cols = report_columns(rep.layer_count);
    if (column == "status" || std::find(cols.begin(), cols.end(), column) == cols.end())
        throw InvalidArgument("unknown report column '" + column + "'");
}

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::string format_opt(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

inline std::optional<double> parse_opt(const std::string& s, std::size_t row, std::size_t col) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    if (!parse_double(s, v)) throw ParseError("cannot parse report cell '" + s + "'", row, col);
    return v;
}

}  // namespace detail

inline std::string report_csv(const SweepReport& rep) {
    std::ostringstream out;
    const auto cols = report_columns(rep.layer_count);
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : rep.records) {
        out << r.seed << ',' << format_real(r.point.learning_rate) << ','
            << (r.point.batch_size ? std::to_string(*r.point.batch_size) : std::string("full")) << ','
            << r.point.iterations;
        for (std::size_t i = 4; i + 1 < cols.size(); ++i) out << ',' << detail::format_opt(column_value(r, cols[i]));
        out << ',' << r.status << '\n';
    }
    return out.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline void emit_csv(const SweepReport& rep, const std::string& path) { write_text(path, report_csv(rep)); }

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Parses a report CSV written by emit_csv.
inline SweepReport parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty report CSV", 1, 1);
    std::vector<std::string> header;
    for (auto c : detail::split_commas(line)) header.emplace_back(c);
    std::size_t layers = 0;
    for (const auto& h : header)
        if (h.rfind("tr_hw_layer_", 0) == 0) ++layers;
    if (header != report_columns(layers)) throw ParseError("report CSV header does not match the column layout", 1, 1);

    SweepReport rep;
    rep.layer_count = layers;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::is_blank(line)) continue;
        std::vector<std::string> cells;
        for (auto c : detail::split_commas(line)) cells.emplace_back(c);
        if (cells.size() != header.size()) throw ParseError("report row has the wrong number of cells", row, 1);
        RunRecord r;
        try {
            r.seed = std::stoull(cells[0]);
            r.point.iterations = std::stoul(cells[3]);
            if (cells[2] != "full") r.point.batch_size = std::stoul(cells[2]);
        } catch (const std::exception&) {
            throw ParseError("bad seed, batch or iteration cell", row, 1);
        }
        if (!detail::parse_double(cells[1], r.point.learning_rate)) throw ParseError("bad eta cell", row, 2);
        r.status = cells.back();
        if (r.status == "ok") {
            MetricsReport m;
            m.seed = r.seed;
            m.learning_rate = r.point.learning_rate;
            m.batch_size = r.point.batch_size.value_or(0);
            m.iterations = r.point.iterations;
            auto req = [&](std::size_t c) {
                auto v = detail::parse_opt(cells[c], row, c + 1);
                if (!v) throw ParseError("missing value in ok row", row, c + 1);
                return *v;
            };
            m.train_loss = req(4);
            m.test_loss = req(5);
            m.gap = req(6);
            m.tr_input_hessian = detail::parse_opt(cells[7], row, 8);
            m.jacobian_frobenius = req(8);
            m.tr_weight_hessian_total = detail::parse_opt(cells[9], row, 10);
            for (std::size_t l = 0; l < layers; ++l)
                m.tr_weight_hessian_per_layer.push_back(detail::parse_opt(cells[10 + l], row, 11 + l));
            m.scaled_quadform = detail::parse_opt(cells[10 + layers], row, 11 + layers);
            m.hit_rate = detail::parse_opt(cells[11 + layers], row, 12 + layers);
            r.metrics = m;
        }
        rep.records.push_back(std::move(r));
    }
    return rep;
}

inline nlohmann::json record_to_json(const RunRecord& r, std::size_t layer_count) {
    nlohmann::json j;
    const auto cols = report_columns(layer_count);
    j["seed"] = r.seed;
    j["eta"] = r.point.learning_rate;
    if (r.point.batch_size)
        j["batch"] = *r.point.batch_size;
    else
        j["batch"] = "full";
    j["iters"] = r.point.iterations;
    for (std::size_t i = 4; i + 1 < cols.size(); ++i) {
        const auto v = column_value(r, cols[i]);
        j[cols[i]] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    }
    j["status"] = r.status;
    if (!r.message.empty()) j["message"] = r.message;
    return j;
}

/// JSON mirror of the CSV: {"columns": [...], "rows": [{column: value}]}.
inline nlohmann::json report_json(const SweepReport& rep) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.records) rows.push_back(record_to_json(r, rep.layer_count));
    return {{"columns", report_columns(rep.layer_count)}, {"rows", std::move(rows)}};
}

inline void emit_json(const SweepReport& rep, const std::string& path) { write_text(path, report_json(rep).dump(2) + "\n"); }

/// Values of a column over the ok records where it is present.
inline std::vector<double> column_values(const SweepReport& rep, const std::string& column) {
    require_column(rep, column);
    std::vector<double> out;
    for (const auto& r : rep.records)
        if (r.ok())
            if (auto v = column_value(r, column)) out.push_back(*v);
    return out;
}

namespace detail {

inline std::pair<std::vector<double>, std::vector<double>> paired_columns(const SweepReport& rep, const std::string& x,
                                                                           const std::string& y) {
    require_column(rep, x);
    require_column(rep, y);
    std::vector<double> a, b;
    for (const auto& r : rep.records) {
        if (!r.ok()) continue;
        const auto vx = column_value(r, x), vy = column_value(r, y);
        if (vx && vy) {
            a.push_back(*vx);
            b.push_back(*vy);
        }
    }
    return {std::move(a), std::move(b)};
}

}  // namespace detail

/// Spearman correlation of two columns across ok rows. nullopt marks an
/// undefined value (a constant column); fewer than 5 rows throws.
inline std::optional<double> rank_correlation(const SweepReport& rep, const std::string& metric,
                                              const std::string& target) {
    const auto [a, b] = detail::paired_columns(rep, metric, target);
    return spearman(a, b);
}

inline std::optional<double> linear_correlation(const SweepReport& rep, const std::string& metric,
                                                const std::string& target) {
    const auto [a, b] = detail::paired_columns(rep, metric, target);
    if (a.size() < min_correlation_rows)
        throw InvalidArgument("correlation needs at least 5 rows, got " + std::to_string(a.size()));
    return pearson(a, b);
}

inline const std::vector<std::string>& aggregate_metrics() {
    static const std::vector<std::string> m = {"train_loss", "test_loss",   "gap",          "tr_hx",
                                               "jac_fro",    "tr_hw_total", "scaled_quadform", "hit_rate"};
    return m;
}

struct Aggregate {
    GridPoint point;
    std::size_t runs = 0;
    std::size_t failures = 0;
    std::map<std::string, std::pair<double, double>> median_iqr;  ///< metric -> (median, IQR)
};

/// Median and interquartile range per grid point, in first-seen grid order.
inline std::vector<Aggregate> aggregate(const SweepReport& rep) {
    std::vector<Aggregate> out;
    auto slot = [&](const GridPoint& p) -> Aggregate& {
        for (auto& a : out)
            if (a.point == p) return a;
        out.push_back({p, 0, 0, {}});
        return out.back();
    };
    for (const auto& r : rep.records) {
        auto& a = slot(r.point);
        if (r.ok())
            ++a.runs;
        else
            ++a.failures;
    }
    for (auto& a : out)
        for (const auto& m : aggregate_metrics()) {
            std::vector<double> v;
            for (const auto& r : rep.records)
                if (r.ok() && r.point == a.point)
                    if (auto x = column_value(r, m)) v.push_back(*x);
            if (!v.empty()) a.median_iqr[m] = {median(v), interquartile_range(v)};
        }
    return out;
}

inline std::string aggregate_csv(const std::vector<Aggregate>& aggs) {
    std::ostringstream out;
    out << "eta,batch,iters,runs,failures";
    for (const auto& m : aggregate_metrics()) out << ',' << m << "_median," << m << "_iqr";
    out << '\n';
    for (const auto& a : aggs) {
        out << format_real(a.point.learning_rate) << ','
            << (a.point.batch_size ? std::to_string(*a.point.batch_size) : std::string("full")) << ','
            << a.point.iterations << ',' << a.runs << ',' << a.failures;
        for (const auto& m : aggregate_metrics()) {
            const auto it = a.median_iqr.find(m);
            if (it == a.median_iqr.end())
                out << ",,";
            else
                out << ',' << format_real(it->second.first) << ',' << format_real(it->second.second);
        }
        out << '\n';
    }
    return out.str();
}

/// Spearman and Pearson of every curvature metric against test loss and gap.
inline nlohmann::json correlation_summary(const SweepReport& rep) {
    nlohmann::json out = nlohmann::json::array();
    for (const std::string x : {"tr_hx", "jac_fro", "tr_hw_total", "scaled_quadform"})
        for (const std::string y : {"test_loss", "gap"}) {
            nlohmann::json j{{"metric", x}, {"target", y}};
            const auto [a, b] = detail::paired_columns(rep, x, y);
            j["rows"] = a.size();
            if (a.size() >= min_correlation_rows) {
                const auto s = spearman(a, b);
                const auto p = pearson(a, b);
                j["spearman"] = s ? nlohmann::json(*s) : nlohmann::json(nullptr);
                j["pearson"] = p ? nlohmann::json(*p) : nlohmann::json(nullptr);
            } else {
                j["spearman"] = nullptr;
                j["pearson"] = nullptr;
            }
            out.push_back(std::move(j));
        }
    return out;
}

}  // namespace flatnet
