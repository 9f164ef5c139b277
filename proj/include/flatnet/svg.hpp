#pragma once

// Self-contained SVG scatter of two report columns, one colour per grid
// point. Data markers are the only <circle> elements in the document.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "flatnet/report.hpp"

namespace flatnet {

struct ScatterLayout {
    double width = 640.0;
    double height = 480.0;
    double margin_left = 80.0;
    double margin_right = 190.0;
    double margin_top = 30.0;
    double margin_bottom = 60.0;
};

/// Axis range used for plotting: data extrema padded by 5%, or +-0.5 around
/// a degenerate (single-valued) column.
inline std::pair<double, double> axis_range(const std::vector<double>& v) {
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi - lo <= 0.0) return {lo - 0.5, hi + 0.5};
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

namespace detail {

inline std::string grid_label(const GridPoint& p) {
    std::ostringstream s;
    s << "eta=" << p.learning_rate << " M=" << (p.batch_size ? std::to_string(*p.batch_size) : std::string("full"))
      << " N=" << p.iterations;
    return s.str();
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors[i % 10];
}

}  // namespace detail

inline std::string scatter_svg(const SweepReport& rep, const std::string& x_column, const std::string& y_column,
                               const ScatterLayout& layout = {}) {
    require_column(rep, x_column);
    require_column(rep, y_column);
    struct Point {
        double x, y;
        std::size_t group;
    };
    std::vector<GridPoint> groups;
    std::vector<Point> pts;
    for (const auto& r : rep.records) {
        if (!r.ok()) continue;
        const auto vx = column_value(r, x_column), vy = column_value(r, y_column);
        if (!vx || !vy) continue;
        auto it = std::find(groups.begin(), groups.end(), r.point);
        if (it == groups.end()) {
            groups.push_back(r.point);
            it = groups.end() - 1;
        }
        pts.push_back({*vx, *vy, static_cast<std::size_t>(it - groups.begin())});
    }
    if (pts.empty()) throw InvalidArgument("scatter plot needs at least one row with both columns present");

    std::vector<double> xs, ys;
    for (const auto& p : pts) {
        xs.push_back(p.x);
        ys.push_back(p.y);
    }
    const auto [x0, x1] = axis_range(xs);
    const auto [y0, y1] = axis_range(ys);
    const double pw = layout.width - layout.margin_left - layout.margin_right;
    const double ph = layout.height - layout.margin_top - layout.margin_bottom;
    auto sx = [&](double v) { return layout.margin_left + (v - x0) / (x1 - x0) * pw; };
    auto sy = [&](double v) { return layout.margin_top + (1.0 - (v - y0) / (y1 - y0)) * ph; };

    std::ostringstream s;
    s.precision(6);
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << layout.width << "\" height=\"" << layout.height
      << "\" viewBox=\"0 0 " << layout.width << ' ' << layout.height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << layout.width << "\" height=\"" << layout.height << "\" fill=\"white\"/>\n";
    s << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n"
      << "<rect x=\"" << layout.margin_left << "\" y=\"" << layout.margin_top << "\" width=\"" << pw << "\" height=\""
      << ph << "\"/>\n</g>\n";
    s << "<g class=\"ticks\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double f = i / 4.0;
        const double xv = x0 + f * (x1 - x0), yv = y0 + f * (y1 - y0);
        const double px = sx(xv), py = sy(yv);
        s << "<line x1=\"" << px << "\" y1=\"" << layout.margin_top + ph << "\" x2=\"" << px << "\" y2=\""
          << layout.margin_top + ph + 5 << "\" stroke=\"black\"/>"
          << "<text x=\"" << px << "\" y=\"" << layout.margin_top + ph + 18 << "\" text-anchor=\"middle\">" << xv
          << "</text>\n";
        s << "<line x1=\"" << layout.margin_left - 5 << "\" y1=\"" << py << "\" x2=\"" << layout.margin_left
          << "\" y2=\"" << py << "\" stroke=\"black\"/>"
          << "<text x=\"" << layout.margin_left - 8 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">" << yv
          << "</text>\n";
    }
    s << "</g>\n";
    s << "<text class=\"xlabel\" x=\"" << layout.margin_left + pw / 2 << "\" y=\"" << layout.height - 15
      << "\" text-anchor=\"middle\" font-size=\"13\">" << detail::xml_escape(x_column) << "</text>\n";
    s << "<text class=\"ylabel\" x=\"18\" y=\"" << layout.margin_top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
      << "transform=\"rotate(-90 18 " << layout.margin_top + ph / 2 << ")\">" << detail::xml_escape(y_column)
      << "</text>\n";
    s << "<g class=\"markers\">\n";
    s.precision(10);
    for (const auto& p : pts)
        s << "<circle class=\"marker\" cx=\"" << sx(p.x) << "\" cy=\"" << sy(p.y) << "\" r=\"3.5\" fill=\""
          << detail::palette(p.group) << "\" fill-opacity=\"0.8\" data-x=\"" << format_real(p.x) << "\" data-y=\""
          << format_real(p.y) << "\"/>\n";
    s << "</g>\n";
    s.precision(6);
    s << "<g class=\"legend\">\n";
    const double lx = layout.margin_left + pw + 15;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double ly = layout.margin_top + 10 + 18.0 * static_cast<double>(g);
        s << "<rect x=\"" << lx << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\"" << detail::palette(g)
          << "\"/><text x=\"" << lx + 15 << "\" y=\"" << ly + 1 << "\">" << detail::xml_escape(detail::grid_label(groups[g]))
          << "</text>\n";
    }
    s << "</g>\n</svg>\n";
    return s.str();
}

inline void emit_scatter(const SweepReport& rep, const std::string& x_column, const std::string& y_column,
                         const std::string& path) {
    write_text(path, scatter_svg(rep, x_column, y_column));
}

}  // namespace flatnet
