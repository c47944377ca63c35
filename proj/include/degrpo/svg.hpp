#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace degrpo {

// Minimal deterministic SVG line charts: pure text assembly, fixed precision,
// no timestamps or external resources, so identical data gives identical
// bytes.

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;  // NaN entries break the polyline
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::optional<double> y_min;  // default: data range
  std::optional<double> y_max;
};

namespace svg_detail {

inline constexpr const char* kPalette[6] = {"#1f77b4", "#d62728", "#2ca02c",
                                            "#9467bd", "#ff7f0e", "#8c564b"};

inline std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

inline Range data_range(const std::vector<Series>& series,
                        bool use_y) {
  Range r{std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};
  for (const auto& s : series) {
    const auto& values = use_y ? s.y : s.x;
    for (double v : values) {
      if (!std::isfinite(v)) continue;
      r.lo = std::min(r.lo, v);
      r.hi = std::max(r.hi, v);
    }
  }
  if (!(r.lo <= r.hi)) return Range{0.0, 1.0};
  if (r.lo == r.hi) return Range{r.lo - 0.5, r.hi + 0.5};
  return r;
}

// Renders one chart into `out` at the given origin. Plot area is
// (width-70) x (height-50) with margins for axes and title.
inline void render_chart_at(std::string& out, const Chart& chart, double ox,
                            double oy, double width, double height) {
  const double left = ox + 50.0;
  const double top = oy + 24.0;
  const double plot_w = width - 70.0;
  const double plot_h = height - 60.0;
  const double bottom = top + plot_h;

  Range xr = data_range(chart.series, false);
  Range yr = data_range(chart.series, true);
  if (chart.y_min) yr.lo = *chart.y_min;
  if (chart.y_max) yr.hi = *chart.y_max;
  if (yr.lo == yr.hi) {
    yr.lo -= 0.5;
    yr.hi += 0.5;
  }

  auto sx = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto sy = [&](double v) {
    return bottom - (v - yr.lo) / (yr.hi - yr.lo) * plot_h;
  };

  out += "<text x=\"" + coord(left + plot_w / 2) + "\" y=\"" + coord(oy + 14.0) +
         "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" +
         chart.title + "</text>\n";
  out += "<rect x=\"" + coord(left) + "\" y=\"" + coord(top) + "\" width=\"" +
         coord(plot_w) + "\" height=\"" + coord(plot_h) +
         "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    const double py = sy(fy);
    out += "<line x1=\"" + coord(left) + "\" y1=\"" + coord(py) + "\" x2=\"" +
           coord(left + plot_w) + "\" y2=\"" + coord(py) +
           "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
    out += "<text x=\"" + coord(left - 4.0) + "\" y=\"" + coord(py + 3.0) +
           "\" text-anchor=\"end\" font-size=\"9\" font-family=\"sans-serif\">" +
           tick_label(fy) + "</text>\n";
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double px = sx(fx);
    out += "<text x=\"" + coord(px) + "\" y=\"" + coord(bottom + 12.0) +
           "\" text-anchor=\"middle\" font-size=\"9\" font-family=\"sans-serif\">" +
           tick_label(fx) + "</text>\n";
  }
  out += "<text x=\"" + coord(left + plot_w / 2) + "\" y=\"" +
         coord(bottom + 26.0) +
         "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">" +
         chart.x_label + "</text>\n";
  out += "<text x=\"" + coord(ox + 12.0) + "\" y=\"" + coord(top + plot_h / 2) +
         "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 " +
         coord(ox + 12.0) + " " + coord(top + plot_h / 2) + ")\">" +
         chart.y_label + "</text>\n";

  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const char* color = kPalette[s % 6];
    const auto& series = chart.series[s];
    std::string points;
    bool open = false;
    auto flush = [&]() {
      if (open && !points.empty())
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.2\" points=\"" + points + "\"/>\n";
      points.clear();
      open = false;
    };
    for (std::size_t i = 0; i < series.x.size() && i < series.y.size(); ++i) {
      if (!std::isfinite(series.y[i]) || !std::isfinite(series.x[i])) {
        flush();
        continue;
      }
      if (!points.empty()) points += ' ';
      points += coord(sx(series.x[i])) + "," + coord(sy(series.y[i]));
      open = true;
    }
    flush();
    // legend entry
    const double ly = top + 12.0 + 12.0 * static_cast<double>(s);
    out += "<line x1=\"" + coord(left + plot_w - 86.0) + "\" y1=\"" + coord(ly - 3.0) +
           "\" x2=\"" + coord(left + plot_w - 70.0) + "\" y2=\"" + coord(ly - 3.0) +
           "\" stroke=\"" + color + "\" stroke-width=\"1.2\"/>\n";
    out += "<text x=\"" + coord(left + plot_w - 66.0) + "\" y=\"" + coord(ly) +
           "\" font-size=\"9\" font-family=\"sans-serif\">" + series.label +
           "</text>\n";
  }
}

}  // namespace svg_detail

// Charts stacked top to bottom in one document.
inline std::string render_charts(const std::vector<Chart>& charts,
                                 double width = 640.0,
                                 double chart_height = 220.0) {
  const double height = chart_height * static_cast<double>(charts.size());
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    svg_detail::coord(width) + "\" height=\"" +
                    svg_detail::coord(height) + "\" viewBox=\"0 0 " +
                    svg_detail::coord(width) + " " + svg_detail::coord(height) +
                    "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (std::size_t i = 0; i < charts.size(); ++i)
    svg_detail::render_chart_at(out, charts[i], 0.0,
                                chart_height * static_cast<double>(i), width,
                                chart_height);
  out += "</svg>\n";
  return out;
}

// Two chart columns per row (used for side-by-side arm comparisons).
inline std::string render_chart_grid(const std::vector<Chart>& charts,
                                     int columns, double cell_width = 480.0,
                                     double cell_height = 240.0) {
  const int rows =
      (static_cast<int>(charts.size()) + columns - 1) / columns;
  const double width = cell_width * columns;
  const double height = cell_height * rows;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    svg_detail::coord(width) + "\" height=\"" +
                    svg_detail::coord(height) + "\" viewBox=\"0 0 " +
                    svg_detail::coord(width) + " " + svg_detail::coord(height) +
                    "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (std::size_t i = 0; i < charts.size(); ++i) {
    const int r = static_cast<int>(i) / columns;
    const int c = static_cast<int>(i) % columns;
    svg_detail::render_chart_at(out, charts[i], cell_width * c, cell_height * r,
                                cell_width, cell_height);
  }
  out += "</svg>\n";
  return out;
}

}  // namespace degrpo
