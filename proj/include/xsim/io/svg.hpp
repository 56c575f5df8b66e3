#pragma once

// Static SVG line charts of layer curves: x = layer, y = score, one
// polyline per language pair. Output bytes depend only on the input curves.

#include "xsim/io/results.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace xsim::io {

struct Chart {
  std::string model_id;
  std::string index;
  std::vector<LayerCurve> series;
};

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                        "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace detail

/// Groups curves into one chart per (model_id, index), series sorted by pair.
inline std::vector<Chart> charts_from_curves(const std::vector<LayerCurve>& curves) {
  std::map<std::pair<std::string, std::string>, std::vector<LayerCurve>> groups;
  for (const auto& c : curves) groups[{c.model_id, c.index}].push_back(c);
  std::vector<Chart> charts;
  for (auto& [key, series] : groups) {
    std::sort(series.begin(), series.end(),
              [](const LayerCurve& a, const LayerCurve& b) { return a.pair < b.pair; });
    charts.push_back(Chart{key.first, key.second, std::move(series)});
  }
  return charts;
}

inline std::string render_svg(const Chart& chart) {
  constexpr double width = 640, height = 400;
  constexpr double left = 60, right = 140, top = 40, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  int min_layer = 0, max_layer = 1;
  double y_min = 0.0, y_max = 1.0;
  bool first = true;
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < s.layers.size(); ++i) {
      if (first) {
        min_layer = max_layer = s.layers[i];
        first = false;
      }
      min_layer = std::min(min_layer, s.layers[i]);
      max_layer = std::max(max_layer, s.layers[i]);
      y_min = std::min(y_min, s.scores[i]);
      y_max = std::max(y_max, s.scores[i]);
    }
  }
  if (max_layer == min_layer) ++max_layer;
  auto px = [&](double layer) { return left + plot_w * (layer - min_layer) / (max_layer - min_layer); };
  auto py = [&](double score) { return top + plot_h * (1.0 - (score - y_min) / (y_max - y_min)); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg += "<text x=\"" + detail::fmt2(left) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" +
         detail::xml_escape(chart.model_id + " / " + chart.index) + "</text>\n";
  // Axes.
  svg += "<line x1=\"" + detail::fmt2(left) + "\" y1=\"" + detail::fmt2(top + plot_h) + "\" x2=\"" +
         detail::fmt2(left + plot_w) + "\" y2=\"" + detail::fmt2(top + plot_h) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + detail::fmt2(left) + "\" y1=\"" + detail::fmt2(top) + "\" x2=\"" +
         detail::fmt2(left) + "\" y2=\"" + detail::fmt2(top + plot_h) + "\" stroke=\"black\"/>\n";
  for (int layer = min_layer; layer <= max_layer; ++layer) {
    const double x = px(layer);
    svg += "<text x=\"" + detail::fmt2(x) + "\" y=\"" + detail::fmt2(top + plot_h + 16) +
           "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" +
           std::to_string(layer) + "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = y_min + (y_max - y_min) * k / 4.0;
    svg += "<text x=\"" + detail::fmt2(left - 6) + "\" y=\"" + detail::fmt2(py(v) + 3) +
           "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" + detail::fmt2(v) +
           "</text>\n";
  }
  svg += "<text x=\"" + detail::fmt2(left + plot_w / 2) + "\" y=\"" + detail::fmt2(height - 12) +
         "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">layer</text>\n";
  svg += "<text x=\"16\" y=\"" + detail::fmt2(top + plot_h / 2) +
         "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         detail::fmt2(top + plot_h / 2) + ")\">score</text>\n";

  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const auto& curve = chart.series[s];
    const std::string color = detail::kPalette[s % detail::kPalette.size()];
    std::vector<std::pair<int, double>> pts;
    for (std::size_t i = 0; i < curve.layers.size(); ++i) pts.emplace_back(curve.layers[i], curve.scores[i]);
    std::sort(pts.begin(), pts.end());
    std::string points;
    for (const auto& [layer, score] : pts) {
      if (!points.empty()) points.push_back(' ');
      points += detail::fmt2(px(layer)) + "," + detail::fmt2(py(score));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(s);
    svg += "<g class=\"legend-entry\"><line x1=\"" + detail::fmt2(width - right + 10) + "\" y1=\"" +
           detail::fmt2(ly) + "\" x2=\"" + detail::fmt2(width - right + 30) + "\" y2=\"" + detail::fmt2(ly) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"/><text x=\"" + detail::fmt2(width - right + 36) +
           "\" y=\"" + detail::fmt2(ly + 4) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
           detail::xml_escape(curve.pair) + "</text></g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

inline std::string chart_filename(const Chart& chart) {
  std::string name = chart.model_id + "__" + chart.index + ".svg";
  for (char& c : name) {
    if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '_';
  }
  return name;
}

/// Renders every chart of a scores CSV into `out_dir`; returns the written paths.
inline std::vector<std::filesystem::path> plot_scores_csv(const std::filesystem::path& csv,
                                                          const std::filesystem::path& out_dir) {
  const auto curves = read_scores_csv(csv);
  if (curves.empty()) throw Error(ErrorCode::FormatError, csv.string() + ": no data rows to plot");
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& chart : charts_from_curves(curves)) {
    const auto path = out_dir / chart_filename(chart);
    write_text(path, render_svg(chart));
    written.push_back(path);
  }
  return written;
}

}  // namespace xsim::io
