#pragma once

// Result tables. The canonical form is CSV with the columns
//   model_id,index,pair,layer,score,degenerate_count
// one row per (curve, layer), scores at 10 significant digits, rows sorted
// by (model_id, index, pair, layer). JSON carries the same curves at full
// precision.

#include "xsim/core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace xsim::io {

struct LayerCurve {
  std::string model_id;
  std::string index;
  std::string pair;  // "en-fr"
  std::vector<int> layers;
  std::vector<double> scores;
  std::vector<int> degenerate_counts;

  bool operator==(const LayerCurve&) const = default;
};

inline constexpr const char* kScoresHeader = "model_id,index,pair,layer,score,degenerate_count";
inline constexpr const char* kAggregateHeader =
    "model_id,index,layer,pairs,mean,spread_min,spread_max";
inline constexpr const char* kMatchHeader = "model_id,pair,layer,accuracy,hits,m,degenerate_count";

inline std::string format_score(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

struct ScoreRow {
  std::string model_id, index, pair;
  int layer;
  double score;
  int degenerate_count;
};

inline std::vector<ScoreRow> sorted_rows(const std::vector<LayerCurve>& curves) {
  std::vector<ScoreRow> rows;
  for (const auto& c : curves) {
    if (c.layers.size() != c.scores.size() || c.layers.size() != c.degenerate_counts.size()) {
      throw Error(ErrorCode::InvalidParam, "curve vectors have inconsistent lengths");
    }
    for (std::size_t i = 0; i < c.layers.size(); ++i) {
      rows.push_back({c.model_id, c.index, c.pair, c.layers[i], c.scores[i], c.degenerate_counts[i]});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return std::tie(a.model_id, a.index, a.pair, a.layer) <
           std::tie(b.model_id, b.index, b.pair, b.layer);
  });
  return rows;
}

}  // namespace detail

inline std::string scores_csv(const std::vector<LayerCurve>& curves) {
  std::string out = std::string(kScoresHeader) + "\n";
  for (const auto& r : detail::sorted_rows(curves)) {
    out += detail::csv_field(r.model_id) + ',' + detail::csv_field(r.index) + ',' +
           detail::csv_field(r.pair) + ',' + std::to_string(r.layer) + ',' +
           format_score(r.score) + ',' + std::to_string(r.degenerate_count) + '\n';
  }
  return out;
}

inline nlohmann::json scores_json(const std::vector<LayerCurve>& curves) {
  std::vector<LayerCurve> sorted = curves;
  std::sort(sorted.begin(), sorted.end(), [](const LayerCurve& a, const LayerCurve& b) {
    return std::tie(a.model_id, a.index, a.pair) < std::tie(b.model_id, b.index, b.pair);
  });
  nlohmann::json doc = {{"curves", nlohmann::json::array()}};
  for (const auto& c : sorted) {
    doc["curves"].push_back({{"model_id", c.model_id},
                             {"index", c.index},
                             {"pair", c.pair},
                             {"layers", c.layers},
                             {"scores", c.scores},
                             {"degenerate_counts", c.degenerate_counts}});
  }
  return doc;
}

enum class ResultFormat { csv, json };

inline ResultFormat parse_result_format(std::string_view s) {
  if (s == "csv") return ResultFormat::csv;
  if (s == "json") return ResultFormat::json;
  throw Error(ErrorCode::InvalidParam, "format must be csv or json, got '" + std::string(s) + "'");
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = detail::open_for_write(path);
  out << text;
  detail::finish(out, path);
}

inline void write_results(const std::filesystem::path& path, const std::vector<LayerCurve>& curves,
                          ResultFormat format) {
  write_text(path, format == ResultFormat::csv ? scores_csv(curves) : scores_json(curves).dump(2) + "\n");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Curves from a scores CSV, grouped by (model_id, index, pair) in file order.
inline std::vector<LayerCurve> parse_scores_csv(const std::string& text, const std::string& where = "csv") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kScoresHeader) {
    throw Error(ErrorCode::FormatError, where + ": header must be '" + kScoresHeader + "'");
  }
  std::vector<LayerCurve> curves;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> slot;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    const std::string at = where + ":" + std::to_string(line_no);
    if (f.size() != 6) throw Error(ErrorCode::FormatError, at + ": expected 6 fields");
    int layer = 0;
    double score = 0.0;
    int degenerate = 0;
    try {
      std::size_t used = 0;
      layer = std::stoi(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("layer");
      score = std::stod(f[4], &used);
      if (used != f[4].size()) throw std::invalid_argument("score");
      degenerate = std::stoi(f[5], &used);
      if (used != f[5].size()) throw std::invalid_argument("degenerate_count");
    } catch (const std::exception&) {
      throw Error(ErrorCode::FormatError, at + ": malformed number");
    }
    const auto key = std::make_tuple(f[0], f[1], f[2]);
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, curves.size()).first;
      curves.push_back(LayerCurve{f[0], f[1], f[2], {}, {}, {}});
    }
    auto& c = curves[it->second];
    c.layers.push_back(layer);
    c.scores.push_back(score);
    c.degenerate_counts.push_back(degenerate);
  }
  return curves;
}

inline std::vector<LayerCurve> read_scores_csv(const std::filesystem::path& path) {
  return parse_scores_csv(read_text(path), path.string());
}

inline std::vector<LayerCurve> parse_scores_json(const std::string& text) {
  std::vector<LayerCurve> curves;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& c : doc.at("curves")) {
      curves.push_back(LayerCurve{c.at("model_id").get<std::string>(), c.at("index").get<std::string>(),
                                  c.at("pair").get<std::string>(), c.at("layers").get<std::vector<int>>(),
                                  c.at("scores").get<std::vector<double>>(),
                                  c.at("degenerate_counts").get<std::vector<int>>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::FormatError, std::string("scores json: ") + ex.what());
  }
  return curves;
}

/// Mean and min-max band across language pairs, per (model, index, layer).
struct AggregateRow {
  std::string model_id;
  std::string index;
  int layer = 0;
  int pairs = 0;
  double mean = 0.0;
  double spread_min = 0.0;
  double spread_max = 0.0;
};

inline std::vector<AggregateRow> aggregate_across_pairs(const std::vector<LayerCurve>& curves) {
  std::map<std::tuple<std::string, std::string, int>, std::vector<double>> groups;
  for (const auto& r : detail::sorted_rows(curves)) {
    groups[{r.model_id, r.index, r.layer}].push_back(r.score);
  }
  std::vector<AggregateRow> rows;
  for (const auto& [key, values] : groups) {
    AggregateRow row;
    std::tie(row.model_id, row.index, row.layer) = key;
    row.pairs = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    row.mean = sum / static_cast<double>(values.size());
    row.spread_min = *std::min_element(values.begin(), values.end());
    row.spread_max = *std::max_element(values.begin(), values.end());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::string out = std::string(kAggregateHeader) + "\n";
  for (const auto& r : rows) {
    out += detail::csv_field(r.model_id) + ',' + detail::csv_field(r.index) + ',' +
           std::to_string(r.layer) + ',' + std::to_string(r.pairs) + ',' + format_score(r.mean) +
           ',' + format_score(r.spread_min) + ',' + format_score(r.spread_max) + '\n';
  }
  return out;
}

struct MatchRow {
  std::string model_id;
  std::string pair;
  int layer = 0;
  double accuracy = 0.0;
  long long hits = 0;
  long long m = 0;
  long long degenerate_count = 0;
};

inline std::string match_csv(std::vector<MatchRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const MatchRow& a, const MatchRow& b) {
    return std::tie(a.model_id, a.pair, a.layer) < std::tie(b.model_id, b.pair, b.layer);
  });
  std::string out = std::string(kMatchHeader) + "\n";
  for (const auto& r : rows) {
    out += detail::csv_field(r.model_id) + ',' + detail::csv_field(r.pair) + ',' +
           std::to_string(r.layer) + ',' + format_score(r.accuracy) + ',' + std::to_string(r.hits) +
           ',' + std::to_string(r.m) + ',' + std::to_string(r.degenerate_count) + '\n';
  }
  return out;
}

}  // namespace xsim::io
