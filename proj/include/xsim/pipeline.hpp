#pragma once

// Batch workflows behind the CLI: per-layer index curves across language
// pairs, per-neuron correlation reports, the matching probe, and synthetic
// dump generation.

#include "xsim/core.hpp"
#include "xsim/indexes.hpp"
#include "xsim/io/hash.hpp"
#include "xsim/io/manifest.hpp"
#include "xsim/io/npy.hpp"
#include "xsim/io/results.hpp"
#include "xsim/probes.hpp"
#include "xsim/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace xsim::pipeline {

struct LanguagePair {
  std::string source;
  std::string target;

  std::string label() const { return source + "-" + target; }
  bool operator==(const LanguagePair&) const = default;
};

inline LanguagePair parse_pair(const std::string& text) {
  const auto dash = text.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 == text.size() ||
      text.find('-', dash + 1) != std::string::npos) {
    throw Error(ErrorCode::InvalidParam, "language pair must look like 'en-fr', got '" + text + "'");
  }
  return LanguagePair{text.substr(0, dash), text.substr(dash + 1)};
}

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// `all`, or a comma list of layers and inclusive ranges ("0-4,8,12").
/// nullopt means every layer the manifests declare.
using LayerSelection = std::optional<std::vector<int>>;

inline LayerSelection parse_layers(const std::string& text) {
  if (text.empty() || text == "all") return std::nullopt;
  std::set<int> layers;
  for (const auto& part : split(text, ',')) {
    try {
      const auto dash = part.find('-');
      std::size_t used = 0;
      if (dash == std::string::npos) {
        const int v = std::stoi(part, &used);
        if (used != part.size() || v < 0) throw std::invalid_argument(part);
        layers.insert(v);
      } else {
        const std::string lo_s = part.substr(0, dash), hi_s = part.substr(dash + 1);
        const int lo = std::stoi(lo_s, &used);
        if (used != lo_s.size()) throw std::invalid_argument(part);
        const int hi = std::stoi(hi_s, &used);
        if (used != hi_s.size() || lo < 0 || hi < lo) throw std::invalid_argument(part);
        for (int l = lo; l <= hi; ++l) layers.insert(l);
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidParam, "bad layer selection '" + part + "'");
    }
  }
  return std::vector<int>(layers.begin(), layers.end());
}

struct RunConfig {
  std::vector<std::filesystem::path> manifest_paths;
  std::vector<IndexKind> indexes = {IndexKind::anc};
  std::vector<LanguagePair> pairs;
  LayerSelection layers;
  double svcca_threshold = kDefaultSvccaThreshold;
  DegeneratePolicy anc_policy = DegeneratePolicy::zero;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  std::optional<Eigen::Index> sample_size;
  io::ResultFormat format = io::ResultFormat::csv;
  unsigned threads = 1;
};

/// Runs `job(i)` for i in [0, count) on at most `threads` workers. Each job
/// writes only its own output slot, so results do not depend on scheduling.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Sorted row indices of a seeded sample of size s out of m. The same
/// (seed, m, s) always yields the same rows, so both languages of a pair
/// keep their alignment.
inline std::vector<Eigen::Index> sample_rows(std::uint64_t seed, Eigen::Index m, Eigen::Index s) {
  if (s < 2 || s > m) {
    throw Error(ErrorCode::InvalidParam, "sample size must lie in [2, " + std::to_string(m) + "], got " +
                                             std::to_string(s));
  }
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) rows[static_cast<std::size_t>(i)] = i;
  synth::Rng rng(seed, 0x5A);
  for (Eigen::Index i = 0; i < s; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(m - i)));
    std::swap(rows[static_cast<std::size_t>(i)], rows[j]);
  }
  rows.resize(static_cast<std::size_t>(s));
  std::sort(rows.begin(), rows.end());
  return rows;
}

namespace detail {

inline std::vector<int> resolve_layers(const io::ManifestSet& set, const std::string& model,
                                       const LayerSelection& selection) {
  if (selection) return *selection;
  return set.layers(model);
}

inline std::vector<std::string> languages_of(const std::vector<LanguagePair>& pairs) {
  std::set<std::string> langs;
  for (const auto& p : pairs) {
    langs.insert(p.source);
    langs.insert(p.target);
  }
  return {langs.begin(), langs.end()};
}

/// Activations of every language needed at one (model, layer), after
/// alignment checks and optional row subsampling.
inline std::map<std::string, ActivationMatrix> load_layer(const io::ManifestSet& set, const RunConfig& config,
                                                          const std::string& model, int layer) {
  std::map<std::string, const io::ManifestEntry*> entries;
  for (const auto& lang : languages_of(config.pairs)) entries[lang] = &set.find(model, layer, lang);
  for (const auto& p : config.pairs) io::check_parallel(*entries.at(p.source), *entries.at(p.target));

  std::map<std::string, ActivationMatrix> out;
  for (const auto& [lang, entry] : entries) {
    ActivationMatrix a = io::load_dump(*entry);
    if (config.sample_size) {
      const auto rows = sample_rows(config.seed, a.m(), *config.sample_size);
      Matrix sub(static_cast<Eigen::Index>(rows.size()), a.n());
      for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = a.data().row(rows[i]);
      a = ActivationMatrix(std::move(sub));
    }
    out.emplace(lang, std::move(a));
  }
  return out;
}

inline void require_pairs(const RunConfig& config) {
  if (config.pairs.empty()) throw Error(ErrorCode::InvalidParam, "no language pairs requested");
}

}  // namespace detail

struct CompareOutput {
  std::vector<io::LayerCurve> curves;
  std::vector<io::AggregateRow> aggregate;
};

inline CompareOutput run_compare(const io::ManifestSet& set, const RunConfig& config) {
  detail::require_pairs(config);
  if (config.indexes.empty()) throw Error(ErrorCode::InvalidParam, "no indexes requested");
  const IndexOptions opts{config.svcca_threshold, config.anc_policy, CkaMethod::gram};

  CompareOutput out;
  for (const auto& model : set.models()) {
    const auto layers = detail::resolve_layers(set, model, config.layers);
    // curve slot per (pair, index)
    std::vector<io::LayerCurve> curves;
    for (const auto& p : config.pairs) {
      for (auto kind : config.indexes) {
        curves.push_back(io::LayerCurve{model, std::string(to_string(kind)), p.label(), {}, {}, {}});
      }
    }
    for (int layer : layers) {
      const auto acts = detail::load_layer(set, config, model, layer);
      std::map<std::string, CenteredMatrix> centered;
      for (const auto& [lang, a] : acts) centered.emplace(lang, center_columns(a));

      std::vector<SimilarityResult> results(curves.size());
      parallel_for(curves.size(), config.threads, [&](std::size_t job) {
        const auto& p = config.pairs[job / config.indexes.size()];
        const auto kind = config.indexes[job % config.indexes.size()];
        results[job] = compute_index(kind, centered.at(p.source), centered.at(p.target), opts);
      });
      for (std::size_t j = 0; j < curves.size(); ++j) {
        curves[j].layers.push_back(layer);
        curves[j].scores.push_back(results[j].score);
        curves[j].degenerate_counts.push_back(results[j].degenerate_count);
      }
    }
    for (auto& c : curves) out.curves.push_back(std::move(c));
  }
  out.aggregate = io::aggregate_across_pairs(out.curves);
  return out;
}

/// Loads the manifests, runs the comparison and writes
/// `scores.csv` (or `scores.json`) plus `aggregate.csv` into the output directory.
inline CompareOutput cmd_compare(const RunConfig& config) {
  const auto set = io::ManifestSet::load(config.manifest_paths);
  CompareOutput out = run_compare(set, config);
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    if (config.format == io::ResultFormat::csv) {
      io::write_results(config.output_dir / "scores.csv", out.curves, io::ResultFormat::csv);
    } else {
      io::write_results(config.output_dir / "scores.json", out.curves, io::ResultFormat::json);
    }
    io::write_text(config.output_dir / "aggregate.csv", io::aggregate_csv(out.aggregate));
  }
  return out;
}

struct NeuronEntry {
  Eigen::Index neuron = 0;
  double abs_correlation = 0.0;
  bool degenerate = false;
};

struct NeuronReport {
  std::string model_id;
  std::string pair;
  int layer = 0;
  std::vector<NeuronEntry> descending;  // top-k by |correlation|
  std::vector<NeuronEntry> ascending;   // bottom-k by |correlation|
  double mean = 0.0;                    // equals the ANC score
  double min = 0.0;
  double max = 0.0;
  std::vector<std::string> warnings;
};

inline NeuronReport neuron_report(const CenteredMatrix& x, const CenteredMatrix& y, std::size_t k,
                                  DegeneratePolicy policy = DegeneratePolicy::zero) {
  const SimilarityResult r = anc(x, y, policy);
  const auto& comps = *r.components;
  NeuronReport report;
  std::vector<NeuronEntry> all;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (policy == DegeneratePolicy::skip && r.degenerate[i]) continue;
    all.push_back({static_cast<Eigen::Index>(i), comps[i], r.degenerate[i]});
  }
  if (k > comps.size()) {
    report.warnings.push_back("k=" + std::to_string(k) + " exceeds neuron count " +
                              std::to_string(comps.size()) + "; clamped");
  }
  k = std::min(k, all.size());
  // Ties are ordered by neuron index in both views.
  std::vector<NeuronEntry> asc = all;
  std::stable_sort(asc.begin(), asc.end(),
                   [](const NeuronEntry& a, const NeuronEntry& b) { return a.abs_correlation < b.abs_correlation; });
  std::vector<NeuronEntry> desc = all;
  std::stable_sort(desc.begin(), desc.end(),
                   [](const NeuronEntry& a, const NeuronEntry& b) { return a.abs_correlation > b.abs_correlation; });
  report.ascending.assign(asc.begin(), asc.begin() + static_cast<std::ptrdiff_t>(k));
  report.descending.assign(desc.begin(), desc.begin() + static_cast<std::ptrdiff_t>(k));
  report.mean = r.score;
  report.min = asc.front().abs_correlation;
  report.max = desc.front().abs_correlation;
  return report;
}

inline nlohmann::json to_json(const NeuronReport& r) {
  auto entries = [](const std::vector<NeuronEntry>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : v) {
      arr.push_back({{"neuron", e.neuron}, {"abs_correlation", e.abs_correlation}, {"degenerate", e.degenerate}});
    }
    return arr;
  };
  return {{"model_id", r.model_id},
          {"pair", r.pair},
          {"layer", r.layer},
          {"top", entries(r.descending)},
          {"bottom", entries(r.ascending)},
          {"summary", {{"mean", r.mean}, {"min", r.min}, {"max", r.max}}},
          {"warnings", r.warnings}};
}

/// Per-neuron report for every model in the manifests at one (pair, layer).
inline std::vector<NeuronReport> cmd_neurons(const RunConfig& config, const LanguagePair& pair, int layer,
                                             std::size_t k) {
  const auto set = io::ManifestSet::load(config.manifest_paths);
  RunConfig single = config;
  single.pairs = {pair};
  std::vector<NeuronReport> reports;
  for (const auto& model : set.models()) {
    const auto acts = detail::load_layer(set, single, model, layer);
    NeuronReport r = neuron_report(center_columns(acts.at(pair.source)), center_columns(acts.at(pair.target)), k,
                                   config.anc_policy);
    r.model_id = model;
    r.pair = pair.label();
    r.layer = layer;
    reports.push_back(std::move(r));
  }
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : reports) doc.push_back(to_json(r));
    io::write_text(config.output_dir / ("neurons_" + pair.label() + "_L" + std::to_string(layer) + ".json"),
                   doc.dump(2) + "\n");
  }
  return reports;
}

inline std::vector<io::MatchRow> run_match(const io::ManifestSet& set, const RunConfig& config) {
  detail::require_pairs(config);
  std::vector<io::MatchRow> rows;
  for (const auto& model : set.models()) {
    for (int layer : detail::resolve_layers(set, model, config.layers)) {
      const auto acts = detail::load_layer(set, config, model, layer);
      for (const auto& p : config.pairs) {
        const MatchingReport rep = matching_accuracy(acts.at(p.source), acts.at(p.target), config.threads);
        rows.push_back(io::MatchRow{model, p.label(), layer, rep.accuracy, rep.hits, rep.m, rep.degenerate_count});
      }
    }
  }
  return rows;
}

/// Matching accuracy per (model, pair, layer), written to `match.csv`.
inline std::vector<io::MatchRow> cmd_match(const RunConfig& config) {
  const auto set = io::ManifestSet::load(config.manifest_paths);
  auto rows = run_match(set, config);
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    io::write_text(config.output_dir / "match.csv", io::match_csv(rows));
  }
  return rows;
}

struct GenConfig {
  std::filesystem::path output_dir;
  std::string model_id = "synthetic";
  std::string dataset_id = "synthetic";
  std::vector<std::string> languages = {"en", "fr"};
  int layer_count = 13;
  Eigen::Index m = 1000;
  Eigen::Index n = 100;
  std::vector<double> rho = {0.9};  // one value, or one per layer
  std::uint64_t seed = 0;
  std::vector<Eigen::Index> independent_neurons;  // pure noise in every non-reference language
};

/// Writes one dump per (layer, language) plus `manifest.json`. The first
/// language is the reference; every other language correlates neuron-wise
/// with it at the layer's rho.
inline std::vector<io::ManifestEntry> cmd_gen(const GenConfig& g) {
  if (g.languages.empty()) throw Error(ErrorCode::InvalidParam, "gen needs at least one language");
  if (g.layer_count < 1) throw Error(ErrorCode::InvalidParam, "gen needs at least one layer");
  if (g.rho.size() != 1 && g.rho.size() != static_cast<std::size_t>(g.layer_count)) {
    throw Error(ErrorCode::InvalidParam, "rho must have one value or one per layer");
  }
  for (const auto& lang : g.languages) {
    if (!io::detail::is_iso639_1(lang)) {
      throw Error(ErrorCode::InvalidParam, "language '" + lang + "' is not an ISO 639-1 code");
    }
  }
  for (auto j : g.independent_neurons) {
    if (j < 0 || j >= g.n) throw Error(ErrorCode::InvalidParam, "independent neuron index out of range");
  }
  std::filesystem::create_directories(g.output_dir);
  const std::string dataset_hash = io::sha256_hex("xsim-synthetic\n" + g.dataset_id + "\n" +
                                                  std::to_string(g.seed) + "\n" + std::to_string(g.m));
  std::vector<io::ManifestEntry> entries;
  for (int layer = 0; layer < g.layer_count; ++layer) {
    const double rho = g.rho.size() == 1 ? g.rho[0] : g.rho[static_cast<std::size_t>(layer)];
    const std::uint64_t layer_seed = synth::splitmix64(g.seed + static_cast<std::uint64_t>(layer));
    for (std::size_t k = 0; k < g.languages.size(); ++k) {
      Matrix data = k == 0 ? synth::random_matrix(layer_seed, g.m, g.n).data()
                           : synth::random_matrix(layer_seed, g.m, g.n, synth::Correlated{rho, k}).data();
      if (k > 0 && !g.independent_neurons.empty()) {
        const Matrix noise =
            synth::random_matrix(layer_seed, g.m, g.n, synth::Correlated{0.0, 1000 + k}).data();
        for (auto j : g.independent_neurons) data.col(j) = noise.col(j);
      }
      char name[64];
      std::snprintf(name, sizeof name, "L%02d_%s.npy", layer, g.languages[k].c_str());
      const auto path = g.output_dir / name;
      io::write_npy(path, data);
      io::ManifestEntry e;
      e.model_id = g.model_id;
      e.layer_index = layer;
      e.language = g.languages[k];
      e.pooling = io::Pooling::mean;
      e.dataset_id = g.dataset_id;
      e.dataset_hash = dataset_hash;
      e.dump_path = name;
      e.m = g.m;
      e.n = g.n;
      e.dump_sha256 = io::sha256_file(path);
      e.resolved_path = path;
      entries.push_back(std::move(e));
    }
  }
  io::write_manifest(g.output_dir / "manifest.json", entries);
  return entries;
}

}  // namespace xsim::pipeline
