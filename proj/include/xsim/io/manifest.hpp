#pragma once

// Extraction manifests: one JSON document per run listing every dump with
// the model, layer, language, pooling and parallel-corpus identity it
// belongs to.
//
//   {"format": "xsim-manifest", "version": 1, "entries": [
//     {"model_id": "bert-base-multilingual-cased", "layer_index": 0,
//      "language": "en", "pooling": "mean", "dataset_id": "xnli-1k",
//      "dataset_hash": "<hex>", "dump_path": "layer00_en.npy",
//      "m": 1000, "n": 768, "dump_sha256": "<hex, optional>"}, ...]}
//
// A bare top-level array of entries is accepted too. dump_path is relative
// to the manifest file's directory.

#include "xsim/core.hpp"
#include "xsim/io/hash.hpp"
#include "xsim/io/npy.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace xsim::io {

enum class Pooling { mean, cls };

inline std::string_view to_string(Pooling p) { return p == Pooling::mean ? "mean" : "cls"; }

struct ManifestEntry {
  std::string model_id;
  int layer_index = 0;
  std::string language;
  Pooling pooling = Pooling::mean;
  std::string dataset_id;
  std::string dataset_hash;
  std::string dump_path;  // as written in the manifest
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  std::optional<std::string> dump_sha256;

  std::filesystem::path resolved_path;  // dump_path joined to the manifest directory
};

namespace detail {

inline bool is_hex(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isxdigit(c) != 0;
  });
}

inline bool is_iso639_1(const std::string& s) {
  return s.size() == 2 && std::islower(static_cast<unsigned char>(s[0])) &&
         std::islower(static_cast<unsigned char>(s[1]));
}

inline ManifestEntry entry_from_json(const nlohmann::json& j, const std::string& where) {
  auto fail = [&](const std::string& why) { return Error(ErrorCode::FormatError, where + ": " + why); };
  ManifestEntry e;
  try {
    e.model_id = j.at("model_id").get<std::string>();
    e.layer_index = j.at("layer_index").get<int>();
    e.language = j.at("language").get<std::string>();
    const auto pooling = j.at("pooling").get<std::string>();
    if (pooling == "mean") {
      e.pooling = Pooling::mean;
    } else if (pooling == "cls") {
      e.pooling = Pooling::cls;
    } else {
      throw fail("pooling must be 'mean' or 'cls', got '" + pooling + "'");
    }
    e.dataset_id = j.at("dataset_id").get<std::string>();
    e.dataset_hash = j.at("dataset_hash").get<std::string>();
    e.dump_path = j.at("dump_path").get<std::string>();
    e.m = j.at("m").get<Eigen::Index>();
    e.n = j.at("n").get<Eigen::Index>();
    if (j.contains("dump_sha256")) e.dump_sha256 = j.at("dump_sha256").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw fail(ex.what());
  }
  if (e.layer_index < 0) throw fail("layer_index must be >= 0");
  if (!is_iso639_1(e.language)) throw fail("language '" + e.language + "' is not an ISO 639-1 code");
  if (!is_hex(e.dataset_hash)) throw fail("dataset_hash must be a hex string");
  if (e.dump_sha256 && !is_hex(*e.dump_sha256)) throw fail("dump_sha256 must be a hex string");
  if (e.m < 2 || e.n < 1) throw fail("m must be >= 2 and n >= 1");
  if (std::filesystem::path(e.dump_path).is_absolute()) throw fail("dump_path must be relative");
  return e;
}

}  // namespace detail

inline nlohmann::json to_json(const ManifestEntry& e) {
  nlohmann::json j = {{"model_id", e.model_id},
                      {"layer_index", e.layer_index},
                      {"language", e.language},
                      {"pooling", to_string(e.pooling)},
                      {"dataset_id", e.dataset_id},
                      {"dataset_hash", e.dataset_hash},
                      {"dump_path", e.dump_path},
                      {"m", e.m},
                      {"n", e.n}};
  if (e.dump_sha256) j["dump_sha256"] = *e.dump_sha256;
  return j;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  nlohmann::json doc = {{"format", "xsim-manifest"}, {"version", 1}, {"entries", nlohmann::json::array()}};
  for (const auto& e : entries) doc["entries"].push_back(to_json(e));
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::FormatError, path.string() + ": " + ex.what());
  }
  const nlohmann::json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("entries")) throw Error(ErrorCode::FormatError, path.string() + ": no 'entries'");
    list = &doc.at("entries");
  }
  if (!list->is_array()) throw Error(ErrorCode::FormatError, path.string() + ": entries must be an array");
  std::vector<ManifestEntry> out;
  const auto dir = path.parent_path();
  for (std::size_t i = 0; i < list->size(); ++i) {
    ManifestEntry e =
        detail::entry_from_json((*list)[i], path.string() + " entry " + std::to_string(i));
    e.resolved_path = dir / e.dump_path;
    out.push_back(std::move(e));
  }
  return out;
}

/// Dumps from one or more manifests, addressed by (model, layer, language,
/// dataset). Every address must be unique across the whole set.
class ManifestSet {
 public:
  ManifestSet() = default;

  explicit ManifestSet(std::vector<ManifestEntry> entries) {
    for (auto& e : entries) add(std::move(e));
  }

  static ManifestSet load(const std::vector<std::filesystem::path>& paths) {
    ManifestSet set;
    for (const auto& p : paths) {
      for (auto& e : read_manifest(p)) set.add(std::move(e));
    }
    return set;
  }

  void add(ManifestEntry e) {
    const Key key{e.model_id, e.layer_index, e.language, e.dataset_id};
    if (index_.count(key) != 0) {
      throw Error(ErrorCode::FormatError, "duplicate manifest entry for model '" + e.model_id +
                                              "' layer " + std::to_string(e.layer_index) +
                                              " language '" + e.language + "' dataset '" +
                                              e.dataset_id + "'");
    }
    index_.emplace(key, entries_.size());
    entries_.push_back(std::move(e));
  }

  const std::vector<ManifestEntry>& entries() const noexcept { return entries_; }

  std::vector<std::string> models() const {
    std::set<std::string> s;
    for (const auto& e : entries_) s.insert(e.model_id);
    return {s.begin(), s.end()};
  }

  std::vector<int> layers(const std::string& model) const {
    std::set<int> s;
    for (const auto& e : entries_) {
      if (e.model_id == model) s.insert(e.layer_index);
    }
    return {s.begin(), s.end()};
  }

  /// The single entry for (model, layer, language); MissingArtifact when
  /// absent, FormatError when several datasets would match.
  const ManifestEntry& find(const std::string& model, int layer, const std::string& language) const {
    const ManifestEntry* found = nullptr;
    for (const auto& e : entries_) {
      if (e.model_id == model && e.layer_index == layer && e.language == language) {
        if (found != nullptr) {
          throw Error(ErrorCode::FormatError,
                      "several dumps match model '" + model + "' layer " + std::to_string(layer) +
                          " language '" + language + "'");
        }
        found = &e;
      }
    }
    if (found == nullptr) {
      throw Error(ErrorCode::MissingArtifact, "no dump for model '" + model + "' layer " +
                                                  std::to_string(layer) + " language '" +
                                                  language + "'");
    }
    return *found;
  }

 private:
  using Key = std::tuple<std::string, int, std::string, std::string>;
  std::vector<ManifestEntry> entries_;
  std::map<Key, std::size_t> index_;
};

/// Rows of the two dumps must be translations of each other.
inline void check_parallel(const ManifestEntry& a, const ManifestEntry& b) {
  if (a.dataset_id != b.dataset_id || a.dataset_hash != b.dataset_hash) {
    throw Error(ErrorCode::AlignmentMismatch,
                "dumps for '" + a.language + "' and '" + b.language + "' (model '" + a.model_id +
                    "', layer " + std::to_string(a.layer_index) +
                    ") come from different datasets: " + a.dataset_id + "/" + a.dataset_hash +
                    " vs " + b.dataset_id + "/" + b.dataset_hash);
  }
  if (a.m != b.m) {
    throw Error(ErrorCode::ShapeMismatch, "parallel dumps declare different example counts");
  }
}

/// Reads the dump behind an entry, checking declared shape and, when the
/// manifest carries one, the content hash.
inline ActivationMatrix load_dump(const ManifestEntry& e) {
  if (e.dump_sha256) {
    const std::string actual = sha256_file(e.resolved_path);
    if (actual != *e.dump_sha256) {
      throw Error(ErrorCode::FormatError, e.resolved_path.string() + ": content hash " + actual +
                                              " does not match manifest " + *e.dump_sha256);
    }
  }
  ActivationMatrix a = read_activation_dump(e.resolved_path);
  if (a.m() != e.m || a.n() != e.n) {
    throw Error(ErrorCode::FormatError,
                e.resolved_path.string() + ": shape " + ::xsim::detail::shape_string(a.data()) + " but manifest declares " +
                    std::to_string(e.m) + "x" + std::to_string(e.n));
  }
  return a;
}

}  // namespace xsim::io
