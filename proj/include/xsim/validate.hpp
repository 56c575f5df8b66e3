#pragma once

// Invariance suite: checks every index against the transformations it is
// supposed to ignore (and ANC against the one it must not ignore), over a
// number of seeded trials.

#include "xsim/core.hpp"
#include "xsim/indexes.hpp"
#include "xsim/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace xsim::validate {

enum class Fault {
  none,
  anc_no_abs,  // ANC averages signed correlations
};

inline Fault parse_fault(std::string_view s) {
  if (s.empty() || s == "none") return Fault::none;
  if (s == "anc-no-abs") return Fault::anc_no_abs;
  throw Error(ErrorCode::InvalidParam, "unknown fault '" + std::string(s) + "'");
}

enum class Bound { below, above };

struct PropertyResult {
  std::string name;
  int trials = 0;
  double worst = 0.0;  // largest drift for `below`, smallest margin for `above`
  double threshold = 0.0;
  Bound bound = Bound::below;
  bool passed = true;
};

struct Report {
  std::vector<PropertyResult> properties;
  bool passed() const {
    return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.passed; });
  }
};

struct SuiteOptions {
  int seed_count = 20;
  std::uint64_t base_seed = 1000;
  Fault fault = Fault::none;
  Eigen::Index m = 200;
  Eigen::Index n = 20;
};

namespace detail {

using synth::random_matrix;

class Recorder {
 public:
  Recorder(std::string name, double threshold, Bound bound) {
    result_.name = std::move(name);
    result_.threshold = threshold;
    result_.bound = bound;
    result_.worst = bound == Bound::below ? 0.0 : std::numeric_limits<double>::infinity();
  }

  void observe(double value) {
    ++result_.trials;
    if (!std::isfinite(value)) {
      result_.passed = false;
      result_.worst = value;
      return;
    }
    if (result_.bound == Bound::below) {
      result_.worst = std::max(result_.worst, value);
      if (!(value < result_.threshold)) result_.passed = false;
    } else {
      result_.worst = std::min(result_.worst, value);
      if (!(value > result_.threshold)) result_.passed = false;
    }
  }

  PropertyResult result() const { return result_; }

 private:
  PropertyResult result_;
};

}  // namespace detail

inline Report run_suite(const SuiteOptions& opts = {}) {
  using namespace synth;
  const auto anc_fn = [&](const CenteredMatrix& x, const CenteredMatrix& y) {
    return ::xsim::detail::anc_impl(x, y, DegeneratePolicy::zero, opts.fault != Fault::anc_no_abs).score;
  };
  const auto cka_fn = [](const CenteredMatrix& x, const CenteredMatrix& y) { return linear_cka(x, y).score; };
  const auto cca_fn = [](const CenteredMatrix& x, const CenteredMatrix& y) { return cca(x, y).score; };
  const auto svcca_fn = [](const CenteredMatrix& x, const CenteredMatrix& y) { return svcca(x, y, 1.0).score; };

  detail::Recorder cka_dual("cka_spectral_equals_gram", 1e-8, Bound::below);
  detail::Recorder cka_orth("cka_invariant_orthogonal", 1e-8, Bound::below);
  detail::Recorder cka_scale("cka_invariant_isotropic_scale", 1e-8, Bound::below);
  detail::Recorder cka_perm("cka_invariant_permutation", 1e-8, Bound::below);
  detail::Recorder cca_inv("cca_invariant_invertible", 1e-6, Bound::below);
  detail::Recorder svcca_inv("svcca_1.0_invariant_invertible", 1e-6, Bound::below);
  detail::Recorder svcca_cca("svcca_1.0_equals_cca", 1e-8, Bound::below);
  detail::Recorder anc_affine("anc_invariant_per_neuron_affine", 1e-10, Bound::below);
  detail::Recorder anc_drop("anc_drop_under_derangement", 0.3, Bound::above);
  detail::Recorder gap("anc_minus_cka_dominant_direction", 0.3, Bound::above);
  detail::Recorder range("scores_exceed_unit_interval", 1e-9, Bound::below);

  for (int t = 0; t < opts.seed_count; ++t) {
    const std::uint64_t seed = opts.base_seed + static_cast<std::uint64_t>(t);
    const auto x_raw = random_matrix(seed, opts.m, opts.n);
    const auto y_raw = random_matrix(seed, opts.m, opts.n, Correlated{0.6, 1});
    const auto x = center_columns(x_raw);
    const auto y = center_columns(y_raw);
    auto transformed = [&](const Transform& tr) { return center_columns(apply_transform(y_raw, tr)); };

    {
      Rng shape_rng(seed, 0x77);
      const auto m = static_cast<Eigen::Index>(10 + shape_rng.below(191));
      const auto n = static_cast<Eigen::Index>(2 + shape_rng.below(49));
      const auto a = center_columns(random_matrix(seed, m, n));
      const auto b = center_columns(random_matrix(seed, m, n, Correlated{0.5, 2}));
      cka_dual.observe(std::abs(linear_cka(a, b, CkaMethod::spectral).score - linear_cka(a, b, CkaMethod::gram).score));
    }

    const double cka0 = cka_fn(x, y);
    cka_orth.observe(std::abs(cka_fn(x, transformed(Orthogonal{seed})) - cka0));
    cka_scale.observe(std::abs(cka_fn(x, transformed(IsotropicScale{0.25 + 0.5 * static_cast<double>(t)})) - cka0));
    cka_perm.observe(std::abs(cka_fn(x, transformed(Permutation{seed})) - cka0));

    const auto y_inv = transformed(Invertible{seed});
    const double cca0 = cca_fn(x, y);
    cca_inv.observe(std::abs(cca_fn(x, y_inv) - cca0));
    svcca_inv.observe(std::abs(svcca_fn(x, y_inv) - svcca_fn(x, y)));
    svcca_cca.observe(std::abs(svcca_fn(x, y) - cca0));

    const auto x_aff = center_columns(apply_transform(x_raw, PerNeuronAffine{seed + 1}));
    const auto y_aff = transformed(PerNeuronAffine{seed});
    anc_affine.observe(std::max(std::abs(anc_fn(x, y_aff) - anc_fn(x, y)),
                                std::abs(anc_fn(x_aff, y_aff) - anc_fn(x, y))));

    {
      const auto base = random_matrix(seed, 1000, 100);
      const auto partner = random_matrix(seed, 1000, 100, Correlated{0.9, 1});
      const auto bc = center_columns(base);
      const double aligned = anc_fn(bc, center_columns(partner));
      const double deranged = anc_fn(bc, center_columns(apply_transform(partner, Permutation{seed})));
      anc_drop.observe(aligned - deranged);
    }

    {
      synth::DisagreementParams p;
      p.seed = seed;
      const auto pair = disagreement_pair(p);
      const auto dx = center_columns(pair.x);
      const auto dy = center_columns(pair.y);
      gap.observe(anc_fn(dx, dy) - cka_fn(dx, dy));
    }

    double excess = 0.0;
    for (double s : {anc_fn(x, y), cka0, cca0, svcca(x, y).score, pwcca(x, y).score, pwcca(y, x).score}) {
      excess = std::max({excess, s - 1.0, -s});
    }
    range.observe(excess);
  }

  Report report;
  for (const auto* r : {&cka_dual, &cka_orth, &cka_scale, &cka_perm, &cca_inv, &svcca_inv, &svcca_cca,
                        &anc_affine, &anc_drop, &gap, &range}) {
    report.properties.push_back(r->result());
  }
  return report;
}

inline nlohmann::json to_json(const Report& report) {
  nlohmann::json props = nlohmann::json::array();
  for (const auto& p : report.properties) {
    props.push_back({{"name", p.name},
                     {"trials", p.trials},
                     {"worst", p.worst},
                     {"threshold", p.threshold},
                     {"bound", p.bound == Bound::below ? "below" : "above"},
                     {"passed", p.passed}});
  }
  return {{"passed", report.passed()}, {"properties", props}};
}

}  // namespace xsim::validate
