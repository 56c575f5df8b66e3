// Compares two synthetic "languages" with every index, then shows how a
// column permutation separates ANC from CKA.

#include "xsim/xsim.hpp"

#include <cstdio>

int main() {
  using namespace xsim;
  const auto en = synth::random_matrix(42, 1000, 64);
  const auto fr = synth::random_matrix(42, 1000, 64, synth::Correlated{0.8, 1});
  const auto x = center_columns(en);
  const auto y = center_columns(fr);

  for (auto kind : {IndexKind::anc, IndexKind::cka, IndexKind::cca, IndexKind::svcca, IndexKind::pwcca}) {
    std::printf("%-6s %.6f\n", std::string(to_string(kind)).c_str(), compute_index(kind, x, y).score);
  }

  const auto shuffled = center_columns(synth::apply_transform(fr, synth::Permutation{7}));
  std::printf("after shuffling neurons: anc %.6f, cka %.6f\n", anc(x, shuffled).score,
              linear_cka(x, shuffled).score);
  std::printf("matching accuracy: %.3f\n", matching_accuracy(en, fr).accuracy);
  return 0;
}
