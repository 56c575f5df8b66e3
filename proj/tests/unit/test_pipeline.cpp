#include "xsim/pipeline.hpp"
#include "xsim/validate.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace xsim;
using namespace xsim::pipeline;
using xsim::testing::TempDir;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an xsim::Error";
  return ErrorCode::IoError;
}

GenConfig small_gen(const std::filesystem::path& dir) {
  GenConfig g;
  g.output_dir = dir;
  g.languages = {"en", "fr", "de"};
  g.layer_count = 3;
  g.m = 400;
  g.n = 12;
  g.rho = {0.9};
  g.seed = 3;
  return g;
}

RunConfig run_on(const std::filesystem::path& manifest, const std::string& pairs) {
  RunConfig c;
  c.manifest_paths = {manifest};
  for (const auto& p : split(pairs, ',')) c.pairs.push_back(parse_pair(p));
  return c;
}

}  // namespace

TEST(Parsing, Pairs) {
  const auto p = parse_pair("en-fr");
  EXPECT_EQ(p.source, "en");
  EXPECT_EQ(p.target, "fr");
  EXPECT_EQ(p.label(), "en-fr");
  EXPECT_EQ(code_of([] { parse_pair("enfr"); }), ErrorCode::InvalidParam);
}

TEST(Parsing, Layers) {
  EXPECT_FALSE(parse_layers("all").has_value());
  EXPECT_EQ(*parse_layers("0-2,5"), (std::vector<int>{0, 1, 2, 5}));
  EXPECT_EQ(*parse_layers("3,1,3"), (std::vector<int>{1, 3}));
  EXPECT_EQ(code_of([] { parse_layers("4-2"); }), ErrorCode::InvalidParam);
}

TEST(SampleRows, SortedDistinctAndSeeded) {
  const auto a = sample_rows(1, 100, 30);
  ASSERT_EQ(a.size(), 30u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::set<Eigen::Index>(a.begin(), a.end()).size(), 30u);
  EXPECT_EQ(a, sample_rows(1, 100, 30));
  EXPECT_NE(a, sample_rows(2, 100, 30));
  EXPECT_EQ(code_of([] { sample_rows(1, 10, 11); }), ErrorCode::InvalidParam);
}

TEST(ParallelFor, RethrowsJobFailure) {
  EXPECT_THROW(parallel_for(8, 3,
                            [](std::size_t i) {
                              if (i == 5) throw Error(ErrorCode::InvalidData, "boom");
                            }),
               Error);
}

TEST(Gen, WritesManifestAndDumps) {
  TempDir dir;
  const auto entries = cmd_gen(small_gen(dir.path()));
  EXPECT_EQ(entries.size(), 9u);
  const auto back = io::read_manifest(dir / "manifest.json");
  ASSERT_EQ(back.size(), 9u);
  for (const auto& e : back) {
    EXPECT_TRUE(std::filesystem::exists(e.resolved_path));
    EXPECT_NO_THROW(io::load_dump(e));
  }
  EXPECT_EQ(code_of([&] {
              auto g = small_gen(dir.path());
              g.languages = {"english"};
              cmd_gen(g);
            }),
            ErrorCode::InvalidParam);
}

TEST(Compare, SelfPairIsOne) {
  TempDir dir;
  cmd_gen(small_gen(dir.path()));
  auto c = run_on(dir / "manifest.json", "en-en");
  c.indexes = {IndexKind::anc, IndexKind::cka, IndexKind::cca};
  const auto out = cmd_compare(c);
  ASSERT_EQ(out.curves.size(), 3u);
  for (const auto& curve : out.curves) {
    ASSERT_EQ(curve.scores.size(), 3u);
    for (double s : curve.scores) EXPECT_NEAR(s, 1.0, 1e-9) << curve.index;
  }
}

TEST(Compare, PlantedCorrelationRecovered) {
  TempDir dir;
  GenConfig g = small_gen(dir.path());
  g.m = 1000;
  g.n = 50;
  g.languages = {"en", "fr"};
  g.layer_count = 1;
  cmd_gen(g);
  const auto out = cmd_compare(run_on(dir / "manifest.json", "en-fr"));
  EXPECT_NEAR(out.curves.at(0).scores.at(0), 0.9, 0.03);
}

TEST(Compare, PerLayerRhoShapesTheCurve) {
  TempDir dir;
  GenConfig g = small_gen(dir.path());
  g.m = 1000;
  g.languages = {"en", "fr"};
  g.rho = {0.2, 0.5, 0.8};
  cmd_gen(g);
  const auto out = cmd_compare(run_on(dir / "manifest.json", "en-fr"));
  const auto& s = out.curves.at(0).scores;
  EXPECT_LT(s[0], s[1]);
  EXPECT_LT(s[1], s[2]);
}

TEST(Compare, WritesFilesAndAggregate) {
  TempDir dir;
  cmd_gen(small_gen(dir / "data"));
  auto c = run_on(dir / "data" / "manifest.json", "en-fr,en-de");
  c.output_dir = dir / "out";
  const auto out = cmd_compare(c);
  const auto csv = io::read_text(dir / "out" / "scores.csv");
  EXPECT_EQ(io::parse_scores_csv(csv).size(), 2u);
  EXPECT_EQ(out.aggregate.size(), 3u);
  EXPECT_EQ(out.aggregate[0].pairs, 2);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "aggregate.csv"));

  c.format = io::ResultFormat::json;
  cmd_compare(c);
  const auto json = io::parse_scores_json(io::read_text(dir / "out" / "scores.json"));
  ASSERT_EQ(json.size(), 2u);
  EXPECT_EQ(json, io::parse_scores_json(io::scores_json(out.curves).dump()));
}

TEST(Compare, MissingLanguageIsMissingArtifact) {
  TempDir dir;
  cmd_gen(small_gen(dir.path()));
  try {
    cmd_compare(run_on(dir / "manifest.json", "en-ja"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingArtifact);
    EXPECT_NE(std::string(e.what()).find("'ja'"), std::string::npos);
  }
}

TEST(Compare, MissingLayerIsMissingArtifact) {
  TempDir dir;
  cmd_gen(small_gen(dir.path()));
  auto c = run_on(dir / "manifest.json", "en-fr");
  c.layers = std::vector<int>{7};
  EXPECT_EQ(code_of([&] { cmd_compare(c); }), ErrorCode::MissingArtifact);
}

TEST(Compare, DatasetMismatchIsAlignmentMismatch) {
  TempDir dir;
  auto a = small_gen(dir / "a");
  a.languages = {"en"};
  cmd_gen(a);
  auto b = small_gen(dir / "b");
  b.languages = {"fr"};
  b.dataset_id = "other";
  cmd_gen(b);
  auto c = run_on(dir / "a" / "manifest.json", "en-fr");
  c.manifest_paths.push_back(dir / "b" / "manifest.json");
  EXPECT_EQ(code_of([&] { cmd_compare(c); }), ErrorCode::AlignmentMismatch);
}

TEST(Compare, ByteIdenticalAcrossRunsAndThreads) {
  TempDir dir;
  cmd_gen(small_gen(dir / "data"));
  auto c = run_on(dir / "data" / "manifest.json", "en-fr,en-de,fr-de");
  c.indexes = {IndexKind::anc, IndexKind::cka, IndexKind::cca, IndexKind::svcca, IndexKind::pwcca};
  c.output_dir = dir / "one";
  cmd_compare(c);
  c.output_dir = dir / "two";
  cmd_compare(c);
  c.output_dir = dir / "threaded";
  c.threads = 4;
  cmd_compare(c);
  const auto one = io::read_text(dir / "one" / "scores.csv");
  EXPECT_EQ(one, io::read_text(dir / "two" / "scores.csv"));
  EXPECT_EQ(one, io::read_text(dir / "threaded" / "scores.csv"));
  EXPECT_EQ(io::read_text(dir / "one" / "aggregate.csv"), io::read_text(dir / "threaded" / "aggregate.csv"));
}

TEST(Compare, SampleSizeKeepsRowsAligned) {
  TempDir dir;
  cmd_gen(small_gen(dir.path()));
  auto c = run_on(dir / "manifest.json", "en-en,en-fr");
  c.sample_size = 50;
  c.seed = 9;
  const auto sampled = cmd_compare(c);
  // A self pair stays exactly similar only if both sides keep the same rows.
  for (double s : sampled.curves[0].scores) EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_EQ(sampled.curves, cmd_compare(c).curves);
  c.seed = 10;
  EXPECT_NE(sampled.curves[1].scores, cmd_compare(c).curves[1].scores);
  c.sample_size = 5000;
  EXPECT_EQ(code_of([&] { cmd_compare(c); }), ErrorCode::InvalidParam);
}

TEST(Neurons, SelfPairAllOnes) {
  const auto x = center_columns(synth::random_matrix(1, 100, 8));
  const auto r = neuron_report(x, x, 3);
  ASSERT_EQ(r.descending.size(), 3u);
  for (const auto& e : r.descending) EXPECT_NEAR(e.abs_correlation, 1.0, 1e-12);
  EXPECT_NEAR(r.mean, 1.0, 1e-12);
}

TEST(Neurons, IndependentNeuronInBottom) {
  TempDir dir;
  GenConfig g = small_gen(dir / "data");
  g.m = 1000;
  g.n = 20;
  g.languages = {"en", "fr"};
  g.layer_count = 1;
  g.independent_neurons = {7};
  cmd_gen(g);
  auto c = run_on(dir / "data" / "manifest.json", "en-fr");
  c.output_dir = dir / "out";
  const auto reports = cmd_neurons(c, parse_pair("en-fr"), 0, 3);
  ASSERT_EQ(reports.size(), 1u);
  const auto& r = reports[0];
  ASSERT_EQ(r.ascending.size(), 3u);
  EXPECT_EQ(r.ascending[0].neuron, 7);
  EXPECT_LT(r.ascending[0].abs_correlation, 0.1);
  for (const auto& e : r.descending) EXPECT_NE(e.neuron, 7);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "neurons_en-fr_L0.json"));
}

TEST(Neurons, SummaryMatchesAnc) {
  const auto x = center_columns(synth::random_matrix(2, 200, 10));
  const auto y = center_columns(synth::random_matrix(2, 200, 10, synth::Correlated{0.5, 1}));
  const auto r = neuron_report(x, y, 0);
  EXPECT_TRUE(r.descending.empty());
  EXPECT_TRUE(r.ascending.empty());
  EXPECT_DOUBLE_EQ(r.mean, anc(x, y).score);
  EXPECT_LE(r.min, r.mean);
  EXPECT_GE(r.max, r.mean);
}

TEST(Neurons, OversizedKClampsWithWarning) {
  const auto x = center_columns(synth::random_matrix(3, 50, 4));
  const auto r = neuron_report(x, x, 10);
  EXPECT_EQ(r.descending.size(), 4u);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(to_json(r)["warnings"].size(), 1u);
}

TEST(Match, SelfPairIsPerfect) {
  TempDir dir;
  cmd_gen(small_gen(dir.path()));
  const auto rows = cmd_match(run_on(dir / "manifest.json", "en-en,en-fr"));
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& r : rows) {
    if (r.pair == "en-en") EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  }
}

TEST(Match, DimensionMismatchIsShapeMismatch) {
  TempDir dir;
  auto a = small_gen(dir / "a");
  a.languages = {"en"};
  cmd_gen(a);
  auto b = small_gen(dir / "b");
  b.languages = {"fr"};
  b.n = 13;
  cmd_gen(b);
  auto c = run_on(dir / "a" / "manifest.json", "en-fr");
  c.manifest_paths.push_back(dir / "b" / "manifest.json");
  EXPECT_EQ(code_of([&] { cmd_match(c); }), ErrorCode::ShapeMismatch);
}

TEST(Validate, CleanBuildPasses) {
  validate::SuiteOptions opts;
  opts.seed_count = 3;
  const auto report = validate::run_suite(opts);
  for (const auto& p : report.properties) {
    EXPECT_TRUE(p.passed) << p.name << " worst " << p.worst;
    EXPECT_EQ(p.trials, 3) << p.name;
  }
  EXPECT_TRUE(report.passed());
}

TEST(Validate, InjectedFaultIsCaught) {
  validate::SuiteOptions opts;
  opts.seed_count = 3;
  opts.fault = validate::Fault::anc_no_abs;
  const auto report = validate::run_suite(opts);
  EXPECT_FALSE(report.passed());
  bool affine_failed = false;
  for (const auto& p : report.properties) {
    if (p.name == "anc_invariant_per_neuron_affine") affine_failed = !p.passed;
  }
  EXPECT_TRUE(affine_failed);
}

TEST(Validate, SingleSeedRunsOneTrial) {
  validate::SuiteOptions opts;
  opts.seed_count = 1;
  const auto report = validate::run_suite(opts);
  for (const auto& p : report.properties) EXPECT_EQ(p.trials, 1) << p.name;
  EXPECT_EQ(validate::to_json(report)["properties"].size(), report.properties.size());
}
