// xsim: cross-lingual representational similarity from activation dumps.

#include "xsim/xsim.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <thread>

namespace {

using namespace xsim;

struct CommonFlags {
  std::vector<std::string> manifests;
  std::string pairs;
  std::string layers = "all";
  std::string indexes = "anc";
  double svcca_threshold = kDefaultSvccaThreshold;
  std::string anc_policy = "zero";
  long long sample_size = 0;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string format = "csv";
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

void add_run_flags(CLI::App* cmd, CommonFlags& f, bool with_indexes) {
  cmd->add_option("--manifest", f.manifests, "Manifest JSON file (repeatable)")->required();
  cmd->add_option("--pairs", f.pairs, "Comma-separated language pairs, e.g. en-fr,en-de")->required();
  cmd->add_option("--layers", f.layers, "'all' or a list/range such as 0-12 or 0,6,12");
  if (with_indexes) {
    cmd->add_option("--indexes", f.indexes, "Comma-separated subset of anc,cka,cca,svcca,pwcca");
    cmd->add_option("--svcca-threshold", f.svcca_threshold, "Retained variance for SVCCA, in (0,1]");
    cmd->add_option("--format", f.format, "csv or json");
  }
  cmd->add_option("--anc-policy", f.anc_policy, "Zero-variance neuron handling: zero or skip");
  cmd->add_option("--sample-size", f.sample_size, "Aligned random subsample of rows (0 = all)");
  cmd->add_option("--seed", f.seed, "Seed for subsampling");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--threads", f.threads, "Worker threads");
}

pipeline::RunConfig to_config(const CommonFlags& f) {
  pipeline::RunConfig c;
  for (const auto& m : f.manifests) c.manifest_paths.emplace_back(m);
  c.indexes.clear();
  for (const auto& name : pipeline::split(f.indexes, ',')) c.indexes.push_back(parse_index_kind(name));
  for (const auto& p : pipeline::split(f.pairs, ',')) c.pairs.push_back(pipeline::parse_pair(p));
  c.layers = pipeline::parse_layers(f.layers);
  c.svcca_threshold = f.svcca_threshold;
  c.anc_policy = parse_degenerate_policy(f.anc_policy);
  if (f.sample_size > 0) c.sample_size = static_cast<Eigen::Index>(f.sample_size);
  c.seed = f.seed;
  c.output_dir = f.out;
  c.format = io::parse_result_format(f.format);
  c.threads = f.threads;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xsim: cross-lingual representational similarity (ANC, CKA, CCA, SVCCA, PWCCA)"};
  app.require_subcommand(1);

  CommonFlags compare_flags;
  auto* compare = app.add_subcommand("compare", "Per-layer similarity curves for language pairs");
  add_run_flags(compare, compare_flags, true);

  CommonFlags match_flags;
  auto* match = app.add_subcommand("match", "Per-layer cosine nearest-neighbour matching accuracy");
  add_run_flags(match, match_flags, false);

  CommonFlags neuron_flags;
  std::size_t k = 10;
  auto* neurons = app.add_subcommand("neurons", "Most and least correlated neurons for one pair and layer");
  add_run_flags(neurons, neuron_flags, false);
  neurons->add_option("--k", k, "Entries in each of the top and bottom lists");

  int seed_count = 20;
  std::string fault;
  std::string report_path;
  auto* validate_cmd = app.add_subcommand("validate", "Run the invariance property suite");
  validate_cmd->add_option("--seeds", seed_count, "Trials per property")->check(CLI::PositiveNumber);
  validate_cmd->add_option("--fault", fault, "Inject a fault: anc-no-abs");
  validate_cmd->add_option("--out", report_path, "Write the JSON report to this file");

  pipeline::GenConfig gen_config;
  std::string gen_out = "synthetic";
  std::string gen_languages = "en,fr";
  std::string gen_rho = "0.9";
  std::string gen_independent;
  auto* gen = app.add_subcommand("gen", "Write synthetic correlated dumps and a manifest");
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--model", gen_config.model_id, "model_id recorded in the manifest");
  gen->add_option("--dataset", gen_config.dataset_id, "dataset_id recorded in the manifest");
  gen->add_option("--languages", gen_languages, "Comma-separated languages; the first is the reference");
  gen->add_option("--layer-count", gen_config.layer_count, "Number of layers (0..count-1)");
  gen->add_option("--m", gen_config.m, "Examples per dump");
  gen->add_option("--n", gen_config.n, "Neurons per dump");
  gen->add_option("--rho", gen_rho, "Neuron-wise correlation: one value or one per layer");
  gen->add_option("--seed", gen_config.seed, "Generator seed");
  gen->add_option("--independent-neurons", gen_independent, "Neurons made pure noise outside the reference");

  std::string plot_csv;
  std::string plot_out = "plots";
  auto* plot = app.add_subcommand("plot", "Render SVG layer curves from a scores CSV");
  plot->add_option("--csv", plot_csv, "scores.csv produced by compare")->required();
  plot->add_option("--out", plot_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*compare) {
      const auto out = pipeline::cmd_compare(to_config(compare_flags));
      std::cout << io::scores_csv(out.curves);
    } else if (*match) {
      const auto rows = pipeline::cmd_match(to_config(match_flags));
      std::cout << io::match_csv(rows);
    } else if (*neurons) {
      auto config = to_config(neuron_flags);
      if (config.pairs.size() != 1) throw Error(ErrorCode::InvalidParam, "neurons takes exactly one pair");
      if (!config.layers || config.layers->size() != 1) {
        throw Error(ErrorCode::InvalidParam, "neurons takes exactly one layer");
      }
      const auto reports = pipeline::cmd_neurons(config, config.pairs[0], config.layers->front(), k);
      for (const auto& r : reports) {
        for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      }
      nlohmann::json doc = nlohmann::json::array();
      for (const auto& r : reports) doc.push_back(pipeline::to_json(r));
      std::cout << doc.dump(2) << '\n';
    } else if (*validate_cmd) {
      validate::SuiteOptions opts;
      opts.seed_count = seed_count;
      opts.fault = validate::parse_fault(fault);
      const auto report = validate::run_suite(opts);
      const std::string text = validate::to_json(report).dump(2) + "\n";
      if (!report_path.empty()) io::write_text(report_path, text);
      std::cout << text;
      return report.passed() ? 0 : 1;
    } else if (*gen) {
      gen_config.output_dir = gen_out;
      gen_config.languages = pipeline::split(gen_languages, ',');
      gen_config.rho.clear();
      for (const auto& v : pipeline::split(gen_rho, ',')) gen_config.rho.push_back(std::stod(v));
      for (const auto& v : pipeline::split(gen_independent, ',')) {
        gen_config.independent_neurons.push_back(std::stol(v));
      }
      const auto entries = pipeline::cmd_gen(gen_config);
      std::cout << "wrote " << entries.size() << " dumps and " << (std::filesystem::path(gen_out) / "manifest.json").string()
                << '\n';
    } else if (*plot) {
      for (const auto& p : io::plot_scores_csv(plot_csv, plot_out)) std::cout << p.string() << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
