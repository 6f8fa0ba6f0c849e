// Command-line front end: `run` executes a benchmark config and writes
// per-run reports plus the aggregate MAP table, `describe` summarizes a
// dataset manifest, `gen-synthetic` materializes a synthetic dataset spec
// to CSV files.
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 runtime failure.

#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "curl/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir, int threads) {
  const curl::ExperimentConfig cfg = curl::load_experiment_config(config_path);
  const int cells = static_cast<int>(cfg.labels_per_class.size()) * cfg.runs;
  std::printf("running %d cell%s on %d thread%s\n", cells, cells == 1 ? "" : "s", threads,
              threads == 1 ? "" : "s");

  const curl::ExperimentResult result = curl::run_experiment(cfg, threads);
  curl::write_experiment_outputs(result, cfg, out_dir);

  // Final-round summary, one line per (labels_per_class, variant).
  const int last = cfg.cotrain.rounds;
  std::printf("%-18s %6s %6s %10s\n", "variant", "labels", "round", "mean MAP");
  for (const curl::AggregateRow& row : result.aggregate)
    if (row.round == last || row.variant == "EP+LR")
      std::printf("%-18s %6d %6d %10.4f\n", row.variant.c_str(), row.labels_per_class, row.round,
                  row.mean_map);
  std::printf("wrote %zu report%s and aggregate tables to %s\n", result.cell_reports.size(),
              result.cell_reports.size() == 1 ? "" : "s", out_dir.c_str());
  return 0;
}

int cmd_describe(const std::string& manifest_path) {
  const curl::DatasetManifest manifest = curl::load_manifest(manifest_path);
  const curl::MultiFeatureDataset d = curl::load_dataset(manifest_path);

  std::printf("dataset '%s': %d samples, %d feature kind%s, %d class%s\n", manifest.name.c_str(),
              d.num_samples(), d.num_feature_kinds(), d.num_feature_kinds() == 1 ? "" : "s",
              d.num_classes, d.num_classes == 1 ? "" : "es");
  for (int s = 0; s < d.num_feature_kinds(); ++s)
    std::printf("  feature '%s': dim %d\n", d.feature_names[s].c_str(),
                static_cast<int>(d.features[s].cols()));

  const int labeled = static_cast<int>(d.labeled_ids().size());
  std::printf("labels: %d labeled, %d unlabeled\n", labeled, d.num_samples() - labeled);
  for (int c = 0; c < d.num_classes; ++c) {
    int count = 0;
    for (const auto& l : d.labels) count += (l && *l == c + 1) ? 1 : 0;
    std::printf("  class '%s': %d labeled row%s\n", d.class_names[c].c_str(), count,
                count == 1 ? "" : "s");
  }
  return 0;
}

int cmd_gen_synthetic(const std::string& spec_path, const std::string& out_dir) {
  const curl::json j = curl::io_detail::parse_json_file(spec_path, /*config=*/true);
  const curl::SyntheticSpec spec =
      curl::synthetic_spec_from_json(j, "'" + spec_path + "'");
  const curl::MultiFeatureDataset d = curl::generate_synthetic(spec);
  const auto manifest = curl::save_dataset_csv(d, out_dir, "synthetic");
  std::printf("wrote %d samples x %d feature kind%s to %s\n", d.num_samples(),
              d.num_feature_kinds(), d.num_feature_kinds() == 1 ? "" : "s",
              manifest.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co-trained unsupervised-representation learner"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "curl_out";
  int threads = std::max(1u, std::thread::hardware_concurrency());
  CLI::App* run = app.add_subcommand("run", "execute a benchmark config");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--out", out_dir, "output directory (default: curl_out)");
  run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  std::string manifest_path;
  CLI::App* describe = app.add_subcommand("describe", "summarize a dataset manifest");
  describe->add_option("--manifest", manifest_path, "dataset manifest JSON")->required();

  std::string spec_path, gen_out;
  CLI::App* gen = app.add_subcommand("gen-synthetic", "materialize a synthetic dataset");
  gen->add_option("--spec", spec_path, "synthetic spec JSON")->required();
  gen->add_option("--out", gen_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad flags are config errors
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, threads);
    if (describe->parsed()) return cmd_describe(manifest_path);
    return cmd_gen_synthetic(spec_path, gen_out);
  } catch (const curl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const curl::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
