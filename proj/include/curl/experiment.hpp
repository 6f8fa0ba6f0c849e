#pragma once

// Batch experiment runner: for every (labels_per_class, run) cell it draws a
// scenario split, fits the URL component on the cell's training rows, runs
// the co-training loop in the requested modes, scores the test pool at
// every round, and aggregates MAP over runs. Reports are byte-identical for
// identical config and seed, regardless of thread count.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "curl/cotraining.hpp"
#include "curl/data_io.hpp"
#include "curl/evaluation.hpp"
#include "curl/fusion.hpp"
#include "curl/parallel.hpp"

namespace curl {

inline const std::vector<std::string>& known_variants() {
  static const std::vector<std::string> v = {"CURL-EF",   "CURL-LF",   "CURL-EF&LF",
                                             "CURL-EF_n", "CURL-LF_n", "CURL-EF&LF_n"};
  return v;
}

// The "_n" variants run the add-all loop (no NMS, no relaxation).
inline bool variant_is_add_all(const std::string& name) {
  return name.size() > 2 && name.compare(name.size() - 2, 2, "_n") == 0;
}

struct DatasetRef {
  std::optional<std::string> manifest;
  std::optional<SyntheticSpec> synthetic;
};

struct ExperimentConfig {
  DatasetRef dataset;
  std::optional<DatasetRef> external;  // self-taught unlabeled pool
  Scenario scenario = Scenario::kTransductive;
  std::vector<int> labels_per_class{1, 2, 3, 5, 10, 20};
  int runs = 10;
  std::uint64_t seed = 0;
  EpConfig ep{};
  CotrainConfig cotrain{};  // variant field is unused; `variants` picks the loops
  std::vector<std::string> variants = known_variants();
  std::filesystem::path base_dir;  // directory of the config file, for relative paths
  json echo;                       // normalized config, echoed into every report
};

namespace exp_detail {

inline LogRegConfig logreg_from_json(const json& j, const std::string& where) {
  io_detail::reject_unknown_keys<ConfigError>(j, {"c", "tol", "max_iters"}, where);
  LogRegConfig cfg;
  cfg.c = j.value("c", cfg.c);
  cfg.tol = j.value("tol", cfg.tol);
  cfg.max_iters = j.value("max_iters", cfg.max_iters);
  return cfg;
}

inline json logreg_to_json(const LogRegConfig& cfg) {
  return json{{"c", cfg.c}, {"tol", cfg.tol}, {"max_iters", cfg.max_iters}};
}

inline EpConfig ep_from_json(const json& j, const std::string& where) {
  io_detail::reject_unknown_keys<ConfigError>(
      j, {"t", "r", "n", "m", "standardize", "logreg", "seed"}, where);
  EpConfig cfg;
  cfg.t = j.value("t", cfg.t);
  cfg.r = j.value("r", cfg.r);
  cfg.n = j.value("n", cfg.n);
  cfg.m = j.value("m", cfg.m);
  cfg.standardize = j.value("standardize", cfg.standardize);
  if (j.contains("logreg")) cfg.logreg = logreg_from_json(j["logreg"], where + ".logreg");
  return cfg;
}

inline json ep_to_json(const EpConfig& cfg) {
  return json{{"t", cfg.t},
              {"r", cfg.r},
              {"n", cfg.n},
              {"m", cfg.m},
              {"standardize", cfg.standardize},
              {"logreg", logreg_to_json(cfg.logreg)}};
}

inline CotrainConfig cotrain_from_json(const json& j, const std::string& where) {
  io_detail::reject_unknown_keys<ConfigError>(j, {"rounds", "t1", "t2"}, where);
  CotrainConfig cfg;
  cfg.rounds = j.value("rounds", cfg.rounds);
  cfg.t1 = j.value("t1", cfg.t1);
  cfg.t2 = j.value("t2", cfg.t2);
  return cfg;
}

inline json cotrain_to_json(const CotrainConfig& cfg) {
  return json{{"rounds", cfg.rounds}, {"t1", cfg.t1}, {"t2", cfg.t2}};
}

inline DatasetRef dataset_ref_from_json(const json& j, const std::string& where) {
  io_detail::reject_unknown_keys<ConfigError>(j, {"manifest", "synthetic"}, where);
  DatasetRef ref;
  if (j.contains("manifest")) ref.manifest = j["manifest"].get<std::string>();
  if (j.contains("synthetic"))
    ref.synthetic = synthetic_spec_from_json(j["synthetic"], where + ".synthetic");
  if (ref.manifest.has_value() == ref.synthetic.has_value())
    throw ConfigError(where + ": give exactly one of 'manifest' or 'synthetic'");
  return ref;
}

inline json dataset_ref_to_json(const DatasetRef& ref) {
  json j;
  if (ref.manifest) j["manifest"] = *ref.manifest;
  if (ref.synthetic) j["synthetic"] = synthetic_spec_to_json(*ref.synthetic);
  return j;
}

}  // namespace exp_detail

inline json experiment_config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["dataset"] = exp_detail::dataset_ref_to_json(cfg.dataset);
  if (cfg.external) j["external"] = exp_detail::dataset_ref_to_json(*cfg.external);
  j["scenario"] = scenario_name(cfg.scenario);
  j["labels_per_class"] = cfg.labels_per_class;
  j["runs"] = cfg.runs;
  j["seed"] = cfg.seed;
  j["ep"] = exp_detail::ep_to_json(cfg.ep);
  j["cotrain"] = exp_detail::cotrain_to_json(cfg.cotrain);
  j["variants"] = cfg.variants;
  return j;
}

inline ExperimentConfig experiment_config_from_json(const json& j) try {
  io_detail::reject_unknown_keys<ConfigError>(j,
                                              {"dataset", "external", "scenario",
                                               "labels_per_class", "runs", "seed", "ep", "cotrain",
                                               "variants"},
                                              "config");
  ExperimentConfig cfg;
  if (!j.contains("dataset")) throw ConfigError("config: missing 'dataset'");
  cfg.dataset = exp_detail::dataset_ref_from_json(j["dataset"], "config.dataset");
  if (j.contains("external"))
    cfg.external = exp_detail::dataset_ref_from_json(j["external"], "config.external");
  cfg.scenario = scenario_from_name(j.value("scenario", std::string("transductive")));
  if (j.contains("labels_per_class"))
    cfg.labels_per_class = j["labels_per_class"].get<std::vector<int>>();
  cfg.runs = j.value("runs", cfg.runs);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("ep")) cfg.ep = exp_detail::ep_from_json(j["ep"], "config.ep");
  if (j.contains("cotrain"))
    cfg.cotrain = exp_detail::cotrain_from_json(j["cotrain"], "config.cotrain");
  if (j.contains("variants")) cfg.variants = j["variants"].get<std::vector<std::string>>();

  if (cfg.labels_per_class.empty()) throw ConfigError("config: labels_per_class is empty");
  for (int v : cfg.labels_per_class)
    if (v < 1) throw ConfigError("config: labels_per_class entries must be >= 1");
  if (cfg.runs < 1) throw ConfigError("config: runs must be >= 1");
  if (cfg.variants.empty()) throw ConfigError("config: variants is empty");
  for (const auto& v : cfg.variants) {
    const auto& known = known_variants();
    if (std::find(known.begin(), known.end(), v) == known.end())
      throw ConfigError("config: unknown variant '" + v + "'");
  }
  if (cfg.scenario == Scenario::kSelfTaught && !cfg.external)
    throw ConfigError("config: self_taught scenario needs an 'external' dataset");
  try {
    cfg.ep.check();
    cfg.cotrain.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.echo = experiment_config_to_json(cfg);
  return cfg;
} catch (const json::exception& e) {
  throw ConfigError(std::string("config: ") + e.what());
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  ExperimentConfig cfg =
      experiment_config_from_json(io_detail::parse_json_file(path, /*config=*/true));
  cfg.base_dir = path.parent_path();
  return cfg;
}

struct AggregateRow {
  int labels_per_class = 0;
  std::string variant;
  int round = 0;
  double mean_map = 0.0;
};

struct ExperimentResult {
  std::vector<RunReport> cell_reports;  // labels_per_class-major, run-minor
  std::vector<AggregateRow> aggregate;
  json aggregate_json;
};

namespace exp_detail {

inline MultiFeatureDataset materialize(const DatasetRef& ref, const std::filesystem::path& base) {
  if (ref.synthetic) return generate_synthetic(*ref.synthetic);
  std::filesystem::path p(*ref.manifest);
  if (!p.is_absolute()) p = base / p;
  return load_dataset(p);
}

// MAP of all three variant heads plus the round's additions, per round.
struct ModeTrace {
  std::vector<double> map_ef, map_lf, map_comb;
  std::vector<std::vector<AdditionRecord>> adds_ef, adds_lf;
};

struct Cell {
  RunReport report;
  // (variant, round) -> map, in report order; used for aggregation
  std::vector<AggregateRow> rows;
};

}  // namespace exp_detail

// Executes the full grid. Cells run concurrently when threads > 1 and more
// than one cell exists; otherwise the threads go to the per-cell fits.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1) {
  const MultiFeatureDataset bench = exp_detail::materialize(cfg.dataset, cfg.base_dir);
  {
    const auto issues = validate_dataset(bench);
    if (!issues.empty()) throw DataError("benchmark dataset: " + issues.front().message);
  }
  if (bench.num_classes < 2) throw DataError("benchmark dataset needs at least 2 classes");
  for (const auto& label : bench.labels)
    if (!label)
      throw DataError(
          "benchmark dataset must be fully labeled (ground truth is needed to score test pools)");

  std::optional<MultiFeatureDataset> external;
  if (cfg.scenario == Scenario::kSelfTaught) {
    external = exp_detail::materialize(*cfg.external, cfg.base_dir);
    const auto issues = validate_dataset(*external);
    if (!issues.empty()) throw DataError("external dataset: " + issues.front().message);
    if (external->num_feature_kinds() != bench.num_feature_kinds())
      throw DataError("external dataset feature count differs from the benchmark dataset");
    for (int s = 0; s < bench.num_feature_kinds(); ++s)
      if (external->features[s].cols() != bench.features[s].cols())
        throw DataError("external feature '" + bench.feature_names[s] +
                        "' width differs from the benchmark dataset");
  }

  bool need_nms = false, need_add_all = false;
  for (const auto& v : cfg.variants) (variant_is_add_all(v) ? need_add_all : need_nms) = true;

  // Requested variants in canonical order, deduplicated.
  std::vector<std::string> ordered;
  for (const auto& v : known_variants())
    if (std::find(cfg.variants.begin(), cfg.variants.end(), v) != cfg.variants.end())
      ordered.push_back(v);

  const int num_lpc = static_cast<int>(cfg.labels_per_class.size());
  const int cells = num_lpc * cfg.runs;
  const int inner_threads = cells == 1 ? threads : 1;
  std::vector<exp_detail::Cell> grid(cells);

  parallel_for(cells, threads, [&](int cell_idx) {
    const int lpc = cfg.labels_per_class[cell_idx / cfg.runs];
    const int run = cell_idx % cfg.runs;
    const std::uint64_t cell_seed =
        derive_seed(derive_seed(cfg.seed, "labels", static_cast<std::uint64_t>(lpc)), "run",
                    static_cast<std::uint64_t>(run));

    Rng split_rng(derive_seed(cell_seed, "split"));
    const ScenarioSplit split =
        split_scenario(bench, cfg.scenario, lpc, external ? &*external : nullptr, split_rng);
    const MultiFeatureDataset& pool_src = split.external_train_pool ? *external : bench;

    // Training sub-dataset: labeled rows first, then the unlabeled pool.
    const int l = static_cast<int>(split.labeled_ids.size());
    const int u = static_cast<int>(split.train_unlabeled_ids.size());
    MultiFeatureDataset sub;
    sub.num_classes = bench.num_classes;
    sub.feature_names = bench.feature_names;
    for (int s = 0; s < bench.num_feature_kinds(); ++s) {
      Matrix x(l + u, bench.features[s].cols());
      x.topRows(l) = rows_of(bench.features[s], split.labeled_ids);
      x.bottomRows(u) = rows_of(pool_src.features[s], split.train_unlabeled_ids);
      sub.features.push_back(std::move(x));
    }
    std::vector<int> labeled_labels;
    for (int id : split.labeled_ids) {
      labeled_labels.push_back(*bench.labels[id]);
      sub.labels.emplace_back(*bench.labels[id]);
    }
    for (int i = 0; i < u; ++i) sub.labels.emplace_back(std::nullopt);

    EpConfig ep = cfg.ep;
    ep.seed = derive_seed(cell_seed, "ep");
    const UrlModel model = fit_url(sub, ep, inner_threads);
    std::vector<int> labeled_rows(l), unlabeled_rows(u);
    std::iota(labeled_rows.begin(), labeled_rows.end(), 0);
    std::iota(unlabeled_rows.begin(), unlabeled_rows.end(), l);
    const ViewPair views = make_view_pair(model, sub, labeled_rows, unlabeled_rows);

    const Matrix test_ef = model.project_ef(bench, split.test_ids);
    const Matrix test_lf = model.project_lf(bench, split.test_ids);
    std::vector<int> y_test;
    for (int id : split.test_ids) y_test.push_back(*bench.labels[id]);

    // Pool-row -> source-row id for the report (external ids in self-taught).
    auto source_id = [&](int sub_row) { return split.train_unlabeled_ids[sub_row - l]; };

    auto run_mode = [&](Variant variant) {
      exp_detail::ModeTrace trace;
      CotrainConfig ct = cfg.cotrain;
      ct.variant = variant;
      RoundObserver observer = [&](int round, const CotrainState& st) {
        trace.map_ef.push_back(
            mean_average_precision(st.ef_clf.predict_proba_rows(test_ef), y_test));
        trace.map_lf.push_back(
            mean_average_precision(st.lf_clf.predict_proba_rows(test_lf), y_test));
        trace.map_comb.push_back(mean_average_precision(
            combine_predict_rows(st.ef_clf, st.lf_clf, test_ef, test_lf), y_test));
        std::vector<AdditionRecord> ef_adds, lf_adds;
        if (round >= 1) {
          for (const PseudoLabel& pl : st.history[round - 1].additions) {
            AdditionRecord a{view_name(pl.receiving_view()), pl.label, source_id(pl.sample_id),
                             pl.confidence, pl.relaxed};
            (pl.receiving_view() == View::kEf ? ef_adds : lf_adds).push_back(std::move(a));
          }
        }
        trace.adds_ef.push_back(std::move(ef_adds));
        trace.adds_lf.push_back(std::move(lf_adds));
      };
      run_curl_on_views(views, labeled_labels, bench.num_classes, ct, cfg.ep.logreg, observer,
                        inner_threads);
      return trace;
    };

    std::optional<exp_detail::ModeTrace> nms_trace, add_all_trace;
    if (need_nms) nms_trace = run_mode(Variant::kNms);
    if (need_add_all) add_all_trace = run_mode(Variant::kAddAll);

    exp_detail::Cell& cell = grid[cell_idx];
    cell.report.config = cfg.echo;
    cell.report.config["cell"] = json{{"labels_per_class", lpc}, {"run", run}};

    auto push = [&](int round, const std::string& variant, double map,
                    std::vector<AdditionRecord> adds) {
      cell.report.rounds.push_back({round, variant, map, std::move(adds)});
      cell.rows.push_back({lpc, variant, round, map});
    };

    // Baseline: the round-0 EF classifier (identical in both modes).
    const exp_detail::ModeTrace& any = need_nms ? *nms_trace : *add_all_trace;
    push(0, "EP+LR", any.map_ef[0], {});
    for (const std::string& variant : ordered) {
      const exp_detail::ModeTrace& trace = variant_is_add_all(variant) ? *add_all_trace : *nms_trace;
      const bool is_ef = variant.rfind("CURL-EF", 0) == 0 && variant.find('&') == std::string::npos;
      const bool is_lf = variant.rfind("CURL-LF", 0) == 0;
      for (int round = 0; round <= cfg.cotrain.rounds; ++round) {
        double map = is_ef ? trace.map_ef[round]
                   : is_lf ? trace.map_lf[round]
                           : trace.map_comb[round];
        std::vector<AdditionRecord> adds;
        if (is_ef) adds = trace.adds_ef[round];
        if (is_lf) adds = trace.adds_lf[round];
        push(round, variant, map, std::move(adds));
      }
    }
  });

  ExperimentResult result;
  for (auto& cell : grid) result.cell_reports.push_back(std::move(cell.report));

  // Mean over runs, in (labels_per_class, variant, round) report order.
  for (int a = 0; a < num_lpc; ++a) {
    const int base = a * cfg.runs;
    const std::size_t per_cell = grid[base].rows.size();
    for (std::size_t e = 0; e < per_cell; ++e) {
      AggregateRow row = grid[base].rows[e];
      double sum = 0.0;
      for (int run = 0; run < cfg.runs; ++run) sum += grid[base + run].rows[e].mean_map;
      row.mean_map = sum / cfg.runs;
      result.aggregate.push_back(std::move(row));
    }
  }

  result.aggregate_json["config"] = cfg.echo;
  result.aggregate_json["cells"] = json::array();
  for (const auto& row : result.aggregate)
    result.aggregate_json["cells"].push_back(json{{"labels_per_class", row.labels_per_class},
                                                  {"variant", row.variant},
                                                  {"round", row.round},
                                                  {"mean_map", row.mean_map}});
  return result;
}

// Per-cell reports, the aggregate JSON, and a plot-ready CSV of the
// aggregate MAP table.
inline void write_experiment_outputs(const ExperimentResult& result, const ExperimentConfig& cfg,
                                     const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const int runs = cfg.runs;
  for (std::size_t i = 0; i < result.cell_reports.size(); ++i) {
    const int lpc = cfg.labels_per_class[i / runs];
    const int run = static_cast<int>(i) % runs;
    save_run_report(result.cell_reports[i],
                    out_dir / ("report_labels" + std::to_string(lpc) + "_run" +
                               std::to_string(run) + ".json"));
  }
  io_detail::write_text_file(out_dir / "aggregate.json", result.aggregate_json.dump(2) + "\n");

  std::ostringstream csv;
  csv << "labels_per_class,variant,round,mean_map\n";
  for (const auto& row : result.aggregate)
    csv << row.labels_per_class << ',' << row.variant << ',' << row.round << ','
        << io_detail::format_double(row.mean_map) << '\n';
  io_detail::write_text_file(out_dir / "map_table.csv", csv.str());
}

}  // namespace curl
