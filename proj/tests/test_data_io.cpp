#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <fstream>
#include <random>

#include "curl/data_io.hpp"
#include "curl/logistic_regression.hpp"

using namespace curl;

namespace {

namespace fs = std::filesystem;

// Fresh directory per test case, removed on scope exit.
struct TempDir {
  fs::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("curl_io_test_" + std::to_string(counter.fetch_add(1)) + "_" +
            std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write_raw(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

Matrix awkward_matrix() {
  Matrix m(3, 4);
  m << 1.0 / 3.0, -2.5e300, 1e-17, 0.0,
      3.141592653589793, -0.0, 7.25, 1e308,
      -1.0 / 7.0, 42.0, 5e-324, -1.75;
  return m;
}

}  // namespace

TEST_CASE("CSV round-trip preserves every double exactly", "[io]") {
  TempDir dir;
  const Matrix m = awkward_matrix();
  save_feature_matrix_csv(m, dir.path / "m.csv");
  Matrix back = load_feature_matrix(dir.path / "m.csv");
  REQUIRE(back.rows() == m.rows());
  REQUIRE(back.cols() == m.cols());
  REQUIRE(back == m);
}

TEST_CASE("binary round-trip preserves every double exactly", "[io]") {
  TempDir dir;
  const Matrix m = awkward_matrix();
  save_feature_matrix_binary(m, dir.path / "m.bin");
  Matrix back = load_feature_matrix(dir.path / "m.bin");
  REQUIRE(back == m);
}

TEST_CASE("the declared width is enforced", "[io]") {
  TempDir dir;
  save_feature_matrix_csv(Matrix::Zero(2, 3), dir.path / "m.csv");
  REQUIRE(load_feature_matrix(dir.path / "m.csv", 3).cols() == 3);
  REQUIRE_THROWS_WITH(load_feature_matrix(dir.path / "m.csv", 5),
                      Catch::Matchers::ContainsSubstring("declares 5"));
}

TEST_CASE("matrix loading failures are specific", "[io]") {
  TempDir dir;
  REQUIRE_THROWS_WITH(load_feature_matrix(dir.path / "absent.csv"),
                      Catch::Matchers::ContainsSubstring("cannot open"));

  write_raw(dir.path / "nan.csv", "1.0,nan\n2.0,3.0\n");
  REQUIRE_THROWS_WITH(load_feature_matrix(dir.path / "nan.csv"),
                      Catch::Matchers::ContainsSubstring("non-finite"));

  write_raw(dir.path / "garbage.csv", "1.0,apple\n");
  REQUIRE_THROWS_WITH(load_feature_matrix(dir.path / "garbage.csv"),
                      Catch::Matchers::ContainsSubstring("cannot parse 'apple'"));

  write_raw(dir.path / "ragged.csv", "1,2,3\n4,5\n");
  REQUIRE_THROWS_WITH(load_feature_matrix(dir.path / "ragged.csv"),
                      Catch::Matchers::ContainsSubstring("expected 3"));

  write_raw(dir.path / "empty.csv", "\n\n");
  REQUIRE_THROWS_WITH(load_feature_matrix(dir.path / "empty.csv"),
                      Catch::Matchers::ContainsSubstring("no data rows"));

  // Header promises more rows than the body holds.
  std::string bin(io_detail::kMatrixMagic, 8);
  std::uint64_t rows = 5, cols = 2;
  bin.append(reinterpret_cast<const char*>(&rows), 8);
  bin.append(reinterpret_cast<const char*>(&cols), 8);
  double x = 1.5;
  bin.append(reinterpret_cast<const char*>(&x), 8);
  write_raw(dir.path / "short.bin", bin);
  REQUIRE_THROWS_WITH(load_feature_matrix(dir.path / "short.bin"),
                      Catch::Matchers::ContainsSubstring("truncated"));
}

TEST_CASE("manifests round-trip through JSON", "[io]") {
  DatasetManifest m;
  m.name = "demo";
  m.features = {{"color", "color.csv", 16}, {"texture", "texture.bin", -1}};
  m.labels_path = "labels.txt";
  DatasetManifest back = manifest_from_json(manifest_to_json(m), "test");
  REQUIRE(back == m);
}

TEST_CASE("manifest parsing rejects malformed content", "[io]") {
  json dup = {{"features",
               json::array({{{"name", "a"}, {"path", "a.csv"}}, {{"name", "a"}, {"path", "b.csv"}}})}};
  REQUIRE_THROWS_WITH(manifest_from_json(dup, "test"),
                      Catch::Matchers::ContainsSubstring("duplicate feature name 'a'"));

  json unknown = {{"features", json::array({{{"name", "a"}, {"path", "a.csv"}}})},
                  {"extra", 1}};
  REQUIRE_THROWS_WITH(manifest_from_json(unknown, "test"),
                      Catch::Matchers::ContainsSubstring("unknown key 'extra'"));

  json bad_entry = {{"features", json::array({{{"name", "a"}, {"path", "a.csv"}, {"widht", 3}}})}};
  REQUIRE_THROWS_AS(manifest_from_json(bad_entry, "test"), DataError);

  json no_features = {{"name", "x"}};
  REQUIRE_THROWS_AS(manifest_from_json(no_features, "test"), DataError);

  json wrong_type = {{"features", json::array({{{"name", 3}, {"path", "a.csv"}}})}};
  REQUIRE_THROWS_AS(manifest_from_json(wrong_type, "test"), DataError);
}

TEST_CASE("a dataset survives the solid-state round trip", "[io]") {
  TempDir dir;
  SyntheticSpec spec;
  spec.classes = 2;
  spec.views = 2;
  spec.dims = {3, 5};
  spec.samples_per_class = 6;
  spec.seed = 10;
  MultiFeatureDataset d = generate_synthetic(spec);
  for (int i = 0; i < d.num_samples(); ++i)
    if (i % 3 == 0) d.labels[i] = std::nullopt;  // both classes keep labeled rows

  const fs::path manifest = save_dataset_csv(d, dir.path / "ds", "round");
  MultiFeatureDataset back = load_dataset(manifest);
  REQUIRE(back.num_samples() == d.num_samples());
  REQUIRE(back.num_feature_kinds() == 2);
  REQUIRE(back.feature_names == d.feature_names);
  for (int s = 0; s < 2; ++s) REQUIRE(back.features[s] == d.features[s]);
  REQUIRE(back.labels == d.labels);
  REQUIRE(back.num_classes == 2);
  REQUIRE(back.class_names == d.class_names);
}

TEST_CASE("numeric label tokens sort by value, others by text", "[io]") {
  TempDir dir;
  save_feature_matrix_csv(Matrix::Random(3, 2), dir.path / "f.csv");

  write_raw(dir.path / "labels.txt", "10\n2\n10\n");
  DatasetManifest m;
  m.name = "numeric";
  m.features = {{"f", "f.csv", 2}};
  m.labels_path = "labels.txt";
  save_manifest(m, dir.path / "manifest.json");
  MultiFeatureDataset d = load_dataset(dir.path / "manifest.json");
  REQUIRE(d.class_names == std::vector<std::string>{"2", "10"});
  REQUIRE(*d.labels[0] == 2);  // token "10" is the second class
  REQUIRE(*d.labels[1] == 1);

  write_raw(dir.path / "labels.txt", "cat\nbird\ncat\n");
  MultiFeatureDataset w = load_dataset(dir.path / "manifest.json");
  REQUIRE(w.class_names == std::vector<std::string>{"bird", "cat"});
  REQUIRE(*w.labels[0] == 2);
  REQUIRE(*w.labels[1] == 1);
}

TEST_CASE("feature row disagreement names both features", "[io]") {
  TempDir dir;
  save_feature_matrix_csv(Matrix::Zero(3, 2), dir.path / "a.csv");
  save_feature_matrix_csv(Matrix::Zero(4, 2), dir.path / "b.csv");
  DatasetManifest m;
  m.name = "mismatch";
  m.features = {{"alpha", "a.csv", -1}, {"beta", "b.csv", -1}};
  save_manifest(m, dir.path / "manifest.json");
  REQUIRE_THROWS_WITH(load_dataset(dir.path / "manifest.json"),
                      Catch::Matchers::ContainsSubstring("'beta'") &&
                          Catch::Matchers::ContainsSubstring("'alpha'"));
}

TEST_CASE("a manifest without labels loads fully unlabeled", "[io]") {
  TempDir dir;
  save_feature_matrix_csv(Matrix::Random(5, 2), dir.path / "f.csv");
  DatasetManifest m;
  m.name = "nolabels";
  m.features = {{"f", "f.csv", -1}};
  save_manifest(m, dir.path / "manifest.json");
  MultiFeatureDataset d = load_dataset(dir.path / "manifest.json");
  REQUIRE(d.num_classes == 0);
  REQUIRE(d.labels.size() == 5);
  for (const auto& l : d.labels) REQUIRE_FALSE(l.has_value());
}

TEST_CASE("label file shape errors are reported", "[io]") {
  TempDir dir;
  save_feature_matrix_csv(Matrix::Random(3, 2), dir.path / "f.csv");
  DatasetManifest m;
  m.name = "badlabels";
  m.features = {{"f", "f.csv", -1}};
  m.labels_path = "labels.txt";
  save_manifest(m, dir.path / "manifest.json");

  write_raw(dir.path / "labels.txt", "1\n2\n");  // one short
  REQUIRE_THROWS_WITH(load_dataset(dir.path / "manifest.json"),
                      Catch::Matchers::ContainsSubstring("2 entries"));

  write_raw(dir.path / "labels.txt", "1\n\n2\n");  // interior blank
  REQUIRE_THROWS_WITH(load_dataset(dir.path / "manifest.json"),
                      Catch::Matchers::ContainsSubstring("line 2"));

  write_raw(dir.path / "labels.txt", "1\n2\n1\n\n\n");  // trailing blanks are fine
  MultiFeatureDataset d = load_dataset(dir.path / "manifest.json");
  REQUIRE(d.num_classes == 2);
}

TEST_CASE("synthetic generation is deterministic", "[io]") {
  SyntheticSpec spec;
  spec.classes = 3;
  spec.views = 2;
  spec.dims = {4, 6};
  spec.samples_per_class = 5;
  spec.view_correlation = 0.4;
  spec.seed = 20;
  MultiFeatureDataset a = generate_synthetic(spec);
  MultiFeatureDataset b = generate_synthetic(spec);
  REQUIRE(a.num_samples() == 15);
  REQUIRE(a.num_feature_kinds() == 2);
  for (int s = 0; s < 2; ++s) REQUIRE(a.features[s] == b.features[s]);
  REQUIRE(validate_dataset(a).empty());

  spec.seed = 21;
  MultiFeatureDataset c = generate_synthetic(spec);
  REQUIRE(a.features[0] != c.features[0]);
}

TEST_CASE("zero noise collapses each class to its mean", "[io]") {
  SyntheticSpec spec;
  spec.classes = 2;
  spec.views = 1;
  spec.dims = {3};
  spec.samples_per_class = 4;
  spec.noise_sigma = 0.0;
  spec.seed = 30;
  MultiFeatureDataset d = generate_synthetic(spec);
  for (int c = 0; c < 2; ++c)
    for (int i = 1; i < 4; ++i)
      REQUIRE(d.features[0].row(c * 4 + i) == d.features[0].row(c * 4));
  REQUIRE(d.features[0].row(0) != d.features[0].row(4));
}

TEST_CASE("well-separated synthetic classes are linearly separable", "[io]") {
  SyntheticSpec spec;
  spec.classes = 3;
  spec.views = 1;
  spec.dims = {5};
  spec.samples_per_class = 20;
  spec.spread = {8.0};
  spec.noise_sigma = 0.5;
  spec.seed = 40;
  MultiFeatureDataset d = generate_synthetic(spec);
  std::vector<int> y;
  for (const auto& l : d.labels) y.push_back(*l);
  ProbClassifier clf = train_logreg(d.features[0], y, 3, LogRegConfig{});
  int correct = 0;
  for (int i = 0; i < d.num_samples(); ++i) {
    Eigen::Index arg = 0;
    clf.predict_proba(d.features[0].row(i).transpose()).scores.maxCoeff(&arg);
    correct += static_cast<int>(arg) + 1 == y[i] ? 1 : 0;
  }
  REQUIRE(correct == d.num_samples());
}

TEST_CASE("synthetic specs round-trip through JSON", "[io]") {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.views = 3;
  spec.dims = {2, 3, 4};
  spec.samples_per_class = 7;
  spec.spread = {1.5};
  spec.noise_sigma = 0.3;
  spec.view_correlation = 0.6;
  spec.seed = 55;
  REQUIRE(synthetic_spec_from_json(synthetic_spec_to_json(spec), "test") == spec);

  // Per-view spread survives the trip as an array.
  spec.spread = {1.5, 0.2, 0.9};
  REQUIRE(synthetic_spec_from_json(synthetic_spec_to_json(spec), "test") == spec);

  // A scalar dims entry broadcasts across views; so does a scalar spread.
  json j = {{"views", 3}, {"dims", 5}, {"spread", 2.5}};
  SyntheticSpec broad = synthetic_spec_from_json(j, "test");
  REQUIRE(broad.dims == std::vector<int>{5, 5, 5});
  REQUIRE(broad.spread == std::vector<double>{2.5});
  REQUIRE(broad.spread_of(0) == 2.5);
  REQUIRE(broad.spread_of(2) == 2.5);

  json bad = {{"view_correlation", 1.5}};
  REQUIRE_THROWS_AS(synthetic_spec_from_json(bad, "test"), ConfigError);
  json unknown = {{"classez", 3}};
  REQUIRE_THROWS_AS(synthetic_spec_from_json(unknown, "test"), ConfigError);
  json wrong_type = {{"classes", "three"}};
  REQUIRE_THROWS_AS(synthetic_spec_from_json(wrong_type, "test"), ConfigError);

  json short_spread = {{"views", 3}, {"dims", 4}, {"spread", json::array({1.0, 2.0})}};
  REQUIRE_THROWS_WITH(synthetic_spec_from_json(short_spread, "test"),
                      Catch::Matchers::ContainsSubstring("one per view"));
  json neg_spread = {{"views", 2}, {"dims", 4}, {"spread", json::array({1.0, -0.5})}};
  REQUIRE_THROWS_AS(synthetic_spec_from_json(neg_spread, "test"), ConfigError);
}

TEST_CASE("per-view spread scales each view's class means independently", "[io]") {
  // With zero noise, a zero-spread view collapses to the origin for every
  // class while a wide view keeps its class separation.
  SyntheticSpec spec;
  spec.classes = 3;
  spec.views = 2;
  spec.dims = {4, 4};
  spec.samples_per_class = 2;
  spec.spread = {5.0, 0.0};
  spec.noise_sigma = 0.0;
  spec.seed = 21;
  MultiFeatureDataset d = generate_synthetic(spec);
  REQUIRE(d.features[1].isZero(0.0));
  // Class means in the wide view stay distinct.
  REQUIRE((d.features[0].row(0) - d.features[0].row(2)).norm() > 1.0);
}

TEST_CASE("run reports round-trip through disk", "[io]") {
  TempDir dir;
  RunReport r;
  r.config = {{"scenario", "transductive"}, {"seed", 3}};
  r.rounds.push_back({0, "EP+LR", 0.5, {}});
  r.rounds.push_back({1,
                      "CURL-EF",
                      0.625,
                      {{"EF", 2, 14, 0.8125, false}, {"LF", 1, 3, 0.45, true}}});
  save_run_report(r, dir.path / "report.json");
  RunReport back = load_run_report(dir.path / "report.json");
  REQUIRE(back == r);

  write_raw(dir.path / "bad.json", R"({"config": {}, "rounds": [], "oops": 1})");
  REQUIRE_THROWS_WITH(load_run_report(dir.path / "bad.json"),
                      Catch::Matchers::ContainsSubstring("unknown key 'oops'"));
  write_raw(dir.path / "broken.json", "{not json");
  REQUIRE_THROWS_AS(load_run_report(dir.path / "broken.json"), DataError);
}
