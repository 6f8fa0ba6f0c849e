#pragma once

// Disk formats: feature matrices (CSV or the CURLMAT1 binary layout),
// label files, dataset manifests, synthetic dataset generation, and run
// reports. See docs/formats.md for the byte-level contracts.
//
// Errors: malformed external data raises DataError; malformed spec/config
// content raises ConfigError. Each failure message names the file.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "curl/core_types.hpp"
#include "curl/rng.hpp"

namespace curl {

using nlohmann::json;

namespace io_detail {

inline constexpr char kMatrixMagic[8] = {'C', 'U', 'R', 'L', 'M', 'A', 'T', '1'};

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double x) { return json(x).dump(); }

inline double parse_double(const std::string& token, const std::string& where) {
  const std::string t = trim(token);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw DataError(where + ": cannot parse '" + token + "' as a number");
  return value;
}

template <typename Error>
inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) known = known || it.key() == key;
    if (!known) throw Error(where + ": unknown key '" + it.key() + "'");
  }
}

inline json parse_json_file(const std::filesystem::path& path, bool config) {
  std::ifstream in(path);
  if (!in) {
    const std::string msg = "cannot open '" + path.string() + "'";
    if (config) throw ConfigError(msg);
    throw DataError(msg);
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    const std::string msg = "'" + path.string() + "': " + e.what();
    if (config) throw ConfigError(msg);
    throw DataError(msg);
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Feature matrices

inline void save_feature_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << io_detail::format_double(m(i, j));
    }
    out << '\n';
  }
  io_detail::write_text_file(path, out.str());
}

inline void save_feature_matrix_binary(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(io_detail::kMatrixMagic, 8);
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&cols), 8);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double x = m(i, j);
      out.write(reinterpret_cast<const char*>(&x), 8);
    }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

// Loads CSV or CURLMAT1 (sniffed by magic bytes). expected_dim < 0 skips the
// width check. Non-finite entries and width mismatches are distinct errors.
inline Matrix load_feature_matrix(const std::filesystem::path& path, int expected_dim = -1) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  char magic[8] = {};
  in.read(magic, 8);
  const bool binary = in.gcount() == 8 && std::memcmp(magic, io_detail::kMatrixMagic, 8) == 0;

  Matrix m;
  if (binary) {
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), 8);
    in.read(reinterpret_cast<char*>(&cols), 8);
    if (!in || rows == 0 || cols == 0)
      throw DataError("'" + path.string() + "': truncated or empty binary matrix header");
    m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t i = 0; i < rows; ++i)
      for (std::uint64_t j = 0; j < cols; ++j) {
        double x = 0.0;
        in.read(reinterpret_cast<char*>(&x), 8);
        if (!in) throw DataError("'" + path.string() + "': truncated binary matrix body");
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x;
      }
  } else {
    in.clear();
    in.seekg(0);
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (io_detail::trim(line).empty()) continue;
      std::vector<double> row;
      std::stringstream cells(line);
      std::string cell;
      while (std::getline(cells, cell, ','))
        row.push_back(io_detail::parse_double(
            cell, "'" + path.string() + "' line " + std::to_string(line_no)));
      if (!rows.empty() && row.size() != rows.front().size())
        throw DataError("'" + path.string() + "' line " + std::to_string(line_no) + ": has " +
                        std::to_string(row.size()) + " columns, expected " +
                        std::to_string(rows.front().size()));
      rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("'" + path.string() + "': no data rows");
    m.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows[i].size(); ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }

  if (expected_dim >= 0 && m.cols() != expected_dim)
    throw DataError("'" + path.string() + "': matrix has " + std::to_string(m.cols()) +
                    " columns, manifest declares " + std::to_string(expected_dim));
  if (!m.allFinite()) throw DataError("'" + path.string() + "': non-finite entries");
  return m;
}

// ---------------------------------------------------------------------------
// Labels

// One token per line, aligned with feature rows; "?" marks an unlabeled row.
inline std::vector<std::string> load_label_tokens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(io_detail::trim(line));
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i].empty())
      throw DataError("'" + path.string() + "' line " + std::to_string(i + 1) +
                      ": empty label (use '?' for unlabeled)");
  return tokens;
}

inline void save_label_tokens(const std::vector<std::string>& tokens,
                              const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& t : tokens) out << t << '\n';
  io_detail::write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Manifests and datasets

struct FeatureEntry {
  std::string name;
  std::string path;
  int dim = -1;  // declared width; -1 accepts any

  friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

struct DatasetManifest {
  std::string name;
  std::vector<FeatureEntry> features;
  std::optional<std::string> labels_path;
  int version = 1;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline DatasetManifest manifest_from_json(const json& j, const std::string& where) try {
  io_detail::reject_unknown_keys<DataError>(j, {"name", "version", "features", "labels"}, where);
  if (!j.contains("features") || !j["features"].is_array() || j["features"].empty())
    throw DataError(where + ": manifest needs a non-empty 'features' array");
  DatasetManifest m;
  m.name = j.value("name", std::string("dataset"));
  m.version = j.value("version", 1);
  for (const auto& f : j["features"]) {
    io_detail::reject_unknown_keys<DataError>(f, {"name", "path", "dim"}, where + " feature entry");
    if (!f.contains("name") || !f.contains("path"))
      throw DataError(where + ": each feature entry needs 'name' and 'path'");
    FeatureEntry e;
    e.name = f["name"].get<std::string>();
    e.path = f["path"].get<std::string>();
    e.dim = f.value("dim", -1);
    for (const auto& other : m.features)
      if (other.name == e.name) throw DataError(where + ": duplicate feature name '" + e.name + "'");
    m.features.push_back(std::move(e));
  }
  if (j.contains("labels")) m.labels_path = j["labels"].get<std::string>();
  return m;
} catch (const json::exception& e) {
  throw DataError(where + ": " + e.what());
}

inline json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["name"] = m.name;
  j["version"] = m.version;
  j["features"] = json::array();
  for (const auto& f : m.features) {
    json e;
    e["name"] = f.name;
    e["path"] = f.path;
    if (f.dim >= 0) e["dim"] = f.dim;
    j["features"].push_back(e);
  }
  if (m.labels_path) j["labels"] = *m.labels_path;
  return j;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(io_detail::parse_json_file(path, /*config=*/false),
                            "'" + path.string() + "'");
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  io_detail::write_text_file(path, manifest_to_json(m).dump(2) + "\n");
}

// Loads every feature matrix, checks row agreement, and remaps label tokens
// to {1..K}. Tokens sort numerically when all are integers, else
// lexicographically; the sorted tokens become class_names. A missing labels
// entry yields a fully unlabeled dataset.
inline MultiFeatureDataset load_dataset(const std::filesystem::path& manifest_path) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();
  auto resolve = [&base](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  MultiFeatureDataset d;
  for (const auto& f : manifest.features) {
    d.feature_names.push_back(f.name);
    d.features.push_back(load_feature_matrix(resolve(f.path), f.dim));
    if (d.features.back().rows() != d.features.front().rows())
      throw DataError("feature '" + f.name + "' has " + std::to_string(d.features.back().rows()) +
                      " rows but feature '" + manifest.features.front().name + "' has " +
                      std::to_string(d.features.front().rows()));
  }
  const int n = d.num_samples();

  if (manifest.labels_path) {
    const auto tokens = load_label_tokens(resolve(*manifest.labels_path));
    if (static_cast<int>(tokens.size()) != n)
      throw DataError("labels file '" + *manifest.labels_path + "' has " +
                      std::to_string(tokens.size()) + " entries, features have " +
                      std::to_string(n) + " rows");
    std::vector<std::string> classes;
    for (const auto& t : tokens)
      if (t != "?" && std::find(classes.begin(), classes.end(), t) == classes.end())
        classes.push_back(t);
    auto numeric = [](const std::string& s) {
      long long v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      return ec == std::errc{} && ptr == s.data() + s.size();
    };
    bool all_numeric = !classes.empty();
    for (const auto& c : classes) all_numeric = all_numeric && numeric(c);
    std::sort(classes.begin(), classes.end(), [&](const std::string& a, const std::string& b) {
      if (all_numeric) return std::stoll(a) < std::stoll(b);
      return a < b;
    });
    d.class_names = classes;
    d.num_classes = static_cast<int>(classes.size());
    for (const auto& t : tokens) {
      if (t == "?") {
        d.labels.emplace_back(std::nullopt);
      } else {
        const auto it = std::find(classes.begin(), classes.end(), t);
        d.labels.emplace_back(static_cast<int>(it - classes.begin()) + 1);
      }
    }
  } else {
    d.labels.assign(n, std::nullopt);
    d.num_classes = 0;
  }

  const auto issues = validate_dataset(d);
  if (!issues.empty())
    throw DataError("dataset '" + manifest.name + "': " + issues.front().message);
  return d;
}

// Writes per-feature CSVs, a labels file, and a manifest into dir; returns
// the manifest path. Labels are written as 1-based integers, '?' when absent.
inline std::filesystem::path save_dataset_csv(const MultiFeatureDataset& d,
                                              const std::filesystem::path& dir,
                                              const std::string& name) {
  std::filesystem::create_directories(dir);
  DatasetManifest manifest;
  manifest.name = name;
  for (int s = 0; s < d.num_feature_kinds(); ++s) {
    const std::string file = d.feature_names[s] + ".csv";
    save_feature_matrix_csv(d.features[s], dir / file);
    manifest.features.push_back({d.feature_names[s], file, static_cast<int>(d.features[s].cols())});
  }
  std::vector<std::string> tokens;
  for (const auto& label : d.labels)
    tokens.push_back(label ? std::to_string(*label) : std::string("?"));
  save_label_tokens(tokens, dir / "labels.txt");
  manifest.labels_path = "labels.txt";
  const std::filesystem::path manifest_path = dir / "manifest.json";
  save_manifest(manifest, manifest_path);
  return manifest_path;
}

// ---------------------------------------------------------------------------
// Synthetic data

// Gaussian class clouds per view. view_correlation 0 draws every view's
// class means independently; 1 derives them all from one shared latent
// vector per class through fixed per-view projections; in between the two
// parts mix with sqrt weights so the mean scale stays comparable. spread is
// the class-mean scale, one entry per view (a single entry applies to all
// views); unequal entries model feature kinds of unequal quality.
struct SyntheticSpec {
  int classes = 2;
  int views = 1;
  std::vector<int> dims{2};       // one entry per view
  int samples_per_class = 10;
  std::vector<double> spread{1.0};  // one entry, or one per view
  double noise_sigma = 0.1;
  double view_correlation = 0.0;
  std::uint64_t seed = 0;

  double spread_of(int view) const { return spread.size() == 1 ? spread[0] : spread[view]; }

  void check() const {
    if (classes < 1) throw ConfigError("synthetic spec: classes must be >= 1");
    if (views < 1) throw ConfigError("synthetic spec: views must be >= 1");
    if (static_cast<int>(dims.size()) != views)
      throw ConfigError("synthetic spec: dims must list one width per view");
    for (int d : dims)
      if (d < 1) throw ConfigError("synthetic spec: view widths must be >= 1");
    if (samples_per_class < 1) throw ConfigError("synthetic spec: samples_per_class must be >= 1");
    if (spread.size() != 1 && static_cast<int>(spread.size()) != views)
      throw ConfigError("synthetic spec: spread must be a single value or one per view");
    for (double s : spread)
      if (s < 0) throw ConfigError("synthetic spec: spread must be >= 0");
    if (noise_sigma < 0) throw ConfigError("synthetic spec: noise_sigma must be >= 0");
    if (view_correlation < 0 || view_correlation > 1)
      throw ConfigError("synthetic spec: view_correlation must lie in [0,1]");
  }

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

inline SyntheticSpec synthetic_spec_from_json(const json& j, const std::string& where) try {
  io_detail::reject_unknown_keys<ConfigError>(
      j,
      {"classes", "views", "dims", "samples_per_class", "spread", "noise_sigma",
       "view_correlation", "seed"},
      where);
  SyntheticSpec s;
  s.classes = j.value("classes", s.classes);
  s.views = j.value("views", s.views);
  if (j.contains("dims")) {
    if (j["dims"].is_array())
      s.dims = j["dims"].get<std::vector<int>>();
    else
      s.dims.assign(s.views, j["dims"].get<int>());
  } else {
    s.dims.assign(s.views, s.dims.front());
  }
  s.samples_per_class = j.value("samples_per_class", s.samples_per_class);
  if (j.contains("spread")) {
    if (j["spread"].is_array())
      s.spread = j["spread"].get<std::vector<double>>();
    else
      s.spread = {j["spread"].get<double>()};
  }
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.view_correlation = j.value("view_correlation", s.view_correlation);
  s.seed = j.value("seed", s.seed);
  s.check();
  return s;
} catch (const json::exception& e) {
  throw ConfigError(where + ": " + e.what());
}

inline json synthetic_spec_to_json(const SyntheticSpec& s) {
  json j;
  j["classes"] = s.classes;
  j["views"] = s.views;
  j["dims"] = s.dims;
  j["samples_per_class"] = s.samples_per_class;
  if (s.spread.size() == 1)
    j["spread"] = s.spread[0];
  else
    j["spread"] = s.spread;
  j["noise_sigma"] = s.noise_sigma;
  j["view_correlation"] = s.view_correlation;
  j["seed"] = s.seed;
  return j;
}

inline MultiFeatureDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.check();
  const int k = spec.classes;
  const int n = spec.samples_per_class;
  const int total = k * n;
  const int latent_dim = *std::max_element(spec.dims.begin(), spec.dims.end());

  std::vector<Vector> latent(k);
  for (int c = 0; c < k; ++c) {
    Rng rng(derive_seed(spec.seed, "latent", static_cast<std::uint64_t>(c)));
    latent[c].resize(latent_dim);
    for (int i = 0; i < latent_dim; ++i) latent[c][i] = rng.normal();
  }

  MultiFeatureDataset d;
  d.num_classes = k;
  const double w_shared = std::sqrt(spec.view_correlation);
  const double w_own = std::sqrt(1.0 - spec.view_correlation);

  for (int s = 0; s < spec.views; ++s) {
    const int dim = spec.dims[s];
    d.feature_names.push_back("view" + std::to_string(s + 1));

    Rng proj_rng(derive_seed(spec.seed, "proj", static_cast<std::uint64_t>(s)));
    Matrix proj(dim, latent_dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < latent_dim; ++j) proj(i, j) = proj_rng.normal();

    Matrix means(k, dim);
    for (int c = 0; c < k; ++c) {
      Rng mean_rng(derive_seed(spec.seed, "mean",
                               static_cast<std::uint64_t>(c) * spec.views + s));
      Vector own(dim);
      for (int i = 0; i < dim; ++i) own[i] = mean_rng.normal();
      Vector shared = proj * latent[c] / std::sqrt(static_cast<double>(latent_dim));
      means.row(c) = (spec.spread_of(s) * (w_own * own + w_shared * shared)).transpose();
    }

    Rng noise_rng(derive_seed(spec.seed, "noise", static_cast<std::uint64_t>(s)));
    Matrix x(total, dim);
    for (int c = 0; c < k; ++c)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j)
          x(c * n + i, j) = means(c, j) + spec.noise_sigma * noise_rng.normal();
    d.features.push_back(std::move(x));
  }

  for (int c = 0; c < k; ++c) {
    d.class_names.push_back(std::to_string(c + 1));
    for (int i = 0; i < n; ++i) d.labels.emplace_back(c + 1);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Run reports

struct AdditionRecord {
  std::string view;  // receiving view, "EF" or "LF"
  int cls = 0;
  int sample_id = 0;
  double confidence = 0.0;
  bool relaxed = false;

  friend bool operator==(const AdditionRecord&, const AdditionRecord&) = default;
};

struct RoundEntry {
  int round = 0;
  std::string variant;
  double map = 0.0;
  std::vector<AdditionRecord> additions;

  friend bool operator==(const RoundEntry&, const RoundEntry&) = default;
};

struct RunReport {
  json config;
  std::vector<RoundEntry> rounds;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

inline json run_report_to_json(const RunReport& r) {
  json j;
  j["config"] = r.config;
  j["rounds"] = json::array();
  for (const auto& e : r.rounds) {
    json je;
    je["round"] = e.round;
    je["variant"] = e.variant;
    je["map"] = e.map;
    je["additions"] = json::array();
    for (const auto& a : e.additions) {
      json ja;
      ja["view"] = a.view;
      ja["class"] = a.cls;
      ja["sample_id"] = a.sample_id;
      ja["confidence"] = a.confidence;
      ja["relaxed"] = a.relaxed;
      je["additions"].push_back(ja);
    }
    j["rounds"].push_back(je);
  }
  return j;
}

inline RunReport run_report_from_json(const json& j, const std::string& where) try {
  io_detail::reject_unknown_keys<DataError>(j, {"config", "rounds"}, where);
  RunReport r;
  r.config = j.value("config", json::object());
  for (const auto& je : j.value("rounds", json::array())) {
    RoundEntry e;
    e.round = je.at("round").get<int>();
    e.variant = je.at("variant").get<std::string>();
    e.map = je.at("map").get<double>();
    for (const auto& ja : je.value("additions", json::array())) {
      AdditionRecord a;
      a.view = ja.at("view").get<std::string>();
      a.cls = ja.at("class").get<int>();
      a.sample_id = ja.at("sample_id").get<int>();
      a.confidence = ja.at("confidence").get<double>();
      a.relaxed = ja.at("relaxed").get<bool>();
      e.additions.push_back(std::move(a));
    }
    r.rounds.push_back(std::move(e));
  }
  return r;
} catch (const json::exception& e) {
  throw DataError(where + ": " + e.what());
}

inline void save_run_report(const RunReport& r, const std::filesystem::path& path) {
  io_detail::write_text_file(path, run_report_to_json(r).dump(2) + "\n");
}

inline RunReport load_run_report(const std::filesystem::path& path) {
  return run_report_from_json(io_detail::parse_json_file(path, /*config=*/false),
                              "'" + path.string() + "'");
}

}  // namespace curl
