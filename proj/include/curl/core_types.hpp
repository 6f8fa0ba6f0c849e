#pragma once

// Shared data model: multi-feature datasets, fused views, confidence vectors
// and pseudo-labels. Class labels are 1-based ({1..K}); an unlabeled sample
// carries an empty optional, never a sentinel, so training on it cannot
// happen by accident. All types are immutable by convention after assembly
// and safe to share across workers.

#include <Eigen/Dense>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace curl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Dataset/config problems discovered while reading external inputs.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Problems in an experiment configuration file.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class View { kEf, kLf };

inline View other_view(View v) { return v == View::kEf ? View::kLf : View::kEf; }

inline const char* view_name(View v) { return v == View::kEf ? "EF" : "LF"; }

// Per-sample tuple of S raw feature vectors plus an optional class label.
struct MultiFeatureDataset {
  std::vector<Matrix> features;             // S matrices, each N x d_s
  std::vector<std::optional<int>> labels;   // length N, values in {1..K}
  int num_classes = 0;                      // K
  std::vector<std::string> feature_names;   // length S
  std::vector<std::string> class_names;     // optional, length K when present

  int num_samples() const {
    return features.empty() ? 0 : static_cast<int>(features.front().rows());
  }
  int num_feature_kinds() const { return static_cast<int>(features.size()); }

  std::vector<int> labeled_ids() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(labels.size()); ++i)
      if (labels[i].has_value()) out.push_back(i);
    return out;
  }
  std::vector<int> unlabeled_ids() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(labels.size()); ++i)
      if (!labels[i].has_value()) out.push_back(i);
    return out;
  }
};

struct ValidationIssue {
  enum class Kind { kRowCountMismatch, kLabelOutOfRange, kNonFiniteValue, kBadShape };
  Kind kind;
  std::string message;
};

// Reports every invariant violation; an empty list means the dataset is
// usable by every downstream operation.
inline std::vector<ValidationIssue> validate_dataset(const MultiFeatureDataset& d) {
  std::vector<ValidationIssue> issues;
  auto add = [&issues](ValidationIssue::Kind k, const std::string& m) {
    issues.push_back({k, m});
  };

  if (d.features.empty()) {
    add(ValidationIssue::Kind::kBadShape, "dataset has no feature matrices");
    return issues;
  }
  if (d.feature_names.size() != d.features.size())
    add(ValidationIssue::Kind::kBadShape, "feature_names count does not match feature count");

  const Eigen::Index n = d.features.front().rows();
  for (std::size_t s = 0; s < d.features.size(); ++s) {
    const Matrix& f = d.features[s];
    std::string name = s < d.feature_names.size() ? d.feature_names[s]
                                                  : "feature " + std::to_string(s);
    if (f.rows() != n) {
      std::ostringstream msg;
      msg << "feature '" << name << "' has " << f.rows() << " rows, expected " << n;
      add(ValidationIssue::Kind::kRowCountMismatch, msg.str());
    }
    if (f.cols() < 1)
      add(ValidationIssue::Kind::kBadShape, "feature '" + name + "' has zero columns");
    if (!f.allFinite())
      add(ValidationIssue::Kind::kNonFiniteValue,
          "feature '" + name + "' contains NaN or Inf entries");
  }

  if (static_cast<Eigen::Index>(d.labels.size()) != n) {
    std::ostringstream msg;
    msg << "label list has " << d.labels.size() << " entries, expected " << n;
    add(ValidationIssue::Kind::kBadShape, msg.str());
  }
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    if (d.labels[i].has_value() && (*d.labels[i] < 1 || *d.labels[i] > d.num_classes)) {
      std::ostringstream msg;
      msg << "label " << *d.labels[i] << " of sample " << i << " outside {1.."
          << d.num_classes << "}";
      add(ValidationIssue::Kind::kLabelOutOfRange, msg.str());
    }
  }
  return issues;
}

// Per-class confidence scores; softmax output contract (non-negative,
// summing to 1 within 1e-9).
struct ConfidenceVector {
  Vector scores;

  int num_classes() const { return static_cast<int>(scores.size()); }
};

inline bool is_valid_confidence(const ConfidenceVector& c, double tol = 1e-9) {
  if (c.scores.size() == 0) return false;
  if ((c.scores.array() < -tol).any()) return false;
  return std::abs(c.scores.sum() - 1.0) <= tol;
}

// One pseudo-labeling event. source_view is the donor classifier that
// produced the label; the sample joined the training set of the other view.
struct PseudoLabel {
  int sample_id = -1;        // global row index
  int label = 0;             // class in {1..K}
  double confidence = 0.0;   // donor score for `label` at assignment time
  View source_view = View::kEf;
  bool relaxed = false;      // true when the fallback threshold selected it
  int round = 0;             // co-training round (>= 1)

  View receiving_view() const { return other_view(source_view); }

  friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

// The two co-training views, split into labeled and unlabeled pools.
// Row i of ef_labeled and lf_labeled describe the same underlying sample;
// labeled_ids / unlabeled_ids map pool-local rows to global row indices.
struct ViewPair {
  Matrix ef_labeled;
  Matrix ef_unlabeled;
  Matrix lf_labeled;
  Matrix lf_unlabeled;
  std::vector<int> labeled_ids;
  std::vector<int> unlabeled_ids;

  int labeled_count() const { return static_cast<int>(labeled_ids.size()); }
  int unlabeled_count() const { return static_cast<int>(unlabeled_ids.size()); }
};

// Rows of M selected by `ids`, in order.
inline Matrix rows_of(const Matrix& m, const std::vector<int>& ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), m.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= m.rows())
      throw std::out_of_range("rows_of: row index " + std::to_string(ids[i]) +
                              " outside matrix with " + std::to_string(m.rows()) + " rows");
    out.row(static_cast<Eigen::Index>(i)) = m.row(ids[i]);
  }
  return out;
}

}  // namespace curl
