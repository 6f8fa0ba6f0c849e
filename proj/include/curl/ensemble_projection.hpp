#pragma once

// Ensemble Projection: unsupervised representation learning. T prototype
// sets are sampled from all data (labeled and unlabeled alike; labels are
// never read), one discriminative classifier is trained per set, and a
// sample's representation is the concatenation of the T classifiers'
// probability outputs, dimension T*r.
//
// A prototype set holds r pseudo-classes of n samples: r seeds drawn
// without replacement, each expanded with its n-1 nearest not-yet-used
// neighbors (Euclidean, ties to the smallest row index). Of m such
// hypotheses the one with the largest mutual seed distance survives.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "curl/core_types.hpp"
#include "curl/logistic_regression.hpp"
#include "curl/parallel.hpp"
#include "curl/rng.hpp"

namespace curl {

struct EpConfig {
  int t = 300;  // prototype sets
  int r = 30;   // prototypes (pseudo-classes) per set
  int n = 6;    // samples per prototype
  int m = 50;   // hypotheses sampled per set
  bool standardize = true;  // z-score inputs with stats over all rows
  LogRegConfig logreg{};
  std::uint64_t seed = 0;

  void check() const {
    if (t < 1) throw std::invalid_argument("EpConfig: t must be >= 1");
    if (r < 2) throw std::invalid_argument("EpConfig: r must be >= 2");
    if (n < 1) throw std::invalid_argument("EpConfig: n must be >= 1");
    if (m < 1) throw std::invalid_argument("EpConfig: m must be >= 1");
    logreg.check();
  }
};

struct PrototypeSet {
  std::vector<int> member_indices;        // r*n row indices, distinct
  std::vector<int> member_pseudo_labels;  // aligned, values in {1..r}
  std::vector<int> seed_indices;          // the r seeds, in draw order
  double diversity_score = 0.0;           // sum of pairwise seed distances
};

// One hypothesis: seeds drawn uniformly without replacement, then each seed
// grabs its n-1 nearest still-unused rows. Members are listed prototype by
// prototype, seed first, neighbors in ascending distance order.
inline PrototypeSet sample_hypothesis(const Matrix& data, int r, int n, Rng& rng) {
  const int total = static_cast<int>(data.rows());
  if (total < r * n)
    throw std::invalid_argument("sample_hypothesis: need at least r*n = " +
                                std::to_string(r * n) + " rows, have " + std::to_string(total));

  PrototypeSet set;
  set.seed_indices = rng.sample_without_replacement(total, r);
  std::vector<char> used(total, 0);
  for (int s : set.seed_indices) used[s] = 1;

  set.member_indices.reserve(static_cast<std::size_t>(r) * n);
  set.member_pseudo_labels.reserve(static_cast<std::size_t>(r) * n);
  for (int p = 0; p < r; ++p) {
    const int seed_row = set.seed_indices[p];
    set.member_indices.push_back(seed_row);
    set.member_pseudo_labels.push_back(p + 1);
    if (n > 1) {
      std::vector<std::pair<double, int>> dist;
      dist.reserve(total);
      for (int i = 0; i < total; ++i) {
        if (used[i]) continue;
        dist.emplace_back((data.row(i) - data.row(seed_row)).norm(), i);
      }
      std::partial_sort(dist.begin(), dist.begin() + (n - 1), dist.end());
      for (int j = 0; j < n - 1; ++j) {
        used[dist[j].second] = 1;
        set.member_indices.push_back(dist[j].second);
        set.member_pseudo_labels.push_back(p + 1);
      }
    }
  }

  for (int a = 0; a < r; ++a)
    for (int b = a + 1; b < r; ++b)
      set.diversity_score += (data.row(set.seed_indices[a]) - data.row(set.seed_indices[b])).norm();
  return set;
}

// Best of m hypotheses by diversity_score; ties keep the earliest-sampled.
// When all_scores is given it receives every hypothesis's score, in order.
inline PrototypeSet select_prototype_set(const Matrix& data, int r, int n, int m, Rng& rng,
                                         std::vector<double>* all_scores = nullptr) {
  if (m < 1) throw std::invalid_argument("select_prototype_set: m must be >= 1");
  PrototypeSet best;
  bool have = false;
  for (int h = 0; h < m; ++h) {
    PrototypeSet cand = sample_hypothesis(data, r, n, rng);
    if (all_scores) all_scores->push_back(cand.diversity_score);
    if (!have || cand.diversity_score > best.diversity_score) {
      best = std::move(cand);
      have = true;
    }
  }
  return best;
}

// Per-dimension z-score transform; degenerate dimensions pass through.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& data) {
    Standardizer st;
    st.mean = data.colwise().mean().transpose();
    Matrix centered = data.rowwise() - st.mean.transpose();
    st.scale = centered.array().square().colwise().mean().sqrt().transpose();
    for (Eigen::Index j = 0; j < st.scale.size(); ++j)
      if (st.scale[j] <= 0.0) st.scale[j] = 1.0;
    return st;
  }

  Vector apply(const Vector& x) const { return (x - mean).cwiseQuotient(scale); }

  Matrix apply(const Matrix& x) const {
    Matrix out = x.rowwise() - mean.transpose();
    for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) /= scale[j];
    return out;
  }
};

class ProjectionEnsemble {
 public:
  ProjectionEnsemble() = default;
  ProjectionEnsemble(std::vector<ProbClassifier> members, std::vector<PrototypeSet> sets,
                     std::optional<Standardizer> standardizer, int input_dim)
      : members_(std::move(members)),
        sets_(std::move(sets)),
        standardizer_(std::move(standardizer)),
        input_dim_(input_dim) {}

  int num_members() const { return static_cast<int>(members_.size()); }
  int input_dim() const { return input_dim_; }
  int output_dim() const {
    return members_.empty() ? 0 : num_members() * members_.front().num_classes();
  }
  const std::vector<ProbClassifier>& members() const { return members_; }
  const std::vector<PrototypeSet>& prototype_sets() const { return sets_; }

  // Concatenated member probabilities; block t is member t's softmax output.
  Vector project(const Vector& x) const {
    if (x.size() != input_dim_)
      throw std::invalid_argument("project: input has dim " + std::to_string(x.size()) +
                                  ", ensemble expects " + std::to_string(input_dim_));
    const Vector xs = standardizer_ ? standardizer_->apply(x) : x;
    const int r = members_.front().num_classes();
    Vector out(output_dim());
    for (int t = 0; t < num_members(); ++t)
      out.segment(static_cast<Eigen::Index>(t) * r, r) = members_[t].predict_proba(xs).scores;
    return out;
  }

  Matrix project_rows(const Matrix& x) const {
    if (x.cols() != input_dim_)
      throw std::invalid_argument("project_rows: input has dim " + std::to_string(x.cols()) +
                                  ", ensemble expects " + std::to_string(input_dim_));
    const Matrix xs = standardizer_ ? standardizer_->apply(x) : x;
    const int r = members_.front().num_classes();
    Matrix out(x.rows(), output_dim());
    for (int t = 0; t < num_members(); ++t)
      out.middleCols(static_cast<Eigen::Index>(t) * r, r) = members_[t].predict_proba_rows(xs);
    return out;
  }

 private:
  std::vector<ProbClassifier> members_;
  std::vector<PrototypeSet> sets_;
  std::optional<Standardizer> standardizer_;
  int input_dim_ = 0;
};

// Fits the T members. Member t draws from its own stream derived from
// (seed, "member", t), so the result is independent of scheduling; any
// thread count reproduces the sequential ensemble bit for bit.
inline ProjectionEnsemble fit_ensemble(const Matrix& data, const EpConfig& config,
                                       int threads = 1) {
  config.check();
  if (data.rows() < static_cast<Eigen::Index>(config.r) * config.n)
    throw std::invalid_argument("fit_ensemble: need at least r*n rows");
  if (!data.allFinite()) throw std::invalid_argument("fit_ensemble: non-finite features");

  std::optional<Standardizer> st;
  const Matrix* fit_data = &data;
  Matrix standardized;
  if (config.standardize) {
    st = Standardizer::fit(data);
    standardized = st->apply(data);
    fit_data = &standardized;
  }

  std::vector<ProbClassifier> members(config.t);
  std::vector<PrototypeSet> sets(config.t);
  parallel_for(config.t, threads, [&](int t) {
    Rng rng(derive_seed(config.seed, "member", static_cast<std::uint64_t>(t)));
    PrototypeSet set = select_prototype_set(*fit_data, config.r, config.n, config.m, rng);
    Matrix x = rows_of(*fit_data, set.member_indices);
    members[t] = train_logreg(x, set.member_pseudo_labels, config.r, config.logreg);
    sets[t] = std::move(set);
  });
  return ProjectionEnsemble(std::move(members), std::move(sets), std::move(st),
                            static_cast<int>(data.cols()));
}

}  // namespace curl
