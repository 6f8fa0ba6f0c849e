#pragma once

// Builds the two co-training views. Early fusion (EF) concatenates the raw
// features and learns one representation; late fusion (LF) learns one
// representation per raw feature and concatenates the outputs. The LF
// prototype budget is split evenly (floor plus leading remainder) so that
// D_LF = (sum of T_s)*r = T*r = D_EF.
//
// Fitting reads feature rows only, never labels. EF and the per-feature LF
// ensembles draw from disjoint seed streams ("EF", "LF"/s) so the views are
// not correlated through shared randomness.

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "curl/core_types.hpp"
#include "curl/ensemble_projection.hpp"
#include "curl/rng.hpp"

namespace curl {

// Row i = [x_i^(1), ..., x_i^(S)] in feature order.
inline Matrix early_fuse(const MultiFeatureDataset& d) {
  if (d.features.empty()) throw std::invalid_argument("early_fuse: no features");
  Eigen::Index total_cols = 0;
  for (const Matrix& f : d.features) total_cols += f.cols();
  Matrix out(d.features.front().rows(), total_cols);
  Eigen::Index at = 0;
  for (const Matrix& f : d.features) {
    out.middleCols(at, f.cols()) = f;
    at += f.cols();
  }
  return out;
}

// T split across S features: floor(T/S) each, remainder to the first T mod S.
inline std::vector<int> allocate_prototype_budget(int t, int s) {
  if (s < 1) throw std::invalid_argument("allocate_prototype_budget: need s >= 1");
  if (t < s)
    throw std::invalid_argument("allocate_prototype_budget: budget " + std::to_string(t) +
                                " below feature count " + std::to_string(s));
  std::vector<int> out(s, t / s);
  for (int i = 0; i < t % s; ++i) ++out[i];
  return out;
}

// The fitted URL component: one EF ensemble over concatenated features and
// one LF ensemble per raw feature. Kept so rows outside the fitting pool
// (held-out test samples) can be projected into both views later.
struct UrlModel {
  ProjectionEnsemble ef;
  std::vector<ProjectionEnsemble> lf;

  int ef_dim() const { return ef.output_dim(); }
  int lf_dim() const {
    int d = 0;
    for (const auto& e : lf) d += e.output_dim();
    return d;
  }

  Matrix project_ef(const MultiFeatureDataset& d, const std::vector<int>& ids) const {
    return ef.project_rows(rows_of(early_fuse(d), ids));
  }

  Matrix project_lf(const MultiFeatureDataset& d, const std::vector<int>& ids) const {
    if (d.features.size() != lf.size())
      throw std::invalid_argument("project_lf: dataset has " + std::to_string(d.features.size()) +
                                  " features, model expects " + std::to_string(lf.size()));
    Matrix out(static_cast<Eigen::Index>(ids.size()), lf_dim());
    Eigen::Index at = 0;
    for (std::size_t s = 0; s < lf.size(); ++s) {
      Matrix block = lf[s].project_rows(rows_of(d.features[s], ids));
      out.middleCols(at, block.cols()) = block;
      at += block.cols();
    }
    return out;
  }
};

// Fits EF and LF ensembles on every row of d (unsupervised).
inline UrlModel fit_url(const MultiFeatureDataset& d, const EpConfig& ep, int threads = 1) {
  ep.check();
  const int s = d.num_feature_kinds();
  if (s < 1) throw std::invalid_argument("fit_url: dataset has no features");

  UrlModel model;
  EpConfig ef_cfg = ep;
  ef_cfg.seed = derive_seed(ep.seed, "EF");
  model.ef = fit_ensemble(early_fuse(d), ef_cfg, threads);

  const std::vector<int> budget = allocate_prototype_budget(ep.t, s);
  model.lf.resize(s);
  for (int i = 0; i < s; ++i) {
    EpConfig lf_cfg = ep;
    lf_cfg.t = budget[i];
    lf_cfg.seed = derive_seed(ep.seed, "LF", static_cast<std::uint64_t>(i));
    model.lf[i] = fit_ensemble(d.features[i], lf_cfg, threads);
  }
  return model;
}

// Projects the labeled/unlabeled pools of d through a fitted model.
inline ViewPair make_view_pair(const UrlModel& model, const MultiFeatureDataset& d,
                               const std::vector<int>& labeled_ids,
                               const std::vector<int>& unlabeled_ids) {
  ViewPair views;
  views.labeled_ids = labeled_ids;
  views.unlabeled_ids = unlabeled_ids;
  views.ef_labeled = model.project_ef(d, labeled_ids);
  views.ef_unlabeled = model.project_ef(d, unlabeled_ids);
  views.lf_labeled = model.project_lf(d, labeled_ids);
  views.lf_unlabeled = model.project_lf(d, unlabeled_ids);
  return views;
}

// Algorithm: fit the URL component on all rows, then emit both views for
// the dataset's own labeled/unlabeled split.
inline ViewPair compute_url(const MultiFeatureDataset& d, const EpConfig& ep, int threads = 1) {
  auto issues = validate_dataset(d);
  if (!issues.empty()) throw DataError("compute_url: invalid dataset: " + issues.front().message);
  const std::vector<int> labeled = d.labeled_ids();
  const std::vector<int> unlabeled = d.unlabeled_ids();
  if (labeled.empty() || unlabeled.empty())
    throw DataError("compute_url: need at least one labeled and one unlabeled sample");
  UrlModel model = fit_url(d, ep, threads);
  return make_view_pair(model, d, labeled, unlabeled);
}

}  // namespace curl
