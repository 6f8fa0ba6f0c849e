// Minimal end-to-end walkthrough on a synthetic two-feature dataset: learn
// the unsupervised representations, co-train the two classifiers, and print
// the pool MAP of each head after every round.

#include <cstdio>
#include <vector>

#include "curl/cotraining.hpp"
#include "curl/data_io.hpp"
#include "curl/evaluation.hpp"

int main() {
  using namespace curl;

  // Two feature kinds of unequal quality, noisy enough that two labels per
  // class leave real room for the co-training rounds to improve things.
  SyntheticSpec spec;
  spec.classes = 4;
  spec.views = 2;
  spec.dims = {10, 12};
  spec.samples_per_class = 30;
  spec.spread = {0.9, 0.4};
  spec.noise_sigma = 1.0;
  spec.view_correlation = 0.3;
  spec.seed = 7;
  MultiFeatureDataset d = generate_synthetic(spec);

  // Keep 2 labels per class; everything else becomes the unlabeled pool.
  std::vector<int> truth;
  for (const auto& label : d.labels) truth.push_back(*label);
  for (int i = 0; i < d.num_samples(); ++i)
    if (i % 10 >= 2) d.labels[i] = std::nullopt;

  EpConfig ep;
  ep.t = 30;
  ep.r = 8;
  ep.n = 3;
  ep.m = 10;
  ep.seed = 1;

  // Learn the two representations and build the co-training views. The
  // unlabeled blocks double as scoring matrices for the transductive
  // protocol, where the training pool is also the test pool.
  UrlModel model = fit_url(d, ep, /*threads=*/2);
  const std::vector<int> labeled = d.labeled_ids();
  const std::vector<int> pool = d.unlabeled_ids();
  ViewPair views = make_view_pair(model, d, labeled, pool);

  std::vector<int> labeled_labels, y;
  for (int id : labeled) labeled_labels.push_back(truth[id]);
  for (int id : pool) y.push_back(truth[id]);

  CotrainConfig ct;
  ct.rounds = 5;

  std::printf("%5s %8s %8s %8s\n", "round", "EF", "LF", "EF&LF");
  CotrainState st = run_curl_on_views(
      views, labeled_labels, d.num_classes, ct, ep.logreg,
      [&](int round, const CotrainState& s) {
        const double map_ef =
            mean_average_precision(s.ef_clf.predict_proba_rows(views.ef_unlabeled), y);
        const double map_lf =
            mean_average_precision(s.lf_clf.predict_proba_rows(views.lf_unlabeled), y);
        const double map_fused = mean_average_precision(
            combine_predict_rows(s.ef_clf, s.lf_clf, views.ef_unlabeled, views.lf_unlabeled), y);
        std::printf("%5d %8.4f %8.4f %8.4f\n", round, map_ef, map_lf, map_fused);
      },
      /*threads=*/2);

  std::printf("pseudo-labels added: %zu into EF, %zu into LF\n", st.ef_ledger.size(),
              st.lf_ledger.size());
  return 0;
}
