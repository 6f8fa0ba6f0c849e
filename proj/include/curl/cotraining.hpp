#pragma once

// The co-training loop. Two classifiers, one per view, are trained on their
// own labeled sets; each round, every class may receive pseudo-labeled
// samples selected cross-view: the donor view's confidence must clear a
// threshold (and beat the receiving view's own score under the primary
// rule). The NMS variant keeps at most the single most confident candidate
// per (class, view, round); the add-all variant keeps every primary-rule
// candidate and never relaxes the thresholds.
//
// All selection within a round works on score and membership snapshots
// taken at round start, so class order and the EF/LF pass order cannot leak
// same-round additions into later decisions. Additions are permanent.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "curl/core_types.hpp"
#include "curl/fusion.hpp"
#include "curl/logistic_regression.hpp"
#include "curl/parallel.hpp"

namespace curl {

enum class Variant { kNms, kAddAll };

inline const char* variant_name(Variant v) { return v == Variant::kNms ? "NMS" : "ADD_ALL"; }

struct CotrainConfig {
  int rounds = 5;
  double t1 = 0.7;  // primary-rule confidence threshold
  double t2 = 0.4;  // relaxed threshold, fired only when the primary rule finds nothing
  Variant variant = Variant::kNms;

  void check() const {
    if (rounds < 0) throw std::invalid_argument("CotrainConfig: rounds must be >= 0");
    if (!(t1 > 0.0 && t1 <= 1.0)) throw std::invalid_argument("CotrainConfig: t1 must be in (0,1]");
    if (!(t2 > 0.0 && t2 < t1)) throw std::invalid_argument("CotrainConfig: need 0 < t2 < t1");
  }
};

// (argmax class, max score); ties go to the smallest class index.
inline std::pair<int, double> pseudo_label(const ConfidenceVector& w) {
  if (w.scores.size() == 0) throw std::invalid_argument("pseudo_label: empty confidence vector");
  int best = 0;
  for (int k = 1; k < w.num_classes(); ++k)
    if (w.scores[k] > w.scores[best]) best = k;
  return {best + 1, w.scores[best]};
}

struct CandidateSet {
  std::vector<int> rows;  // unlabeled-pool rows, ascending
  bool relaxed = false;
};

// Selection rules for class `cls`, receiving view scores `recv_scores`,
// donor view scores `donor_scores` (both U x K, rows = unlabeled pool).
// Primary rule: row not yet in the receiving view's labeled set, donor
// pseudo-label equals cls, recv score below donor score, donor score > t1.
// When the primary rule selects nothing and relaxation is allowed, the
// relaxed rule keeps rows with donor pseudo-label cls and donor score > t2.
inline CandidateSet select_candidates(int cls, const Matrix& recv_scores,
                                      const Matrix& donor_scores,
                                      const std::vector<int>& donor_labels,
                                      const std::vector<char>& recv_member, double t1, double t2,
                                      bool allow_relax) {
  const int u = static_cast<int>(donor_scores.rows());
  if (recv_scores.rows() != u || static_cast<int>(donor_labels.size()) != u ||
      static_cast<int>(recv_member.size()) != u)
    throw std::invalid_argument("select_candidates: pool size mismatch");
  const int col = cls - 1;
  if (col < 0 || col >= donor_scores.cols())
    throw std::invalid_argument("select_candidates: class out of range");

  CandidateSet out;
  for (int i = 0; i < u; ++i) {
    if (recv_member[i] || donor_labels[i] != cls) continue;
    if (recv_scores(i, col) < donor_scores(i, col) && donor_scores(i, col) > t1)
      out.rows.push_back(i);
  }
  if (out.rows.empty() && allow_relax) {
    for (int i = 0; i < u; ++i) {
      if (recv_member[i] || donor_labels[i] != cls) continue;
      if (donor_scores(i, col) > t2) out.rows.push_back(i);
    }
    out.relaxed = !out.rows.empty();
  }
  return out;
}

// Keeps the id with the highest score; ties go to the smallest id.
inline std::optional<int> non_max_suppression(const std::vector<int>& ids,
                                              const std::vector<double>& scores) {
  if (ids.size() != scores.size())
    throw std::invalid_argument("non_max_suppression: ids/scores length mismatch");
  std::optional<int> best;
  double best_score = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!best || scores[i] > best_score || (scores[i] == best_score && ids[i] < *best)) {
      best = ids[i];
      best_score = scores[i];
    }
  }
  return best;
}

// Inputs of one co-training run over a fixed pair of views.
struct CotrainProblem {
  const ViewPair* views = nullptr;
  std::vector<int> labeled_labels;  // labels of views->labeled_ids, in pool order
  int num_classes = 0;
  LogRegConfig logreg{};
};

struct RoundRecord {
  int round = 0;
  std::vector<PseudoLabel> additions;  // both views, EF-receiving entries first
  Matrix ef_scores;  // U x K snapshots governing this round's selections
  Matrix lf_scores;
};

struct CotrainState {
  ProbClassifier ef_clf;
  ProbClassifier lf_clf;
  int round = 0;

  // Pseudo-labeled growth per view: unlabeled-pool rows, their labels, and
  // a membership mask over the pool.
  std::vector<int> ef_added_rows, lf_added_rows;
  std::vector<int> ef_added_labels, lf_added_labels;
  std::vector<char> ef_member, lf_member;

  std::vector<PseudoLabel> ef_ledger, lf_ledger;  // additions into that view
  std::vector<RoundRecord> history;
};

namespace detail {

inline ProbClassifier train_view(const Matrix& labeled, const Matrix& unlabeled,
                                 const std::vector<int>& labels,
                                 const std::vector<int>& added_rows,
                                 const std::vector<int>& added_labels, int num_classes,
                                 const LogRegConfig& cfg) {
  Matrix x(labeled.rows() + static_cast<Eigen::Index>(added_rows.size()), labeled.cols());
  x.topRows(labeled.rows()) = labeled;
  for (std::size_t i = 0; i < added_rows.size(); ++i)
    x.row(labeled.rows() + static_cast<Eigen::Index>(i)) = unlabeled.row(added_rows[i]);
  std::vector<int> y = labels;
  y.insert(y.end(), added_labels.begin(), added_labels.end());
  return train_logreg(x, y, num_classes, cfg);
}

}  // namespace detail

inline CotrainState init_cotrain(const CotrainProblem& p, int threads = 1) {
  if (!p.views) throw std::invalid_argument("init_cotrain: missing views");
  const ViewPair& v = *p.views;
  if (static_cast<int>(p.labeled_labels.size()) != v.labeled_count())
    throw std::invalid_argument("init_cotrain: labels do not match labeled pool size");
  for (int label : p.labeled_labels)
    if (label < 1 || label > p.num_classes)
      throw std::invalid_argument("init_cotrain: label outside {1..K}");

  CotrainState st;
  st.ef_member.assign(v.unlabeled_count(), 0);
  st.lf_member.assign(v.unlabeled_count(), 0);
  ProbClassifier* out[2] = {&st.ef_clf, &st.lf_clf};
  parallel_for(2, threads, [&](int i) {
    *out[i] = detail::train_view(i == 0 ? v.ef_labeled : v.lf_labeled,
                                 i == 0 ? v.ef_unlabeled : v.lf_unlabeled, p.labeled_labels, {},
                                 {}, p.num_classes, p.logreg);
  });
  return st;
}

// One round: snapshot scores, select per class for both receiving views,
// apply the additions, retrain both classifiers from scratch.
inline void cotrain_round(CotrainState& st, const CotrainProblem& p, const CotrainConfig& cfg,
                          int threads = 1) {
  cfg.check();
  const ViewPair& v = *p.views;
  const int u = v.unlabeled_count();
  const int round = st.round + 1;

  RoundRecord rec;
  rec.round = round;
  rec.ef_scores = st.ef_clf.predict_proba_rows(v.ef_unlabeled);
  rec.lf_scores = st.lf_clf.predict_proba_rows(v.lf_unlabeled);

  std::vector<int> ef_pl(u), lf_pl(u);
  for (int i = 0; i < u; ++i) {
    ef_pl[i] = pseudo_label({rec.ef_scores.row(i).transpose()}).first;
    lf_pl[i] = pseudo_label({rec.lf_scores.row(i).transpose()}).first;
  }

  const std::vector<char> ef_member0 = st.ef_member;
  const std::vector<char> lf_member0 = st.lf_member;
  const bool nms = cfg.variant == Variant::kNms;

  struct Pending {
    View receiver;
    int row;
    PseudoLabel pl;
  };
  std::vector<Pending> pending;

  for (int cls = 1; cls <= p.num_classes; ++cls) {
    struct Pass {
      View receiver;
      const Matrix& recv_scores;
      const Matrix& donor_scores;
      const std::vector<int>& donor_labels;
      const std::vector<char>& recv_member;
    };
    const Pass passes[2] = {
        {View::kEf, rec.ef_scores, rec.lf_scores, lf_pl, ef_member0},
        {View::kLf, rec.lf_scores, rec.ef_scores, ef_pl, lf_member0},
    };
    for (const Pass& pass : passes) {
      CandidateSet cands =
          select_candidates(cls, pass.recv_scores, pass.donor_scores, pass.donor_labels,
                            pass.recv_member, cfg.t1, cfg.t2, /*allow_relax=*/nms);
      std::vector<int> keep;
      if (nms) {
        std::vector<double> scores;
        scores.reserve(cands.rows.size());
        for (int row : cands.rows) scores.push_back(pass.donor_scores(row, cls - 1));
        if (auto pick = non_max_suppression(cands.rows, scores)) keep.push_back(*pick);
      } else {
        keep = cands.rows;
      }
      for (int row : keep) {
        PseudoLabel pl;
        pl.sample_id = v.unlabeled_ids[row];
        pl.label = cls;
        pl.confidence = pass.donor_scores(row, cls - 1);
        pl.source_view = other_view(pass.receiver);
        pl.relaxed = cands.relaxed;
        pl.round = round;
        pending.push_back({pass.receiver, row, pl});
      }
    }
  }

  for (const Pending& add : pending) {
    auto& member = add.receiver == View::kEf ? st.ef_member : st.lf_member;
    if (member[add.row])
      throw std::logic_error("cotrain_round: duplicate addition into a view's labeled set");
    member[add.row] = 1;
    auto& rows = add.receiver == View::kEf ? st.ef_added_rows : st.lf_added_rows;
    auto& labels = add.receiver == View::kEf ? st.ef_added_labels : st.lf_added_labels;
    auto& ledger = add.receiver == View::kEf ? st.ef_ledger : st.lf_ledger;
    rows.push_back(add.row);
    labels.push_back(add.pl.label);
    ledger.push_back(add.pl);
    rec.additions.push_back(add.pl);
  }
  st.history.push_back(std::move(rec));

  ProbClassifier* out[2] = {&st.ef_clf, &st.lf_clf};
  parallel_for(2, threads, [&](int i) {
    if (i == 0)
      *out[0] = detail::train_view(v.ef_labeled, v.ef_unlabeled, p.labeled_labels,
                                   st.ef_added_rows, st.ef_added_labels, p.num_classes, p.logreg);
    else
      *out[1] = detail::train_view(v.lf_labeled, v.lf_unlabeled, p.labeled_labels,
                                   st.lf_added_rows, st.lf_added_labels, p.num_classes, p.logreg);
  });
  st.round = round;
}

// Called with the state after round 0 (initial training) and after every
// completed round; used by runners to score test pools round by round.
using RoundObserver = std::function<void(int round, const CotrainState& st)>;

inline CotrainState run_curl_on_views(const ViewPair& views,
                                      const std::vector<int>& labeled_labels, int num_classes,
                                      const CotrainConfig& ct, const LogRegConfig& lr,
                                      const RoundObserver& observer = {}, int threads = 1) {
  ct.check();
  CotrainProblem p{&views, labeled_labels, num_classes, lr};
  CotrainState st = init_cotrain(p, threads);
  if (observer) observer(0, st);
  for (int c = 1; c <= ct.rounds; ++c) {
    cotrain_round(st, p, ct, threads);
    if (observer) observer(c, st);
  }
  return st;
}

struct CurlRun {
  UrlModel model;
  ViewPair views;
  CotrainState state;
};

// Full procedure: build the views once, train, co-train for ct.rounds.
// The co-trained classifiers use the same LR settings as the ensemble
// members (ep.logreg).
inline CurlRun run_curl(const MultiFeatureDataset& d, const EpConfig& ep,
                        const CotrainConfig& ct, int threads = 1,
                        const RoundObserver& observer = {}) {
  auto issues = validate_dataset(d);
  if (!issues.empty()) throw DataError("run_curl: invalid dataset: " + issues.front().message);
  std::vector<int> per_class(d.num_classes, 0);
  for (const auto& label : d.labels)
    if (label) ++per_class[*label - 1];
  for (int k = 0; k < d.num_classes; ++k)
    if (per_class[k] == 0)
      throw DataError("run_curl: class " + std::to_string(k + 1) + " has no labeled sample");

  CurlRun run;
  run.model = fit_url(d, ep, threads);
  const std::vector<int> labeled = d.labeled_ids();
  const std::vector<int> unlabeled = d.unlabeled_ids();
  if (unlabeled.empty()) throw DataError("run_curl: no unlabeled samples");
  run.views = make_view_pair(run.model, d, labeled, unlabeled);
  std::vector<int> labels;
  labels.reserve(labeled.size());
  for (int id : labeled) labels.push_back(*d.labels[id]);
  run.state = run_curl_on_views(run.views, labels, d.num_classes, ct, ep.logreg, observer, threads);
  return run;
}

// Elementwise mean of the two views' probability vectors.
inline ConfidenceVector combine_predict(const ProbClassifier& ef_clf, const ProbClassifier& lf_clf,
                                        const Vector& x_ef, const Vector& x_lf) {
  if (ef_clf.num_classes() != lf_clf.num_classes())
    throw std::invalid_argument("combine_predict: classifiers disagree on class count");
  ConfidenceVector a = ef_clf.predict_proba(x_ef);
  ConfidenceVector b = lf_clf.predict_proba(x_lf);
  return {0.5 * (a.scores + b.scores)};
}

inline Matrix combine_predict_rows(const ProbClassifier& ef_clf, const ProbClassifier& lf_clf,
                                   const Matrix& x_ef, const Matrix& x_lf) {
  if (ef_clf.num_classes() != lf_clf.num_classes())
    throw std::invalid_argument("combine_predict_rows: classifiers disagree on class count");
  if (x_ef.rows() != x_lf.rows())
    throw std::invalid_argument("combine_predict_rows: row count mismatch");
  return 0.5 * (ef_clf.predict_proba_rows(x_ef) + lf_clf.predict_proba_rows(x_lf));
}

}  // namespace curl
