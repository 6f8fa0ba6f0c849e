#pragma once

// Scenario construction and ranking metrics. Three ways of using unlabeled
// data: inductive (25% of the pool trains, the held-out 75% is the test
// set), transductive (the whole pool both trains and is scored), and
// self-taught (training unlabeled data comes from an external pool with a
// different distribution; the original pool is scored).
//
// The metric is MAP: per class, average precision of the per-class score
// ranking (mean of prefix precision at the positive ranks, no
// interpolation); score ties rank by ascending sample id.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "curl/core_types.hpp"
#include "curl/logistic_regression.hpp"
#include "curl/rng.hpp"

namespace curl {

enum class Scenario { kInductive, kTransductive, kSelfTaught };

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kInductive: return "inductive";
    case Scenario::kTransductive: return "transductive";
    case Scenario::kSelfTaught: return "self_taught";
  }
  return "?";
}

inline Scenario scenario_from_name(const std::string& name) {
  if (name == "inductive") return Scenario::kInductive;
  if (name == "transductive") return Scenario::kTransductive;
  if (name == "self_taught") return Scenario::kSelfTaught;
  throw ConfigError("unknown scenario '" + name +
                    "' (expected inductive, transductive, or self_taught)");
}

struct ScenarioSplit {
  Scenario kind = Scenario::kTransductive;
  std::vector<int> labeled_ids;          // rows of the benchmark dataset
  std::vector<int> train_unlabeled_ids;  // rows of the benchmark dataset, or of the
                                         // external dataset when external_train_pool
  std::vector<int> test_ids;             // always rows of the benchmark dataset
  bool external_train_pool = false;
};

// labels_per_class labeled rows drawn uniformly per class; the remaining
// rows form the unlabeled pool, partitioned per scenario. Id lists come out
// ascending. The 25% inductive cut is round-half-up of the pool size.
inline ScenarioSplit split_scenario(const MultiFeatureDataset& d, Scenario kind,
                                    int labels_per_class, const MultiFeatureDataset* external,
                                    Rng& rng) {
  if (labels_per_class < 1) throw std::invalid_argument("split_scenario: labels_per_class >= 1");
  ScenarioSplit split;
  split.kind = kind;

  std::vector<std::vector<int>> by_class(d.num_classes);
  for (int i = 0; i < d.num_samples(); ++i)
    if (d.labels[i]) by_class[*d.labels[i] - 1].push_back(i);

  std::vector<char> taken(d.num_samples(), 0);
  for (int k = 0; k < d.num_classes; ++k) {
    const auto& pool = by_class[k];
    if (static_cast<int>(pool.size()) < labels_per_class)
      throw DataError("split_scenario: class " + std::to_string(k + 1) + " has only " +
                      std::to_string(pool.size()) + " labeled candidates, need " +
                      std::to_string(labels_per_class));
    for (int j : rng.sample_without_replacement(static_cast<int>(pool.size()), labels_per_class)) {
      split.labeled_ids.push_back(pool[j]);
      taken[pool[j]] = 1;
    }
  }
  std::sort(split.labeled_ids.begin(), split.labeled_ids.end());

  std::vector<int> pool;
  for (int i = 0; i < d.num_samples(); ++i)
    if (!taken[i]) pool.push_back(i);

  switch (kind) {
    case Scenario::kTransductive:
      split.train_unlabeled_ids = pool;
      split.test_ids = pool;
      break;
    case Scenario::kInductive: {
      const int train_count = static_cast<int>(std::floor(0.25 * pool.size() + 0.5));
      if (train_count < 1 || train_count >= static_cast<int>(pool.size()))
        throw DataError("split_scenario: unlabeled pool of " + std::to_string(pool.size()) +
                        " cannot be split 25/75");
      std::vector<char> to_train(pool.size(), 0);
      for (int j : rng.sample_without_replacement(static_cast<int>(pool.size()), train_count))
        to_train[j] = 1;
      for (std::size_t j = 0; j < pool.size(); ++j)
        (to_train[j] ? split.train_unlabeled_ids : split.test_ids).push_back(pool[j]);
      break;
    }
    case Scenario::kSelfTaught: {
      if (!external)
        throw DataError("split_scenario: self_taught scenario needs an external dataset");
      split.external_train_pool = true;
      split.train_unlabeled_ids.resize(external->num_samples());
      std::iota(split.train_unlabeled_ids.begin(), split.train_unlabeled_ids.end(), 0);
      split.test_ids = pool;
      break;
    }
  }
  return split;
}

// Mean of prefix precision at the positive ranks. Requires >= 1 positive.
inline double average_precision(const Vector& scores, const std::vector<bool>& positives) {
  if (static_cast<std::size_t>(scores.size()) != positives.size())
    throw std::invalid_argument("average_precision: scores/positives length mismatch");
  const int m = static_cast<int>(scores.size());
  int num_pos = 0;
  for (bool p : positives) num_pos += p ? 1 : 0;
  if (num_pos == 0) throw std::invalid_argument("average_precision: no positive sample");

  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });

  double sum = 0.0;
  int hits = 0;
  for (int rank = 1; rank <= m; ++rank) {
    if (positives[order[rank - 1]]) {
      ++hits;
      sum += static_cast<double>(hits) / rank;
    }
  }
  return sum / num_pos;
}

// Mean over classes of the per-class-column AP. Every class needs >= 1
// positive in true_labels.
inline double mean_average_precision(const Matrix& scores, const std::vector<int>& true_labels) {
  if (static_cast<Eigen::Index>(true_labels.size()) != scores.rows())
    throw std::invalid_argument("mean_average_precision: label count mismatch");
  const int k = static_cast<int>(scores.cols());
  if (k < 1) throw std::invalid_argument("mean_average_precision: no classes");
  double sum = 0.0;
  for (int c = 1; c <= k; ++c) {
    std::vector<bool> positives(true_labels.size());
    bool any = false;
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
      positives[i] = true_labels[i] == c;
      any = any || positives[i];
    }
    if (!any)
      throw std::invalid_argument("mean_average_precision: class " + std::to_string(c) +
                                  " has no positive sample");
    sum += average_precision(scores.col(c - 1), positives);
  }
  return sum / k;
}

}  // namespace curl
