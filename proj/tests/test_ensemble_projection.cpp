#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "curl/ensemble_projection.hpp"
#include "curl/rng.hpp"

using namespace curl;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Independent oracle for the prototype expansion: given the drawn seeds,
// assign each remaining row to the nearest seed in seed order, n-1 rows per
// seed, ties to the smallest row index.
PrototypeSet brute_force_expand(const Matrix& data, const std::vector<int>& seeds, int n) {
  PrototypeSet out;
  out.seed_indices = seeds;
  std::vector<char> used(data.rows(), 0);
  for (int s : seeds) used[s] = 1;
  for (std::size_t p = 0; p < seeds.size(); ++p) {
    out.member_indices.push_back(seeds[p]);
    out.member_pseudo_labels.push_back(static_cast<int>(p) + 1);
    std::vector<std::pair<double, int>> cand;
    for (int i = 0; i < data.rows(); ++i)
      if (!used[i]) cand.emplace_back((data.row(i) - data.row(seeds[p])).norm(), i);
    std::sort(cand.begin(), cand.end());
    for (int j = 0; j < n - 1; ++j) {
      used[cand[j].second] = 1;
      out.member_indices.push_back(cand[j].second);
      out.member_pseudo_labels.push_back(static_cast<int>(p) + 1);
    }
  }
  return out;
}

// Finds an rng seed whose first r-of-total draw equals `want` (any order).
std::uint64_t seed_drawing(int total, const std::set<int>& want) {
  for (std::uint64_t s = 0; s < 10000; ++s) {
    Rng rng(s);
    auto drawn = rng.sample_without_replacement(total, static_cast<int>(want.size()));
    if (std::set<int>(drawn.begin(), drawn.end()) == want) return s;
  }
  FAIL("no rng seed found for the wanted draw");
  return 0;
}

}  // namespace

TEST_CASE("hypothesis with n=1 keeps bare seeds", "[ep]") {
  Matrix data = random_matrix(4, 2, 5);
  Rng rng(9);
  PrototypeSet set = sample_hypothesis(data, 2, 1, rng);
  REQUIRE(set.member_indices.size() == 2);
  REQUIRE(set.member_indices[0] != set.member_indices[1]);
  REQUIRE(set.member_pseudo_labels == std::vector<int>{1, 2});
  REQUIRE(set.member_indices == set.seed_indices);
}

TEST_CASE("nearest-neighbor expansion groups the line clusters", "[ep]") {
  Matrix data(4, 1);
  data << 0.0, 0.1, 10.0, 10.1;
  const std::uint64_t s = seed_drawing(4, {0, 2});
  Rng rng(s);
  PrototypeSet set = sample_hypothesis(data, 2, 2, rng);

  // Each seed picked up its own cluster mate.
  for (std::size_t i = 0; i < set.member_indices.size(); ++i) {
    const bool low_cluster = set.member_indices[i] <= 1;
    const int label = set.member_pseudo_labels[i];
    const bool seed0_low = set.seed_indices[0] <= 1;
    REQUIRE(low_cluster == (label == (seed0_low ? 1 : 2)));
  }
  std::set<int> all(set.member_indices.begin(), set.member_indices.end());
  REQUIRE(all == std::set<int>{0, 1, 2, 3});
}

TEST_CASE("expansion matches a brute-force oracle", "[ep]") {
  Rng meta(77);
  for (int trial = 0; trial < 10; ++trial) {
    const int total = 20 + static_cast<int>(meta.uniform_index(20));
    const int r = 2 + static_cast<int>(meta.uniform_index(3));
    const int n = 1 + static_cast<int>(meta.uniform_index(4));
    Matrix data = random_matrix(total, 3, meta.next_u64());

    const std::uint64_t s = meta.next_u64();
    Rng rng_a(s), rng_b(s);
    PrototypeSet got = sample_hypothesis(data, r, n, rng_a);
    PrototypeSet want = brute_force_expand(data, rng_b.sample_without_replacement(total, r), n);
    REQUIRE(got.member_indices == want.member_indices);
    REQUIRE(got.member_pseudo_labels == want.member_pseudo_labels);
  }
}

TEST_CASE("diversity of two seeds is their distance", "[ep]") {
  Matrix data(2, 1);
  data << 0.0, 3.0;
  Rng rng(1);
  PrototypeSet set = sample_hypothesis(data, 2, 1, rng);
  REQUIRE(set.diversity_score == Catch::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("too few rows are rejected", "[ep]") {
  Matrix data = random_matrix(5, 2, 3);
  Rng rng(2);
  REQUIRE_THROWS_AS(sample_hypothesis(data, 3, 2, rng), std::invalid_argument);
}

TEST_CASE("selection with m=1 equals a single hypothesis", "[ep]") {
  Matrix data = random_matrix(15, 2, 11);
  Rng rng_a(4), rng_b(4);
  PrototypeSet a = select_prototype_set(data, 3, 2, 1, rng_a);
  PrototypeSet b = sample_hypothesis(data, 3, 2, rng_b);
  REQUIRE(a.member_indices == b.member_indices);
  REQUIRE(a.diversity_score == b.diversity_score);
}

TEST_CASE("selection returns the maximum over its hypotheses", "[ep]") {
  Matrix data = random_matrix(40, 4, 13);
  Rng rng(6);
  std::vector<double> scores;
  PrototypeSet best = select_prototype_set(data, 4, 3, 50, rng, &scores);
  REQUIRE(scores.size() == 50);
  for (double s : scores) REQUIRE(best.diversity_score >= s);
  REQUIRE(best.diversity_score == *std::max_element(scores.begin(), scores.end()));
}

TEST_CASE("score ties keep the earliest hypothesis", "[ep]") {
  // Equilateral triangle: every seed pair is at the same distance, so all
  // hypotheses score identically.
  Matrix data(3, 2);
  data << 0.0, 0.0, 1.0, 0.0, 0.5, std::sqrt(3.0) / 2.0;
  Rng rng_a(8), rng_b(8);
  PrototypeSet best = select_prototype_set(data, 2, 1, 5, rng_a);
  PrototypeSet first = sample_hypothesis(data, 2, 1, rng_b);
  REQUIRE(best.seed_indices == first.seed_indices);
}

TEST_CASE("fitted ensemble has output dim T*r and is deterministic", "[ep]") {
  Matrix data = random_matrix(30, 4, 17);
  EpConfig cfg;
  cfg.t = 5;
  cfg.r = 3;
  cfg.n = 2;
  cfg.m = 4;
  cfg.seed = 99;
  ProjectionEnsemble a = fit_ensemble(data, cfg);
  REQUIRE(a.output_dim() == 15);
  REQUIRE(a.num_members() == 5);

  ProjectionEnsemble b = fit_ensemble(data, cfg);
  for (int t = 0; t < 5; ++t) {
    REQUIRE(a.members()[t].weights() == b.members()[t].weights());
    REQUIRE(a.members()[t].biases() == b.members()[t].biases());
  }
}

TEST_CASE("thread count does not change the fit", "[ep]") {
  Matrix data = random_matrix(30, 4, 21);
  EpConfig cfg;
  cfg.t = 6;
  cfg.r = 3;
  cfg.n = 2;
  cfg.m = 3;
  cfg.seed = 5;
  ProjectionEnsemble serial = fit_ensemble(data, cfg, 1);
  ProjectionEnsemble threaded = fit_ensemble(data, cfg, 4);
  for (int t = 0; t < cfg.t; ++t)
    REQUIRE(serial.members()[t].weights() == threaded.members()[t].weights());
}

TEST_CASE("two samples train a separating two-class member", "[ep]") {
  Matrix data(2, 2);
  data << 0.0, 0.0, 4.0, 4.0;
  EpConfig cfg;
  cfg.t = 1;
  cfg.r = 2;
  cfg.n = 1;
  cfg.m = 1;
  cfg.standardize = false;
  ProjectionEnsemble ens = fit_ensemble(data, cfg);
  const PrototypeSet& set = ens.prototype_sets()[0];
  for (int i = 0; i < 2; ++i) {
    Vector p = ens.project(data.row(set.member_indices[i]).transpose());
    int argmax = 0;
    p.maxCoeff(&argmax);
    REQUIRE(argmax + 1 == set.member_pseudo_labels[i]);
  }
}

TEST_CASE("projection blocks are simplexes and sum to T", "[ep]") {
  Matrix data = random_matrix(30, 3, 23);
  EpConfig cfg;
  cfg.t = 4;
  cfg.r = 3;
  cfg.n = 2;
  cfg.m = 2;
  cfg.seed = 31;
  ProjectionEnsemble ens = fit_ensemble(data, cfg);
  Rng rng(55);
  for (int trial = 0; trial < 5; ++trial) {
    Vector x(3);
    for (int j = 0; j < 3; ++j) x[j] = 3.0 * rng.normal();
    Vector p = ens.project(x);
    REQUIRE(p.size() == 12);
    REQUIRE(p.sum() == Catch::Approx(4.0).margin(1e-9));
    for (int t = 0; t < 4; ++t) {
      ConfidenceVector block{p.segment(3 * t, 3)};
      REQUIRE(is_valid_confidence(block));
    }
  }
}

TEST_CASE("single-member projection equals the member's prediction", "[ep]") {
  Matrix data = random_matrix(12, 2, 29);
  EpConfig cfg;
  cfg.t = 1;
  cfg.r = 3;
  cfg.n = 2;
  cfg.m = 2;
  ProjectionEnsemble ens = fit_ensemble(data, cfg);
  Vector x(2);
  x << 0.7, -0.3;
  Vector p = ens.project(x);
  Standardizer st = Standardizer::fit(data);
  Vector direct = ens.members()[0].predict_proba(st.apply(x)).scores;
  REQUIRE((p - direct).norm() == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("permuting member order permutes output blocks", "[ep]") {
  Matrix data = random_matrix(20, 3, 37);
  EpConfig cfg;
  cfg.t = 3;
  cfg.r = 2;
  cfg.n = 2;
  cfg.m = 2;
  cfg.standardize = false;
  ProjectionEnsemble ens = fit_ensemble(data, cfg);

  std::vector<ProbClassifier> reversed(ens.members().rbegin(), ens.members().rend());
  ProjectionEnsemble flipped(std::move(reversed), {}, std::nullopt, ens.input_dim());
  Vector x(3);
  x << 1.0, 0.0, -1.0;
  Vector p = ens.project(x);
  Vector q = flipped.project(x);
  for (int t = 0; t < 3; ++t)
    REQUIRE(p.segment(2 * t, 2) == q.segment(2 * (2 - t), 2));
}

TEST_CASE("projection rejects dimension mismatches", "[ep]") {
  Matrix data = random_matrix(12, 3, 41);
  EpConfig cfg;
  cfg.t = 2;
  cfg.r = 2;
  cfg.n = 2;
  cfg.m = 1;
  ProjectionEnsemble ens = fit_ensemble(data, cfg);
  REQUIRE_THROWS_AS(ens.project(Vector::Zero(4)), std::invalid_argument);
  REQUIRE_THROWS_AS(ens.project_rows(Matrix::Zero(2, 2)), std::invalid_argument);
}

TEST_CASE("standardizer centers and scales, leaving flat columns alone", "[ep]") {
  Matrix data = random_matrix(50, 3, 43);
  data.col(1).setConstant(7.0);  // zero variance
  data.col(0) *= 12.0;
  Standardizer st = Standardizer::fit(data);
  Matrix z = st.apply(data);
  REQUIRE(z.col(0).mean() == Catch::Approx(0.0).margin(1e-12));
  const double var = z.col(0).squaredNorm() / 50.0;
  REQUIRE(var == Catch::Approx(1.0).epsilon(1e-9));
  REQUIRE((z.col(1).array() == 0.0).all());
  REQUIRE(st.scale[1] == 1.0);
}

TEST_CASE("batch projection equals per-row projection", "[ep]") {
  Matrix data = random_matrix(25, 3, 47);
  EpConfig cfg;
  cfg.t = 3;
  cfg.r = 3;
  cfg.n = 2;
  cfg.m = 2;
  ProjectionEnsemble ens = fit_ensemble(data, cfg);
  Matrix probe = random_matrix(6, 3, 53);
  Matrix batch = ens.project_rows(probe);
  for (int i = 0; i < 6; ++i) {
    Vector single = ens.project(probe.row(i).transpose());
    REQUIRE((batch.row(i).transpose() - single).norm() == Catch::Approx(0.0).margin(1e-12));
  }
}
