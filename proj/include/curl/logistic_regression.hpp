#pragma once

// L2-regularized multinomial logistic regression with softmax outputs.
// Used as the per-prototype-set discriminator inside ensemble projection and
// as the co-trained classifier on each fused view.
//
// Objective (liblinear-style C, biases unpenalized):
//   J(W, b) = sum_i [logsumexp(z_i) - z_i[y_i]] + (1/(2C)) * ||W||_F^2,
//   z_i = W x_i + b.
// Training is full-batch L-BFGS with Armijo backtracking from a zero start,
// so identical data and config always reproduce bit-identical weights.

#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>
#include <vector>

#include "curl/core_types.hpp"

namespace curl {

struct LogRegConfig {
  double c = 15.0;       // inverse regularization strength; penalty weight is 1/C
  double tol = 1e-8;     // relative objective decrease that stops training
  int max_iters = 500;

  void check() const {
    if (!(c > 0)) throw std::invalid_argument("LogRegConfig: c must be positive");
    if (!(tol > 0)) throw std::invalid_argument("LogRegConfig: tol must be positive");
    if (max_iters < 1) throw std::invalid_argument("LogRegConfig: max_iters must be >= 1");
  }
};

struct TrainMeta {
  int iterations = 0;
  double objective = 0.0;
  std::vector<double> objective_trace;  // objective after each accepted step
};

namespace detail {

// Row-wise softmax of logits, in place, with the usual max shift.
inline void softmax_rows(Matrix& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double zmax = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - zmax).exp();
    z.row(i) /= z.row(i).sum();
  }
}

}  // namespace detail

class ProbClassifier {
 public:
  ProbClassifier() = default;
  ProbClassifier(Matrix weights, Vector biases, TrainMeta meta = {})
      : weights_(std::move(weights)), biases_(std::move(biases)), meta_(std::move(meta)) {
    if (weights_.rows() != biases_.size())
      throw std::invalid_argument("ProbClassifier: weights rows must match bias length");
  }

  int num_classes() const { return static_cast<int>(weights_.rows()); }
  int input_dim() const { return static_cast<int>(weights_.cols()); }
  const Matrix& weights() const { return weights_; }
  const Vector& biases() const { return biases_; }
  const TrainMeta& train_meta() const { return meta_; }

  ConfidenceVector predict_proba(const Vector& x) const {
    if (x.size() != weights_.cols())
      throw std::invalid_argument("predict_proba: input has dimension " +
                                  std::to_string(x.size()) + ", classifier expects " +
                                  std::to_string(weights_.cols()));
    Matrix z = (weights_ * x + biases_).transpose();
    detail::softmax_rows(z);
    return ConfidenceVector{z.row(0).transpose()};
  }

  // Softmax scores for every row of X; result is N x K.
  Matrix predict_proba_rows(const Matrix& x) const {
    if (x.cols() != weights_.cols())
      throw std::invalid_argument("predict_proba_rows: input has " +
                                  std::to_string(x.cols()) + " columns, classifier expects " +
                                  std::to_string(weights_.cols()));
    Matrix z = x * weights_.transpose();
    z.rowwise() += biases_.transpose();
    detail::softmax_rows(z);
    return z;
  }

 private:
  Matrix weights_;  // K x D
  Vector biases_;   // K
  TrainMeta meta_;
};

// Parameter packing used by the optimizer: W row-major (class by class),
// then the K biases.
inline Vector pack_params(const Matrix& w, const Vector& b) {
  Vector p(w.size() + b.size());
  Eigen::Index at = 0;
  for (Eigen::Index k = 0; k < w.rows(); ++k, at += w.cols()) p.segment(at, w.cols()) = w.row(k);
  p.tail(b.size()) = b;
  return p;
}

inline void unpack_params(const Vector& p, Matrix& w, Vector& b, int k, int d) {
  w.resize(k, d);
  b.resize(k);
  for (int c = 0; c < k; ++c) w.row(c) = p.segment(static_cast<Eigen::Index>(c) * d, d);
  b = p.tail(k);
}

// Objective and gradient at `params` for data (X, y) with labels in {1..K}.
// N = 0 is allowed and yields the pure penalty term.
inline std::pair<double, Vector> loss_and_gradient(const Vector& params, const Matrix& x,
                                                   const std::vector<int>& y, int num_classes,
                                                   double c) {
  const int k = num_classes;
  const int d = static_cast<int>(x.cols());
  if (params.size() != static_cast<Eigen::Index>(k) * d + k)
    throw std::invalid_argument("loss_and_gradient: parameter vector has wrong length");
  if (static_cast<Eigen::Index>(y.size()) != x.rows())
    throw std::invalid_argument("loss_and_gradient: label count does not match row count");
  if (!params.allFinite() || !x.allFinite())
    throw std::invalid_argument("loss_and_gradient: non-finite input");
  for (int label : y)
    if (label < 1 || label > k)
      throw std::invalid_argument("loss_and_gradient: label outside {1..K}");

  Matrix w;
  Vector b;
  unpack_params(params, w, b, k, d);

  double loss = w.squaredNorm() / (2.0 * c);
  Matrix grad_w = w / c;
  Vector grad_b = Vector::Zero(k);

  if (x.rows() > 0) {
    Matrix z = x * w.transpose();
    z.rowwise() += b.transpose();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      double zmax = z.row(i).maxCoeff();
      double lse = zmax + std::log((z.row(i).array() - zmax).exp().sum());
      loss += lse - z(i, y[i] - 1);
      z.row(i) = (z.row(i).array() - lse).exp();  // softmax probabilities
      z(i, y[i] - 1) -= 1.0;                      // dJ/dz
    }
    grad_w += z.transpose() * x;
    grad_b += z.colwise().sum().transpose();
  }

  return {loss, pack_params(grad_w, grad_b)};
}

namespace detail {

struct MinimizeResult {
  Vector x;
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> trace;
};

// L-BFGS (history 10) with Armijo backtracking. Only descent steps are ever
// accepted, so the objective trace is non-increasing by construction.
template <typename Objective>
MinimizeResult minimize(const Objective& objective, Vector x0, double tol, int max_iters) {
  constexpr int kHistory = 10;
  constexpr double kArmijo = 1e-4;

  MinimizeResult res;
  Vector x = std::move(x0);
  auto [fx, g] = objective(x);
  res.trace.push_back(fx);

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 1; iter <= max_iters; ++iter) {
    // Two-loop recursion for the search direction.
    Vector dir = -g;
    if (!s_hist.empty()) {
      std::vector<double> alpha(s_hist.size());
      for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
        alpha[i] = rho_hist[i] * s_hist[i].dot(dir);
        dir -= alpha[i] * y_hist[i];
      }
      const Vector& s = s_hist.back();
      const Vector& yv = y_hist.back();
      dir *= s.dot(yv) / yv.dot(yv);
      for (std::size_t i = 0; i < s_hist.size(); ++i) {
        double beta = rho_hist[i] * y_hist[i].dot(dir);
        dir += (alpha[i] - beta) * s_hist[i];
      }
    }
    double slope = g.dot(dir);
    if (!(slope < 0)) {  // not a descent direction, fall back to steepest
      dir = -g;
      slope = g.dot(dir);
      if (!(slope < 0)) break;  // gradient is exactly zero
    }

    double step = s_hist.empty() ? 1.0 / std::max(1.0, g.norm()) : 1.0;
    bool accepted = false;
    Vector x_new;
    double f_new = 0.0;
    Vector g_new;
    for (int bt = 0; bt < 60; ++bt) {
      x_new = x + step * dir;
      std::tie(f_new, g_new) = objective(x_new);
      if (std::isfinite(f_new) && f_new <= fx + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no further progress possible at double precision

    Vector s = x_new - x;
    Vector yv = g_new - g;
    double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > kHistory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    double decrease = (fx - f_new) / std::max(1.0, std::abs(fx));
    x = std::move(x_new);
    g = std::move(g_new);
    fx = f_new;
    res.trace.push_back(fx);
    res.iterations = iter;
    if (decrease <= tol) break;
    if (g.template lpNorm<Eigen::Infinity>() < 1e-12) break;
  }

  res.x = std::move(x);
  res.objective = fx;
  return res;
}

}  // namespace detail

// Trains a K-class model on rows of X with labels in {1..K}. Requires at
// least two distinct classes to be present.
inline ProbClassifier train_logreg(const Matrix& x, const std::vector<int>& y, int num_classes,
                                   const LogRegConfig& config) {
  config.check();
  if (x.rows() < 1) throw std::invalid_argument("train_logreg: no training rows");
  if (!x.allFinite()) throw std::invalid_argument("train_logreg: non-finite features");
  std::set<int> distinct(y.begin(), y.end());
  if (distinct.size() < 2)
    throw std::invalid_argument("train_logreg: need at least 2 distinct classes, got " +
                                std::to_string(distinct.size()));

  const int k = num_classes;
  const int d = static_cast<int>(x.cols());
  Vector x0 = Vector::Zero(static_cast<Eigen::Index>(k) * d + k);
  auto objective = [&](const Vector& p) { return loss_and_gradient(p, x, y, k, config.c); };
  detail::MinimizeResult r = detail::minimize(objective, std::move(x0), config.tol, config.max_iters);

  Matrix w;
  Vector b;
  unpack_params(r.x, w, b, k, d);
  TrainMeta meta{r.iterations, r.objective, std::move(r.trace)};
  return ProbClassifier(std::move(w), std::move(b), std::move(meta));
}

}  // namespace curl
