#pragma once

// Latent-space fusion map e_y' = (W + b I) e_y and the cosine-sum objective
// it is trained on. Everything here is templated on the scalar type and
// works on column-major sample matrices: column i of X is e_x of pair i,
// column i of Y the matching e_y.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gps/error.hpp"

namespace gps {

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw ArgumentError("cosine: dimension mismatch");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) throw DomainError("cosine: zero vector");
  const Scalar c = a.dot(b) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

template <typename Scalar>
struct LinearMap {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix W;
  Scalar b = Scalar(1);

  // W = 0, b = 1: maps every e_y to itself.
  static LinearMap identity(Eigen::Index dim) { return {Matrix::Zero(dim, dim), Scalar(1)}; }

  Eigen::Index dim() const { return W.rows(); }

  // W e + b e, for a vector or for every column of a matrix.
  template <typename Derived>
  auto apply(const Eigen::MatrixBase<Derived>& e) const {
    return (W * e + b * e).eval();
  }

  Matrix matrix() const { return W + b * Matrix::Identity(dim(), dim()); }

  bool operator==(const LinearMap& o) const { return b == o.b && W == o.W; }
};

using LinearMapd = LinearMap<double>;

template <typename Scalar>
struct MapGradient {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dW;
  Scalar db = Scalar(0);
  Scalar objective = Scalar(0);
};

template <typename Scalar>
using SampleMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// J = sum_i cos(x_i, (W + bI) y_i) - l2 * ||W||_F^2.
// Returns NaN when some mapped column is zero.
template <typename Scalar>
Scalar fusion_objective(const LinearMap<Scalar>& map, const SampleMatrix<Scalar>& X, const SampleMatrix<Scalar>& Y,
                        Scalar l2_penalty) {
  const SampleMatrix<Scalar> U = map.apply(Y);
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    const Scalar nx = X.col(i).norm();
    const Scalar nu = U.col(i).norm();
    sum += X.col(i).dot(U.col(i)) / (nx * nu);
  }
  return sum - l2_penalty * map.W.squaredNorm();
}

/// Analytic gradient of fusion_objective. With u = M y and c = cos(x, u):
///   dc/du = x / (|x||u|) - c u / |u|^2
///   dJ/dW = sum_i (dc/du_i) y_i^T - 2 l2 W
///   dJ/db = sum_i (dc/du_i) . y_i
template <typename Scalar>
MapGradient<Scalar> fusion_gradient(const LinearMap<Scalar>& map, const SampleMatrix<Scalar>& X,
                                    const SampleMatrix<Scalar>& Y, Scalar l2_penalty) {
  const SampleMatrix<Scalar> U = map.apply(Y);
  SampleMatrix<Scalar> G(U.rows(), U.cols());
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    const Scalar nx = X.col(i).norm();
    const Scalar nu = U.col(i).norm();
    const Scalar c = X.col(i).dot(U.col(i)) / (nx * nu);
    sum += c;
    G.col(i) = X.col(i) / (nx * nu) - U.col(i) * (c / (nu * nu));
  }
  MapGradient<Scalar> g;
  g.dW = G * Y.transpose() - Scalar(2) * l2_penalty * map.W;
  g.db = G.cwiseProduct(Y).sum();
  g.objective = sum - l2_penalty * map.W.squaredNorm();
  return g;
}

struct TrainConfig {
  double learning_rate = 0.5;
  int max_epochs = 200;
  int patience = 10;
  std::uint64_t seed = 0;
  double l2_penalty = 1e-4;
};

template <typename Scalar>
struct TrainResult {
  LinearMap<Scalar> map;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<Scalar> train_objective;       // index = epoch, entry 0 is the identity init
  std::vector<Scalar> validation_objective;  // same indexing
};

// Columns scaled to unit length; a zero column raises ArgumentError.
template <typename Scalar>
SampleMatrix<Scalar> normalized_columns(const SampleMatrix<Scalar>& M, const char* what) {
  SampleMatrix<Scalar> out = M;
  for (Eigen::Index i = 0; i < M.cols(); ++i) {
    const Scalar n = M.col(i).norm();
    if (n == Scalar(0)) throw ArgumentError(std::string(what) + " column " + std::to_string(i) + " is zero");
    out.col(i) /= n;
  }
  return out;
}

/// Full-batch gradient ascent on the cosine-sum objective starting from the
/// identity map. Each epoch steps by learning_rate * grad(J) / n. Training
/// stops after max_epochs or once the validation objective has not improved
/// for `patience` epochs, and returns the parameters with the best
/// validation objective (the training objective when no validation pairs
/// are given). Inputs are normalized to unit columns first.
template <typename Scalar>
TrainResult<Scalar> train_map(const SampleMatrix<Scalar>& X_in, const SampleMatrix<Scalar>& Y_in,
                              const SampleMatrix<Scalar>& Xv_in, const SampleMatrix<Scalar>& Yv_in,
                              const TrainConfig& cfg) {
  if (X_in.cols() < 1) throw ArgumentError("train_map: no training pairs");
  if (X_in.rows() != Y_in.rows() || X_in.cols() != Y_in.cols()) {
    throw ArgumentError("train_map: e_x and e_y dimensions differ");
  }
  if (Xv_in.cols() > 0 && (Xv_in.rows() != X_in.rows() || Yv_in.rows() != X_in.rows() || Xv_in.cols() != Yv_in.cols())) {
    throw ArgumentError("train_map: validation dimensions differ from training");
  }
  if (!(cfg.learning_rate > 0)) throw ArgumentError("train_map: learning_rate must be > 0");
  if (cfg.max_epochs < 0 || cfg.patience < 1) throw ArgumentError("train_map: bad max_epochs/patience");
  if (!(cfg.l2_penalty >= 0)) throw ArgumentError("train_map: l2_penalty must be >= 0");

  const auto X = normalized_columns(X_in, "e_x");
  const auto Y = normalized_columns(Y_in, "e_y");
  const bool has_val = Xv_in.cols() > 0;
  const auto Xv = has_val ? normalized_columns(Xv_in, "validation e_x") : X;
  const auto Yv = has_val ? normalized_columns(Yv_in, "validation e_y") : Y;
  const auto l2 = static_cast<Scalar>(cfg.l2_penalty);
  const Scalar step = static_cast<Scalar>(cfg.learning_rate) / static_cast<Scalar>(X.cols());

  TrainResult<Scalar> result;
  auto map = LinearMap<Scalar>::identity(X.rows());
  auto val_j = [&](const LinearMap<Scalar>& m) { return fusion_objective(m, Xv, Yv, l2); };

  result.map = map;
  Scalar best = val_j(map);
  result.validation_objective.push_back(best);
  result.train_objective.push_back(fusion_objective(map, X, Y, l2));
  int stale = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto g = fusion_gradient(map, X, Y, l2);
    map.W += step * g.dW;
    map.b += step * g.db;
    const Scalar tj = fusion_objective(map, X, Y, l2);
    const Scalar vj = val_j(map);
    if (!std::isfinite(tj) || !std::isfinite(vj)) throw DivergenceError(epoch, "objective is not finite");
    result.train_objective.push_back(tj);
    result.validation_objective.push_back(vj);
    result.epochs_run = epoch;
    if (vj > best) {
      best = vj;
      result.map = map;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace gps
