#include "geossl/contrastive.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "geossl/errors.hpp"

namespace geossl {

namespace {

constexpr double kZeroNormTolerance = 1e-12;

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    raise(ErrorCode::InvalidTemperature, "temperature must be finite and positive");
  }
}

// log sum_{k != i} exp(S(i,k)/tau), max-subtracted.
double row_logsumexp_excluding_self(const MatrixXd& S, int i, double tau) {
  const int n = static_cast<int>(S.cols());
  double maxv = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    if (k == i) continue;
    maxv = std::max(maxv, S(i, k) / tau);
  }
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    if (k == i) continue;
    sum += std::exp(S(i, k) / tau - maxv);
  }
  return maxv + std::log(sum);
}

}  // namespace

void ProjectionBatch::validate() const {
  if (N < 1) raise(ErrorCode::InvalidArgument, "batch needs N >= 1");
  if (Z.rows() != 2 * N) {
    raise(ErrorCode::InvalidArgument, "batch needs exactly 2N rows, got " +
                                          std::to_string(Z.rows()) + " for N=" + std::to_string(N));
  }
  if (Z.cols() < 2) raise(ErrorCode::InvalidArgument, "embedding dimension must be >= 2");
  check_tau(tau);
  for (int i = 0; i < Z.rows(); ++i) {
    if (Z.row(i).norm() < kZeroNormTolerance) {
      raise(ErrorCode::DegenerateEmbedding, "row " + std::to_string(i) + " has zero norm");
    }
  }
}

MatrixXd cosine_similarity_matrix(const MatrixXd& Z) {
  const int n = static_cast<int>(Z.rows());
  Eigen::VectorXd norms(n);
  for (int i = 0; i < n; ++i) {
    norms(i) = Z.row(i).norm();
    if (norms(i) < kZeroNormTolerance) {
      raise(ErrorCode::DegenerateEmbedding, "row " + std::to_string(i) + " has zero norm");
    }
  }
  MatrixXd unit = Z.array().colwise() / norms.array();
  return unit * unit.transpose();
}

double nt_xent_pair_loss(const MatrixXd& S, int i, int j, double tau) {
  check_tau(tau);
  const int n = static_cast<int>(S.rows());
  if (i == j || i < 0 || j < 0 || i >= n || j >= n) {
    raise(ErrorCode::InvalidArgument, "pair indices must be distinct rows of S");
  }
  return row_logsumexp_excluding_self(S, i, tau) - S(i, j) / tau;
}

LossValue nt_xent_batch_loss_from_similarity(const MatrixXd& S, int N, double tau,
                                             LossNormalization norm) {
  check_tau(tau);
  if (N < 1 || S.rows() != 2 * N || S.cols() != 2 * N) {
    raise(ErrorCode::InvalidArgument, "similarity matrix must be 2N x 2N");
  }
  LossValue out;
  out.normalization = norm;
  out.per_pair.resize(static_cast<std::size_t>(2 * N));
  double sum = 0.0;
  for (int i = 0; i < 2 * N; ++i) {
    int j = i < N ? i + N : i - N;
    double term = nt_xent_pair_loss(S, i, j, tau);
    out.per_pair[static_cast<std::size_t>(i)] = term;
    sum += term;
  }
  double divisor = norm == LossNormalization::kMeanOverPairs ? 2.0 * N : static_cast<double>(N);
  out.value = sum / divisor;
  return out;
}

LossValue nt_xent_batch_loss(const ProjectionBatch& batch, LossNormalization norm) {
  batch.validate();
  MatrixXd S = cosine_similarity_matrix(batch.Z);
  return nt_xent_batch_loss_from_similarity(S, batch.N, batch.tau, norm);
}

MatrixXd nt_xent_gradient(const ProjectionBatch& batch, LossNormalization norm) {
  batch.validate();
  const int rows = batch.rows();
  const int N = batch.N;
  const double tau = batch.tau;

  Eigen::VectorXd norms(rows);
  for (int i = 0; i < rows; ++i) norms(i) = batch.Z.row(i).norm();
  MatrixXd unit = batch.Z.array().colwise() / norms.array();
  MatrixXd S = unit * unit.transpose();

  // dL/dS, treating entries as independent. Each row i contributes
  // softmax over {k != i} minus an indicator on its positive column.
  MatrixXd G = MatrixXd::Zero(rows, rows);
  const double divisor =
      norm == LossNormalization::kMeanOverPairs ? 2.0 * N : static_cast<double>(N);
  for (int i = 0; i < rows; ++i) {
    const int j = batch.partner(i);
    const double lse = row_logsumexp_excluding_self(S, i, tau);
    for (int k = 0; k < rows; ++k) {
      if (k == i) continue;
      const double softmax = std::exp(S(i, k) / tau - lse);
      G(i, k) += softmax / tau;
    }
    G(i, j) -= 1.0 / tau;
  }
  G /= divisor;

  // S = U U^T with U the row-normalized Z: dL/dU = (G + G^T) U.
  MatrixXd dU = (G + G.transpose()) * unit;

  // Through the row normalization u = z / |z|:
  // dL/dz = (g - (g . u) u) / |z|.
  MatrixXd dZ(rows, batch.Z.cols());
  for (int i = 0; i < rows; ++i) {
    const double radial = dU.row(i).dot(unit.row(i));
    dZ.row(i) = (dU.row(i) - radial * unit.row(i)) / norms(i);
  }
  return dZ;
}

}  // namespace geossl
