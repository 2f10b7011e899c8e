#pragma once

#include <Eigen/Dense>

#include <vector>

namespace geossl {

using MatrixXd = Eigen::MatrixXd;

/// 2N projection-head outputs with the view-pairing convention: the two
/// views of sample n sit at rows n and n + N.
struct ProjectionBatch {
  MatrixXd Z;        // 2N x D
  int N = 0;
  double tau = 0.5;

  int rows() const { return static_cast<int>(Z.rows()); }
  int partner(int i) const { return i < N ? i + N : i - N; }
  void validate() const;  // throws on any invariant violation
};

/// How the sum of the 2N ordered pair losses is normalized. The mean over
/// all ordered pairs (divide by 2N) is the default; the strict variant
/// divides by N instead, which doubles the value but not the gradient
/// direction.
enum class LossNormalization { kMeanOverPairs, kStrictOverSamples };

struct LossValue {
  double value = 0.0;
  std::vector<double> per_pair;  // 2N ordered pair-loss terms, row order
  LossNormalization normalization = LossNormalization::kMeanOverPairs;
};

/// S[i][j] = <z_i, z_j> / (|z_i| |z_j|). Throws DegenerateEmbedding for a
/// zero-norm row.
MatrixXd cosine_similarity_matrix(const MatrixXd& Z);

/// One ordered positive-pair term evaluated on a given similarity matrix:
/// -log( exp(S[i][j]/tau) / sum_{k != i} exp(S[i][k]/tau) ).
/// The denominator excludes only the self term k = i. Stable via
/// max-subtraction before exponentiation.
double nt_xent_pair_loss(const MatrixXd& S, int i, int j, double tau);

/// Batch loss over all 2N ordered positive pairs, from a pinned similarity
/// matrix. Used by nt_xent_batch_loss and directly testable.
LossValue nt_xent_batch_loss_from_similarity(const MatrixXd& S, int N, double tau,
                                             LossNormalization norm = LossNormalization::kMeanOverPairs);

LossValue nt_xent_batch_loss(const ProjectionBatch& batch,
                             LossNormalization norm = LossNormalization::kMeanOverPairs);

/// Analytic gradient of the batch loss with respect to Z (2N x D).
MatrixXd nt_xent_gradient(const ProjectionBatch& batch,
                          LossNormalization norm = LossNormalization::kMeanOverPairs);

}  // namespace geossl
