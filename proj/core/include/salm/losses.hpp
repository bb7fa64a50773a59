#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "salm/featurize.hpp"
#include "salm/nn.hpp"

namespace salm::losses {

enum class TripletDistance { CosineDistance, SquaredEuclidean };

struct TripletLossConfig {
  double margin = 0.2;
  TripletDistance distance = TripletDistance::CosineDistance;
};

/// Loss plus gradients w.r.t. each embedding argument (same shapes as the
/// inputs, columns are samples). kink_distance is the smallest |d_ap - d_an
/// + margin| over the batch, i.e. how far the evaluation point is from the
/// nearest hinge kink.
struct TripletLossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_anchor;
  Eigen::MatrixXd grad_positive;
  Eigen::MatrixXd grad_negative;
  double kink_distance = 0.0;
};

/// Margin hinge over (anchor, positive, negative) triplets, averaged over
/// the batch so the value is batch-size invariant (the summed form is the
/// mean times the batch size). A triplet at the exact kink contributes zero
/// gradient.
TripletLossResult triplet_loss(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& positives,
                               const Eigen::MatrixXd& negatives, const TripletLossConfig& config);

struct MnrlConfig {
  double scale = 20.0;          // similarity temperature 1/scale
  uint32_t micro_batch = 32;
  uint32_t effective_batch = 4096;

  void validate() const;  // effective_batch must be a multiple of micro_batch
};

struct PairLossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_anchor;
  Eigen::MatrixXd grad_positive;
};

/// Multiple-negatives ranking loss over a batch of (anchor, positive)
/// columns: mean softmax cross-entropy of the scaled B x B cosine-similarity
/// matrix against the diagonal; every other positive in the batch acts as a
/// negative. Inputs are expected unit-norm.
PairLossResult mnrl_loss(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& positives,
                         double scale);

struct CachedMnrlResult {
  double loss = 0.0;
  nn::Gradients grads;
};

/// Two-pass gradient-cached MNRL step over one effective batch:
/// pass 1 encodes all micro-batches and caches the embeddings, the
/// full-batch loss and embedding gradients are computed on the cache, and
/// pass 2 re-encodes each micro-batch to back-propagate its gradient slice.
/// Parameter gradients match a single full-batch pass.
CachedMnrlResult cached_mnrl_step(const nn::Encoder& encoder,
                                  std::span<const FeatureVector> anchors,
                                  std::span<const FeatureVector> positives,
                                  const MnrlConfig& config);

struct AlignLossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_student;  // teacher is frozen: no gradient
};

/// Mean squared Euclidean distance between student and teacher embedding
/// columns; gradient flows to the student only.
AlignLossResult mse_align_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher);

}  // namespace salm::losses
