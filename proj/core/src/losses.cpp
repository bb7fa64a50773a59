#include "salm/losses.hpp"

#include <cmath>
#include <limits>

#include "salm/errors.hpp"

namespace salm::losses {

TripletLossResult triplet_loss(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& positives,
                               const Eigen::MatrixXd& negatives,
                               const TripletLossConfig& config) {
  const Eigen::Index batch = anchors.cols();
  if (batch == 0) throw ValidationError("triplet_loss: empty batch");
  if (positives.cols() != batch || negatives.cols() != batch ||
      positives.rows() != anchors.rows() || negatives.rows() != anchors.rows()) {
    throw ValidationError("triplet_loss: batch shape mismatch");
  }
  if (!std::isfinite(config.margin) || config.margin < 0.0) {
    throw ConfigError("triplet_loss: margin must be finite and >= 0");
  }

  TripletLossResult result;
  result.grad_anchor = Eigen::MatrixXd::Zero(anchors.rows(), batch);
  result.grad_positive = Eigen::MatrixXd::Zero(anchors.rows(), batch);
  result.grad_negative = Eigen::MatrixXd::Zero(anchors.rows(), batch);
  result.kink_distance = std::numeric_limits<double>::infinity();

  const double inv_batch = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const auto a = anchors.col(i);
    const auto p = positives.col(i);
    const auto n = negatives.col(i);

    double d_ap, d_an;
    if (config.distance == TripletDistance::CosineDistance) {
      d_ap = 1.0 - a.dot(p);
      d_an = 1.0 - a.dot(n);
    } else {
      d_ap = (a - p).squaredNorm();
      d_an = (a - n).squaredNorm();
    }

    const double hinge = d_ap - d_an + config.margin;
    result.kink_distance = std::min(result.kink_distance, std::abs(hinge));
    if (hinge > 0.0) {  // zero gradient exactly at the kink
      total += hinge;
      if (config.distance == TripletDistance::CosineDistance) {
        // d(d_ap)/da = -p, d(d_an)/da = -n
        result.grad_anchor.col(i) = (n - p) * inv_batch;
        result.grad_positive.col(i) = -a * inv_batch;
        result.grad_negative.col(i) = a * inv_batch;
      } else {
        result.grad_anchor.col(i) = 2.0 * ((a - p) - (a - n)) * inv_batch;
        result.grad_positive.col(i) = -2.0 * (a - p) * inv_batch;
        result.grad_negative.col(i) = 2.0 * (a - n) * inv_batch;
      }
    }
  }
  result.loss = total * inv_batch;
  return result;
}

void MnrlConfig::validate() const {
  if (!(scale > 0.0)) throw ConfigError("mnrl: scale must be > 0");
  if (micro_batch == 0 || effective_batch == 0) {
    throw ConfigError("mnrl: batch sizes must be >= 1");
  }
  if (effective_batch % micro_batch != 0) {
    throw ConfigError("mnrl: effective_batch must be a multiple of micro_batch");
  }
}

PairLossResult mnrl_loss(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& positives,
                         double scale) {
  const Eigen::Index batch = anchors.cols();
  if (batch == 0) throw ValidationError("mnrl_loss: empty batch");
  if (positives.cols() != batch || positives.rows() != anchors.rows()) {
    throw ValidationError("mnrl_loss: batch shape mismatch");
  }
  if (!(scale > 0.0)) throw ConfigError("mnrl_loss: scale must be > 0");

  // scores(i, j) = scale * <anchor_i, positive_j>, target is the diagonal.
  Eigen::MatrixXd scores = scale * (anchors.transpose() * positives);

  double total = 0.0;
  Eigen::MatrixXd softmax(batch, batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double row_max = scores.row(i).maxCoeff();
    const Eigen::ArrayXd shifted = scores.row(i).transpose().array() - row_max;
    const Eigen::ArrayXd exps = shifted.exp();
    const double denom = exps.sum();
    softmax.row(i) = (exps / denom).transpose();
    total += std::log(denom) - shifted(i);  // -log softmax(i, i)
  }

  PairLossResult result;
  result.loss = total / static_cast<double>(batch);

  // dLoss/dScores = (softmax - I) / B
  Eigen::MatrixXd dscores = softmax;
  dscores.diagonal().array() -= 1.0;
  dscores /= static_cast<double>(batch);

  result.grad_anchor = scale * (positives * dscores.transpose());
  result.grad_positive = scale * (anchors * dscores);
  return result;
}

CachedMnrlResult cached_mnrl_step(const nn::Encoder& encoder,
                                  std::span<const FeatureVector> anchors,
                                  std::span<const FeatureVector> positives,
                                  const MnrlConfig& config) {
  if (anchors.size() != positives.size()) {
    throw ValidationError("cached_mnrl_step: anchor/positive count mismatch");
  }
  if (anchors.empty()) throw ValidationError("cached_mnrl_step: empty batch");
  const size_t total = anchors.size();
  const size_t micro = std::max<uint32_t>(config.micro_batch, 1);

  // Pass 1: encode all micro-batches without gradient state; cache embeddings.
  const auto embed_dim = static_cast<Eigen::Index>(encoder.config().embed_dim);
  Eigen::MatrixXd anchor_embs(embed_dim, static_cast<Eigen::Index>(total));
  Eigen::MatrixXd positive_embs(embed_dim, static_cast<Eigen::Index>(total));
  for (size_t start = 0; start < total; start += micro) {
    const size_t len = std::min(micro, total - start);
    anchor_embs.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) =
        encoder.encode(anchors.subspan(start, len));
    positive_embs.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) =
        encoder.encode(positives.subspan(start, len));
  }

  // Full-batch loss and embedding gradients on the cache.
  const PairLossResult full = mnrl_loss(anchor_embs, positive_embs, config.scale);

  // Pass 2: re-encode each micro-batch and back-propagate its cached slice.
  CachedMnrlResult result;
  result.loss = full.loss;
  result.grads = encoder.zero_gradients();
  for (size_t start = 0; start < total; start += micro) {
    const size_t len = std::min(micro, total - start);
    const auto s = static_cast<Eigen::Index>(start);
    const auto l = static_cast<Eigen::Index>(len);

    nn::ForwardContext ctx = encoder.forward(anchors.subspan(start, len));
    result.grads.add(encoder.backward(ctx, full.grad_anchor.middleCols(s, l)));

    ctx = encoder.forward(positives.subspan(start, len));
    result.grads.add(encoder.backward(ctx, full.grad_positive.middleCols(s, l)));
  }
  return result;
}

AlignLossResult mse_align_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher) {
  if (student.cols() == 0) throw ValidationError("mse_align_loss: empty batch");
  if (student.rows() != teacher.rows() || student.cols() != teacher.cols()) {
    throw ValidationError("mse_align_loss: shape mismatch");
  }
  const auto count = static_cast<double>(student.cols());
  AlignLossResult result;
  const Eigen::MatrixXd diff = student - teacher;
  result.loss = diff.squaredNorm() / count;
  result.grad_student = 2.0 * diff / count;
  return result;
}

}  // namespace salm::losses
