#include <algorithm>
#include <cmath>
#include <limits>

#include "salm/baselines.hpp"
#include "salm/errors.hpp"
#include "salm/rng.hpp"

namespace salm::baselines {

Eigen::MatrixXd SupervisedClassifier::logits(const Eigen::MatrixXd& embeddings) const {
  Eigen::MatrixXd out = head_weights * embeddings;
  out.colwise() += head_bias;
  return out;
}

CrossEntropyResult cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  const Eigen::Index batch = logits.cols();
  if (batch == 0) throw ValidationError("cross_entropy: empty batch");
  if (static_cast<size_t>(batch) != labels.size()) {
    throw ValidationError("cross_entropy: logits/label count mismatch");
  }

  CrossEntropyResult result;
  result.grad_logits.resize(logits.rows(), batch);
  double total = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const int label = labels[static_cast<size_t>(j)];
    if (label < 1 || label > logits.rows()) {
      throw ValidationError("cross_entropy: label outside 1.." + std::to_string(logits.rows()));
    }
    const double m = logits.col(j).maxCoeff();
    const Eigen::ArrayXd shifted = logits.col(j).array() - m;
    const Eigen::ArrayXd exps = shifted.exp();
    const double denom = exps.sum();
    total += std::log(denom) - shifted(label - 1);
    result.grad_logits.col(j) = (exps / denom).matrix();
    result.grad_logits(label - 1, j) -= 1.0;
  }
  result.loss = total / static_cast<double>(batch);
  result.grad_logits /= static_cast<double>(batch);
  return result;
}

SupervisedClassifier supervised_train(const std::vector<FeatureVector>& features,
                                      const std::vector<int>& labels, int num_classes,
                                      const SupervisedConfig& config,
                                      pipeline::TrainHistory* history) {
  if (features.empty()) throw ValidationError("supervised_train: no samples");
  if (features.size() != labels.size()) {
    throw ValidationError("supervised_train: feature/label count mismatch");
  }
  if (num_classes < 2) throw ValidationError("supervised_train: need >= 2 classes");

  SupervisedClassifier model;
  model.encoder = nn::Encoder::init(config.encoder);
  model.num_classes = num_classes;
  // zero head: uniform logits, initial loss exactly ln(K)
  model.head_weights = Eigen::MatrixXd::Zero(num_classes, config.encoder.embed_dim);
  model.head_bias = Eigen::VectorXd::Zero(num_classes);

  // deterministic validation split, same scheme as the pipeline stages
  Rng split_rng(Rng::derive(config.seed, 0x76616c5350ULL));
  std::vector<size_t> perm = split_rng.permutation(features.size());
  size_t n_val = config.validation_fraction > 0.0
                     ? static_cast<size_t>(config.validation_fraction *
                                           static_cast<double>(features.size()))
                     : 0;
  if (config.validation_fraction > 0.0 && n_val == 0 && features.size() >= 2) n_val = 1;
  std::vector<size_t> val_idx(perm.begin(), perm.begin() + n_val);
  std::vector<size_t> train_idx(perm.begin() + n_val, perm.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  if (train_idx.empty()) throw ValidationError("supervised_train: empty training split");
  const std::vector<size_t>& val_ref = val_idx.empty() ? train_idx : val_idx;

  auto gather = [&](const std::vector<size_t>& idx, size_t start, size_t len,
                    std::vector<FeatureVector>& fv, std::vector<int>& lv) {
    fv.clear();
    lv.clear();
    for (size_t k = 0; k < len; ++k) {
      fv.push_back(features[idx[start + k]]);
      lv.push_back(labels[idx[start + k]]);
    }
  };

  std::vector<FeatureVector> batch_feats;
  std::vector<int> batch_labels;
  auto eval_loss = [&](const std::vector<size_t>& idx) {
    double total = 0.0;
    for (size_t start = 0; start < idx.size(); start += config.batch) {
      const size_t len = std::min<size_t>(config.batch, idx.size() - start);
      gather(idx, start, len, batch_feats, batch_labels);
      const Eigen::MatrixXd emb = model.encoder.encode(batch_feats);
      total += cross_entropy(model.logits(emb), batch_labels).loss * static_cast<double>(len);
    }
    return total / static_cast<double>(idx.size());
  };

  auto param_views = [&]() {
    auto views = model.encoder.param_views();
    views.push_back({model.head_weights.data(), model.head_weights.size(), "head.weights"});
    views.push_back({model.head_bias.data(), model.head_bias.size(), "head.bias"});
    return views;
  };

  double val0 = eval_loss(val_ref);
  if (history != nullptr) {
    history->epochs.push_back({0, std::numeric_limits<double>::quiet_NaN(), val0});
  }

  SupervisedClassifier best = model;
  double best_val = val0;
  int best_epoch = 0;
  int stale = 0;

  nn::AdamW optimizer({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng(Rng::derive(config.seed, 0x653000ULL + epoch));
    std::vector<size_t> order = train_idx;
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += config.batch) {
      const size_t len = std::min<size_t>(config.batch, order.size() - start);
      gather(order, start, len, batch_feats, batch_labels);

      nn::ForwardContext ctx = model.encoder.forward(batch_feats);
      const Eigen::MatrixXd logits = model.logits(ctx.output);
      CrossEntropyResult ce = cross_entropy(logits, batch_labels);
      if (!std::isfinite(ce.loss)) {
        throw NumericError("supervised_train: non-finite loss at epoch " +
                           std::to_string(epoch));
      }
      epoch_loss += ce.loss * static_cast<double>(len);

      const Eigen::MatrixXd grad_head_w = ce.grad_logits * ctx.output.transpose();
      const Eigen::VectorXd grad_head_b = ce.grad_logits.rowwise().sum();
      const Eigen::MatrixXd grad_emb = model.head_weights.transpose() * ce.grad_logits;
      nn::Gradients grads = model.encoder.backward(ctx, grad_emb);

      auto gviews = nn::grad_views(grads);
      gviews.push_back({grad_head_w.data(), grad_head_w.size(), "head.weights"});
      gviews.push_back({grad_head_b.data(), grad_head_b.size(), "head.bias"});
      optimizer.step(param_views(), gviews);
    }
    epoch_loss /= static_cast<double>(order.size());

    const double val = eval_loss(val_ref);
    if (history != nullptr) history->epochs.push_back({epoch, epoch_loss, val});

    const bool improved = best_val - val > config.early_stop.min_delta;
    stale = improved ? 0 : stale + 1;
    if (val < best_val) {
      best_val = val;
      best = model;
      best_epoch = epoch;
    }
    if (stale >= config.early_stop.patience) break;
  }

  if (history != nullptr) {
    history->best_epoch = best_epoch;
    history->best_val_loss = best_val;
  }
  return best;
}

int supervised_predict(const SupervisedClassifier& model, const FeatureVector& features) {
  const std::vector<FeatureVector> batch{features};
  const Eigen::MatrixXd emb = model.encoder.encode(batch);
  const Eigen::VectorXd logits = model.logits(emb).col(0);
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < logits.size(); ++c) {
    if (logits(c) > logits(best)) best = c;  // strict: ties keep the lowest id
  }
  return static_cast<int>(best) + 1;
}

void save_supervised(const SupervisedClassifier& model, const nlohmann::json& featurizer_config,
                     const std::filesystem::path& path) {
  nn::Checkpoint ckpt;
  ckpt.stage = 0;
  ckpt.encoder = model.encoder;
  ckpt.featurizer_config = featurizer_config;
  ckpt.metadata = {{"model", "supervised"}, {"num_classes", model.num_classes}};
  ckpt.extra_blobs.emplace_back("head.weights", model.head_weights);
  ckpt.extra_blobs.emplace_back("head.bias", Eigen::MatrixXd(model.head_bias));
  nn::save_checkpoint(ckpt, path);
}

LoadedSupervised load_supervised(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (ckpt.metadata.value("model", "") != "supervised" || ckpt.extra_blobs.size() != 2) {
    throw ParseError("'" + path.string() + "' is not a supervised classifier checkpoint");
  }
  LoadedSupervised out;
  out.model.encoder = ckpt.encoder;
  out.model.num_classes = ckpt.metadata.at("num_classes").get<int>();
  out.model.head_weights = ckpt.extra_blobs[0].second;
  out.model.head_bias = ckpt.extra_blobs[1].second.col(0);
  out.featurizer_config = ckpt.featurizer_config;
  return out;
}

}  // namespace salm::baselines
