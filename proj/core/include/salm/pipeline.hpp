#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "salm/corpus.hpp"
#include "salm/featurize.hpp"
#include "salm/losses.hpp"
#include "salm/nn.hpp"

namespace salm::pipeline {

/// Extracts the features of one sample; lets training run over either
/// featurizer (or a custom one in tests).
using FeatureFn = std::function<FeatureVector(const Sample&)>;

FeatureFn text_feature_fn(const TextFeaturizerConfig& config);
FeatureFn payload_feature_fn(const PayloadFeaturizerConfig& config);

struct EarlyStopConfig {
  int patience = 5;
  double min_delta = 1e-6;
};

enum class Stage1Loss { CachedMnrl, Triplet };

std::string to_string(Stage1Loss loss);
Stage1Loss stage1_loss_from_string(std::string_view s);

/// Hyperparameters of one training stage. effective_batch/micro_batch drive
/// stage-1 cached MNRL; batch drives stage-2 alignment and stage-1 triplet
/// batching.
struct StageConfig {
  int epochs = 20;
  double lr = 4e-4;
  double weight_decay = 0.0;
  Stage1Loss loss = Stage1Loss::CachedMnrl;
  uint32_t effective_batch = 256;
  uint32_t micro_batch = 32;
  uint32_t batch = 32;
  double mnrl_scale = 20.0;
  losses::TripletLossConfig triplet;
  EarlyStopConfig early_stop;
  double validation_fraction = 0.1;
  uint64_t seed = 0;
  bool resample_triplets_each_epoch = false;

  void validate() const;
  nlohmann::json to_json() const;
  static StageConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
  int epoch = 0;          // 0 = state before the first update
  double train_loss = 0;  // NaN for the epoch-0 row
  double val_loss = 0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_val_loss = 0;
};

/// CSV: epoch,train_loss,val_loss; the epoch-0 row has an empty train cell.
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

/// Train the text encoder on description triplets (stage 1). The default
/// objective is cached MNRL over the (anchor, positive) pairs of the
/// triplets; the margin triplet loss is available via config.loss. Returns
/// the checkpoint with the best validation loss.
nn::Encoder train_stage1(nn::Encoder encoder, const Corpus& corpus,
                         const std::vector<Triplet>& triplets, const StageConfig& config,
                         const FeatureFn& feature_fn, TrainHistory* history = nullptr);

/// Align the payload encoder to the frozen teacher over description/payload
/// pairs (stage 2). The teacher is read-only; its embeddings are computed
/// once. Returns the best-validation checkpoint of the student.
nn::Encoder train_stage2(nn::Encoder student, const Corpus& corpus,
                         const std::vector<AlignPair>& pairs, const nn::Encoder& teacher,
                         const FeatureFn& teacher_feature_fn, const StageConfig& config,
                         const FeatureFn& student_feature_fn, TrainHistory* history = nullptr);

struct Prototype {
  int class_id = 0;
  std::string name;
  std::string label_text;
  Eigen::VectorXd embedding;  // unit norm
};

/// One anchor embedding per class, from encoding the generic class label
/// with the text encoder.
struct PrototypeSet {
  std::vector<Prototype> entries;  // sorted by class_id
  std::string provenance;          // which label set produced these
  std::vector<std::string> warnings;

  const Prototype* by_class_id(int class_id) const;
  const Prototype* by_name(std::string_view name) const;
};

PrototypeSet build_prototypes(const nn::Encoder& text_encoder,
                              const TextFeaturizerConfig& featurizer,
                              const std::vector<VulnClass>& classes);

/// Zero-shot class addition: appends a prototype for a previously unseen
/// class name without touching existing entries. Returns the new class id.
int add_zero_shot_class(PrototypeSet& prototypes, const nn::Encoder& text_encoder,
                        const TextFeaturizerConfig& featurizer, std::string_view name,
                        std::string_view label_text);

/// Everything inference needs: both encoders, their featurizer configs, and
/// the prototype set.
struct TrainedPipeline {
  nn::Encoder text_encoder;
  nn::Encoder payload_encoder;
  TextFeaturizerConfig text_featurizer;
  PayloadFeaturizerConfig payload_featurizer;
  PrototypeSet prototypes;
  TrainHistory stage1_history;
  TrainHistory stage2_history;
};

}  // namespace salm::pipeline
