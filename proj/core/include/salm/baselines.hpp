#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "salm/featurize.hpp"
#include "salm/nn.hpp"
#include "salm/pipeline.hpp"

namespace salm::baselines {

// ---------------------------------------------------------------------------
// TF-IDF

enum class TokenMode { Words, ByteNgrams };

std::string to_string(TokenMode mode);
TokenMode token_mode_from_string(std::string_view s);

struct TfidfConfig {
  TokenMode mode = TokenMode::ByteNgrams;  // byte 3-4-grams match the payload featurizer
  int ngram_min = 3;
  int ngram_max = 4;
  size_t min_df = 1;
  size_t max_features = 4096;
};

/// Explicit-vocabulary TF-IDF: tf = raw count, idf = ln((1+N)/(1+df)) + 1,
/// vectors L2-normalized. Vocabulary indices are dense, assigned in
/// lexicographic term order; the max_features cap keeps the highest-df terms
/// (ties to the lexicographically smaller term).
struct TfidfModel {
  TfidfConfig config;
  std::vector<std::string> terms;  // index -> term
  std::vector<double> idf;
  size_t document_count = 0;

  uint32_t vocabulary_size() const { return static_cast<uint32_t>(terms.size()); }

  nlohmann::json to_json() const;
  static TfidfModel from_json(const nlohmann::json& j);
};

TfidfModel tfidf_fit(std::span<const std::string> documents, const TfidfConfig& config);
FeatureVector tfidf_transform(const TfidfModel& model, const std::string& document);

// ---------------------------------------------------------------------------
// Random forest

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 16;
  size_t min_samples_split = 2;
  /// Candidate features per split; 0 means sqrt(n_features).
  size_t features_per_split = 0;
  bool bootstrap = true;
  uint64_t seed = 0;
};

/// Axis-aligned decision tree node; leaves carry a class distribution that
/// sums to 1.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> distribution;
};

struct ForestModel {
  ForestConfig config;
  int num_classes = 0;
  uint32_t feature_dim = 0;
  std::vector<std::vector<TreeNode>> trees;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static ForestModel from_json(const nlohmann::json& j);
};

/// Bagged Gini trees over bootstrap samples with per-split feature
/// subsampling; deterministic per seed. Labels are 1..num_classes.
ForestModel forest_train(const std::vector<FeatureVector>& features,
                         const std::vector<int>& labels, int num_classes,
                         const ForestConfig& config);

/// argmax of the averaged leaf distributions; ties to the lowest class id.
int forest_predict(const ForestModel& model, const FeatureVector& features);
std::vector<double> forest_predict_proba(const ForestModel& model, const FeatureVector& features);

void save_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Supervised encoder + classification head

struct SupervisedConfig {
  nn::EncoderConfig encoder;
  int epochs = 20;
  double lr = 4e-4;
  double weight_decay = 0.0;
  uint32_t batch = 32;
  pipeline::EarlyStopConfig early_stop;
  double validation_fraction = 0.1;
  uint64_t seed = 0;
};

/// Payload encoder topped by a linear head over the pooled (unit) embedding,
/// trained with softmax cross-entropy. The head starts at zero, so the
/// initial loss is exactly ln(K).
struct SupervisedClassifier {
  nn::Encoder encoder;
  Eigen::MatrixXd head_weights;  // K x embed_dim
  Eigen::VectorXd head_bias;     // K
  int num_classes = 0;

  Eigen::MatrixXd logits(const Eigen::MatrixXd& embeddings) const;
};

struct CrossEntropyResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_logits;
};

/// Mean softmax cross-entropy against 1-based labels.
CrossEntropyResult cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

SupervisedClassifier supervised_train(const std::vector<FeatureVector>& features,
                                      const std::vector<int>& labels, int num_classes,
                                      const SupervisedConfig& config,
                                      pipeline::TrainHistory* history = nullptr);

/// argmax of logits; ties to the lowest class id.
int supervised_predict(const SupervisedClassifier& model, const FeatureVector& features);

/// Persisted in the common checkpoint container; featurizer_config keeps
/// inference features identical to training.
void save_supervised(const SupervisedClassifier& model, const nlohmann::json& featurizer_config,
                     const std::filesystem::path& path);

struct LoadedSupervised {
  SupervisedClassifier model;
  nlohmann::json featurizer_config;
};
LoadedSupervised load_supervised(const std::filesystem::path& path);

}  // namespace salm::baselines
