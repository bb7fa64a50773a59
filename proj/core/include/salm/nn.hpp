#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "salm/featurize.hpp"

namespace salm::nn {

enum class Activation { ReLU, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(std::string_view s);

struct EncoderConfig {
  uint32_t input_dim = 0;
  std::vector<uint32_t> hidden_dims;
  uint32_t embed_dim = 128;
  Activation activation = Activation::ReLU;
  uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

struct Layer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// Per-layer parameter gradients; shapes mirror Encoder::layers().
struct Gradients {
  std::vector<Layer> layers;
  /// dLoss/dInput (input_dim x batch); filled only on request.
  std::optional<Eigen::MatrixXd> input;

  void add(const Gradients& other);
  void scale(double factor);
};

/// Cached activations of one forward pass; consumed by backward().
struct ForwardContext {
  std::vector<FeatureVector> inputs;
  std::vector<Eigen::MatrixXd> pre_activations;  // z_l, one per layer
  Eigen::MatrixXd prenorm;                       // final linear output
  Eigen::VectorXd norms;                         // per-column L2 norms of prenorm
  Eigen::MatrixXd output;                        // unit columns
};

/// Mutable view over one parameter block, used by the optimizer.
struct ParamView {
  double* data = nullptr;
  Eigen::Index size = 0;
  std::string name;
};

struct ConstParamView {
  const double* data = nullptr;
  Eigen::Index size = 0;
  std::string name;
};

/// Dense feed-forward encoder mapping sparse feature vectors to
/// L2-normalized embeddings. Hidden layers apply the configured activation;
/// the final layer is linear and its output is normalized per sample.
///
/// Embedding matrices are (embed_dim x batch): each column is one sample.
class Encoder {
 public:
  Encoder() = default;

  /// Kaiming-uniform initialization: weights uniform in
  /// [-sqrt(6/fan_in), +sqrt(6/fan_in)], biases zero, driven by config.seed.
  static Encoder init(const EncoderConfig& config);

  const EncoderConfig& config() const { return config_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }

  /// Forward pass returning unit-norm embeddings (embed_dim x batch).
  /// Throws NumericError when a pre-normalization norm falls below 1e-12.
  Eigen::MatrixXd encode(std::span<const FeatureVector> features) const;

  /// Forward pass that keeps the activations needed by backward().
  ForwardContext forward(std::span<const FeatureVector> features) const;

  /// Exact reverse-mode gradients, including the L2-normalization Jacobian.
  /// `upstream` is dLoss/dOutput with the same shape as ctx.output.
  Gradients backward(const ForwardContext& ctx, const Eigen::MatrixXd& upstream,
                     bool want_input_grads = false) const;

  Gradients zero_gradients() const;
  size_t parameter_count() const;

  std::vector<ParamView> param_views();
  std::vector<ConstParamView> param_views() const;

  /// FNV-1a over all parameter bytes; used by freeze checks.
  uint64_t parameter_hash() const;

  bool same_shape(const Encoder& other) const;

 private:
  EncoderConfig config_;
  std::vector<Layer> layers_;
};

std::vector<ConstParamView> grad_views(const Gradients& grads);

/// Minimum pre-normalization norm before encode() reports a degenerate
/// embedding.
inline constexpr double kDegenerateNormThreshold = 1e-12;

struct AdamWConfig {
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Decoupled-weight-decay Adam with bias correction:
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
///   p <- p - lr * ( m_hat / (sqrt(v_hat) + eps) + weight_decay * p )
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {});

  const AdamWConfig& config() const { return config_; }
  int64_t step_count() const { return step_count_; }

  /// One update. Layouts of params/grads must match across calls; a
  /// non-finite gradient raises NumericError naming the parameter block.
  void step(std::vector<ParamView> params, const std::vector<ConstParamView>& grads);

 private:
  AdamWConfig config_;
  int64_t step_count_ = 0;
  std::vector<Eigen::VectorXd> first_moment_;
  std::vector<Eigen::VectorXd> second_moment_;
};

/// Loss value and gradient w.r.t. embeddings, as probed by grad_check.
/// kink_distance is the distance of the nearest hinge argument to zero
/// (infinity for smooth losses); points too close to a kink are excluded.
struct LossProbe {
  double loss = 0.0;
  Eigen::MatrixXd grad;
  double kink_distance = std::numeric_limits<double>::infinity();
};

using LossFn = std::function<LossProbe(const Eigen::MatrixXd& embeddings)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  size_t coords_checked = 0;
  bool non_smooth_point = false;  // kink too close; comparison skipped
};

/// Compares analytic parameter gradients against central finite differences
/// over a seeded random subset of parameter coordinates.
GradCheckResult grad_check(const Encoder& encoder, const LossFn& loss_fn,
                           std::span<const FeatureVector> features, double epsilon,
                           uint64_t seed, size_t max_coords = 200);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr uint32_t kCheckpointFormatVersion = 1;

/// Versioned binary container: JSON header (format_version, stage, encoder
/// config, featurizer config, metadata) followed by named raw float64
/// parameter blobs and a trailing checksum. Round-trips bit-exactly.
/// extra_blobs carries model parts beyond the encoder (e.g. a classifier
/// head).
struct Checkpoint {
  uint32_t format_version = kCheckpointFormatVersion;
  int stage = 0;
  Encoder encoder;
  nlohmann::json featurizer_config;  // reproduces training features at inference
  nlohmann::json metadata;           // epochs, loss curve, anything descriptive
  std::vector<std::pair<std::string, Eigen::MatrixXd>> extra_blobs;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace salm::nn
