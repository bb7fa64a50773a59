#include "salm/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "salm/errors.hpp"
#include "salm/rng.hpp"

namespace salm::nn {

std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "tanh"; }

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  throw ParseError("unknown activation '" + std::string(s) + "'");
}

void EncoderConfig::validate() const {
  if (input_dim < 1) throw ConfigError("encoder: input_dim must be >= 1");
  if (embed_dim < 2) throw ConfigError("encoder: embed_dim must be >= 2");
  for (uint32_t h : hidden_dims) {
    if (h < 1) throw ConfigError("encoder: hidden dims must be >= 1");
  }
}

nlohmann::json EncoderConfig::to_json() const {
  return nlohmann::json{{"input_dim", input_dim},
                        {"hidden_dims", hidden_dims},
                        {"embed_dim", embed_dim},
                        {"activation", to_string(activation)},
                        {"seed", seed}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.input_dim = j.at("input_dim").get<uint32_t>();
  c.hidden_dims = j.at("hidden_dims").get<std::vector<uint32_t>>();
  c.embed_dim = j.at("embed_dim").get<uint32_t>();
  c.activation = activation_from_string(j.at("activation").get<std::string>());
  c.seed = j.at("seed").get<uint64_t>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Gradients

void Gradients::add(const Gradients& other) {
  for (size_t l = 0; l < layers.size(); ++l) {
    layers[l].weights += other.layers[l].weights;
    layers[l].bias += other.layers[l].bias;
  }
}

void Gradients::scale(double factor) {
  for (auto& l : layers) {
    l.weights *= factor;
    l.bias *= factor;
  }
}

// ---------------------------------------------------------------------------
// Encoder

Encoder Encoder::init(const EncoderConfig& config) {
  config.validate();
  Encoder e;
  e.config_ = config;

  std::vector<uint32_t> dims;
  dims.push_back(config.input_dim);
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  dims.push_back(config.embed_dim);

  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto fan_in = static_cast<double>(dims[l]);
    const double bound = std::sqrt(6.0 / fan_in);
    Rng rng(Rng::derive(config.seed, l));
    Layer layer;
    layer.weights.resize(dims[l + 1], dims[l]);
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
        layer.weights(r, c) = rng.uniform(-bound, bound);
      }
    }
    layer.bias = Eigen::VectorXd::Zero(dims[l + 1]);
    e.layers_.push_back(std::move(layer));
  }
  return e;
}

namespace {

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::ReLU) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.array().tanh().matrix();
  }
}

Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& pre, Activation act) {
  if (act == Activation::ReLU) {
    return (pre.array() > 0.0).cast<double>().matrix();
  }
  // d tanh(z)/dz = 1 - tanh(z)^2
  return (1.0 - pre.array().tanh().square()).matrix();
}

}  // namespace

ForwardContext Encoder::forward(std::span<const FeatureVector> features) const {
  if (features.empty()) throw ValidationError("encode: empty batch");
  const auto batch = static_cast<Eigen::Index>(features.size());

  ForwardContext ctx;
  ctx.inputs.assign(features.begin(), features.end());

  // First layer reads sparse inputs column by column.
  const Layer& first = layers_.front();
  Eigen::MatrixXd z(first.weights.rows(), batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    const FeatureVector& x = features[static_cast<size_t>(j)];
    if (x.dim != config_.input_dim) {
      throw ValidationError("encode: feature dim " + std::to_string(x.dim) +
                            " != encoder input dim " + std::to_string(config_.input_dim));
    }
    z.col(j) = first.bias;
    for (const auto& [idx, w] : x.entries) {
      z.col(j).noalias() += w * first.weights.col(idx);
    }
  }
  ctx.pre_activations.push_back(z);

  for (size_t l = 1; l < layers_.size(); ++l) {
    Eigen::MatrixXd a = ctx.pre_activations.back();
    apply_activation(a, config_.activation);
    z.noalias() = layers_[l].weights * a;
    z.colwise() += layers_[l].bias;
    ctx.pre_activations.push_back(z);
  }

  ctx.prenorm = ctx.pre_activations.back();
  ctx.norms = ctx.prenorm.colwise().norm();
  for (Eigen::Index j = 0; j < batch; ++j) {
    if (!(ctx.norms(j) >= kDegenerateNormThreshold)) {
      throw NumericError("encode: degenerate embedding (pre-normalization norm " +
                         std::to_string(ctx.norms(j)) + ") at batch column " + std::to_string(j));
    }
  }
  ctx.output = ctx.prenorm.array().rowwise() / ctx.norms.transpose().array();
  return ctx;
}

Eigen::MatrixXd Encoder::encode(std::span<const FeatureVector> features) const {
  return forward(features).output;
}

Gradients Encoder::zero_gradients() const {
  Gradients g;
  for (const auto& l : layers_) {
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  return g;
}

Gradients Encoder::backward(const ForwardContext& ctx, const Eigen::MatrixXd& upstream,
                            bool want_input_grads) const {
  if (upstream.rows() != ctx.output.rows() || upstream.cols() != ctx.output.cols()) {
    throw ValidationError("backward: upstream gradient shape mismatch");
  }
  const Eigen::Index batch = ctx.output.cols();
  Gradients grads = zero_gradients();

  // Normalization Jacobian: dz = (g - y*(y.g)) / ||z||.
  Eigen::MatrixXd dz(upstream.rows(), batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    const auto y = ctx.output.col(j);
    const auto g = upstream.col(j);
    dz.col(j) = (g - y * y.dot(g)) / ctx.norms(j);
  }

  for (size_t l = layers_.size(); l-- > 0;) {
    grads.layers[l].bias = dz.rowwise().sum();
    if (l == 0) {
      // Sparse input: accumulate the outer product column by column.
      for (Eigen::Index j = 0; j < batch; ++j) {
        const FeatureVector& x = ctx.inputs[static_cast<size_t>(j)];
        for (const auto& [idx, w] : x.entries) {
          grads.layers[0].weights.col(idx).noalias() += w * dz.col(j);
        }
      }
      if (want_input_grads) {
        grads.input = layers_[0].weights.transpose() * dz;
      }
    } else {
      Eigen::MatrixXd a_prev = ctx.pre_activations[l - 1];
      apply_activation(a_prev, config_.activation);
      grads.layers[l].weights.noalias() = dz * a_prev.transpose();
      Eigen::MatrixXd da = layers_[l].weights.transpose() * dz;
      dz = da.cwiseProduct(activation_derivative(ctx.pre_activations[l - 1], config_.activation));
    }
  }
  return grads;
}

size_t Encoder::parameter_count() const {
  size_t n = 0;
  for (const auto& l : layers_) {
    n += static_cast<size_t>(l.weights.size()) + static_cast<size_t>(l.bias.size());
  }
  return n;
}

std::vector<ParamView> Encoder::param_views() {
  std::vector<ParamView> views;
  for (size_t l = 0; l < layers_.size(); ++l) {
    views.push_back({layers_[l].weights.data(), layers_[l].weights.size(),
                     "layer" + std::to_string(l) + ".weights"});
    views.push_back({layers_[l].bias.data(), layers_[l].bias.size(),
                     "layer" + std::to_string(l) + ".bias"});
  }
  return views;
}

std::vector<ConstParamView> Encoder::param_views() const {
  std::vector<ConstParamView> views;
  for (size_t l = 0; l < layers_.size(); ++l) {
    views.push_back({layers_[l].weights.data(), layers_[l].weights.size(),
                     "layer" + std::to_string(l) + ".weights"});
    views.push_back({layers_[l].bias.data(), layers_[l].bias.size(),
                     "layer" + std::to_string(l) + ".bias"});
  }
  return views;
}

uint64_t Encoder::parameter_hash() const {
  uint64_t h = kFnvOffsetBasis;
  auto mix = [&h](const double* data, Eigen::Index n) {
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(data),
                                 static_cast<size_t>(n) * sizeof(double)),
                h);
  };
  for (const auto& l : layers_) {
    mix(l.weights.data(), l.weights.size());
    mix(l.bias.data(), l.bias.size());
  }
  return h;
}

bool Encoder::same_shape(const Encoder& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weights.rows() != other.layers_[l].weights.rows() ||
        layers_[l].weights.cols() != other.layers_[l].weights.cols()) {
      return false;
    }
  }
  return true;
}

std::vector<ConstParamView> grad_views(const Gradients& grads) {
  std::vector<ConstParamView> views;
  for (size_t l = 0; l < grads.layers.size(); ++l) {
    views.push_back({grads.layers[l].weights.data(), grads.layers[l].weights.size(),
                     "layer" + std::to_string(l) + ".weights"});
    views.push_back({grads.layers[l].bias.data(), grads.layers[l].bias.size(),
                     "layer" + std::to_string(l) + ".bias"});
  }
  return views;
}

// ---------------------------------------------------------------------------
// AdamW

AdamW::AdamW(AdamWConfig config) : config_(config) {
  if (!(config_.lr > 0.0)) throw ConfigError("adamw: lr must be > 0");
}

void AdamW::step(std::vector<ParamView> params, const std::vector<ConstParamView>& grads) {
  if (params.size() != grads.size()) {
    throw ValidationError("adamw: parameter/gradient block count mismatch");
  }
  if (first_moment_.empty()) {
    for (const auto& p : params) {
      first_moment_.emplace_back(Eigen::VectorXd::Zero(p.size));
      second_moment_.emplace_back(Eigen::VectorXd::Zero(p.size));
    }
  }
  if (first_moment_.size() != params.size()) {
    throw ValidationError("adamw: parameter layout changed between steps");
  }

  ++step_count_;
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));

  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].size != grads[i].size || params[i].size != first_moment_[i].size()) {
      throw ValidationError("adamw: shape mismatch in block '" + params[i].name + "'");
    }
    Eigen::Map<Eigen::VectorXd> p(params[i].data, params[i].size);
    Eigen::Map<const Eigen::VectorXd> g(grads[i].data, grads[i].size);
    if (!g.allFinite()) {
      throw NumericError("adamw: non-finite gradient in block '" + grads[i].name + "'");
    }
    auto& m = first_moment_[i];
    auto& v = second_moment_[i];
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v.array().matrix() + (1.0 - config_.beta2) * g.array().square().matrix();
    const Eigen::ArrayXd m_hat = m.array() / bias1;
    const Eigen::ArrayXd v_hat = v.array() / bias2;
    p.array() -= config_.lr * (m_hat / (v_hat.sqrt() + config_.eps) +
                               config_.weight_decay * p.array());
  }
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckResult grad_check(const Encoder& encoder, const LossFn& loss_fn,
                           std::span<const FeatureVector> features, double epsilon,
                           uint64_t seed, size_t max_coords) {
  GradCheckResult result;

  ForwardContext ctx = encoder.forward(features);
  LossProbe probe = loss_fn(ctx.output);
  if (probe.kink_distance < 50.0 * epsilon) {
    result.non_smooth_point = true;
    return result;
  }
  const Gradients analytic = encoder.backward(ctx, probe.grad);

  Encoder perturbed = encoder;  // scratch copy we can poke coordinates in
  auto views = perturbed.param_views();
  const auto analytic_views = grad_views(analytic);

  size_t total = 0;
  for (const auto& v : views) total += static_cast<size_t>(v.size);
  const size_t n_check = std::min(max_coords, total);

  Rng rng(seed);
  std::set<size_t> coords;
  while (coords.size() < n_check) coords.insert(rng.index(total));

  auto locate = [&](size_t flat) -> std::pair<size_t, Eigen::Index> {
    size_t block = 0;
    while (flat >= static_cast<size_t>(views[block].size)) {
      flat -= static_cast<size_t>(views[block].size);
      ++block;
    }
    return {block, static_cast<Eigen::Index>(flat)};
  };

  // ReLU pre-activation sign pattern; a flip between the +eps and -eps
  // points means the loss is not differentiable on that segment.
  const bool relu = encoder.config().activation == Activation::ReLU;
  auto activation_mask = [&](const ForwardContext& fwd) {
    std::vector<bool> mask;
    for (size_t l = 0; l + 1 < fwd.pre_activations.size(); ++l) {
      const auto& z = fwd.pre_activations[l];
      for (Eigen::Index i = 0; i < z.size(); ++i) mask.push_back(z.data()[i] > 0.0);
    }
    return mask;
  };

  for (size_t flat : coords) {
    const auto [block, offset] = locate(flat);
    double* slot = views[block].data + offset;
    const double saved = *slot;

    *slot = saved + epsilon;
    const ForwardContext fwd_plus = perturbed.forward(features);
    const LossProbe plus = loss_fn(fwd_plus.output);
    *slot = saved - epsilon;
    const ForwardContext fwd_minus = perturbed.forward(features);
    const LossProbe minus = loss_fn(fwd_minus.output);
    *slot = saved;

    if (plus.kink_distance < 2.0 * epsilon || minus.kink_distance < 2.0 * epsilon) {
      continue;  // perturbation straddles a hinge kink
    }
    if (relu && activation_mask(fwd_plus) != activation_mask(fwd_minus)) {
      continue;  // perturbation crosses a ReLU kink
    }

    const double numeric = (plus.loss - minus.loss) / (2.0 * epsilon);
    const double exact = analytic_views[block].data[offset];
    const double denom = std::max({std::abs(numeric), std::abs(exact), 1e-8});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(numeric - exact) / denom);
    ++result.coords_checked;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'S', 'A', 'L', 'M', 'C', 'K', 'P', 'T'};

void append_bytes(std::string& buf, const void* data, size_t n) {
  buf.append(reinterpret_cast<const char*>(data), n);
}

template <typename T>
void append_pod(std::string& buf, T value) {
  append_bytes(buf, &value, sizeof(T));
}

template <typename T>
T read_pod(const std::string& buf, size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw ParseError("corrupt checkpoint: truncated file");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  nlohmann::json header;
  header["format_version"] = checkpoint.format_version;
  header["stage"] = checkpoint.stage;
  header["encoder"] = checkpoint.encoder.config().to_json();
  header["featurizer"] = checkpoint.featurizer_config;
  header["metadata"] = checkpoint.metadata;

  nlohmann::json blobs = nlohmann::json::array();
  for (const auto& v : checkpoint.encoder.param_views()) {
    blobs.push_back({{"name", v.name}, {"size", v.size}});
  }
  nlohmann::json extras = nlohmann::json::array();
  for (const auto& [name, m] : checkpoint.extra_blobs) {
    extras.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  }
  header["blobs"] = blobs;
  header["extra_blobs"] = extras;

  std::string buf;
  append_bytes(buf, kMagic, sizeof(kMagic));
  const std::string header_str = header.dump();
  append_pod<uint64_t>(buf, header_str.size());
  buf += header_str;
  for (const auto& v : checkpoint.encoder.param_views()) {
    append_bytes(buf, v.data, static_cast<size_t>(v.size) * sizeof(double));
  }
  for (const auto& [name, m] : checkpoint.extra_blobs) {
    append_bytes(buf, m.data(), static_cast<size_t>(m.size()) * sizeof(double));
  }
  const uint64_t checksum = fnv1a64(buf);
  append_pod<uint64_t>(buf, checksum);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write to checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  if (buf.size() < sizeof(kMagic) + sizeof(uint64_t) * 2 ||
      std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("corrupt checkpoint: bad magic in '" + path.string() + "'");
  }
  const uint64_t stored_checksum = [&] {
    size_t pos = buf.size() - sizeof(uint64_t);
    return read_pod<uint64_t>(buf, pos);
  }();
  const uint64_t actual = fnv1a64(std::string_view(buf.data(), buf.size() - sizeof(uint64_t)));
  if (stored_checksum != actual) {
    throw ParseError("corrupt checkpoint: checksum mismatch in '" + path.string() + "'");
  }

  size_t pos = sizeof(kMagic);
  const auto header_len = read_pod<uint64_t>(buf, pos);
  if (pos + header_len > buf.size()) throw ParseError("corrupt checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("corrupt checkpoint: bad header: ") + e.what());
  }
  pos += header_len;

  Checkpoint ckpt;
  ckpt.format_version = header.at("format_version").get<uint32_t>();
  if (ckpt.format_version != kCheckpointFormatVersion) {
    throw ParseError("unsupported checkpoint format version " +
                     std::to_string(ckpt.format_version));
  }
  ckpt.stage = header.at("stage").get<int>();
  ckpt.featurizer_config = header.at("featurizer");
  ckpt.metadata = header.at("metadata");
  ckpt.encoder = Encoder::init(EncoderConfig::from_json(header.at("encoder")));

  auto views = ckpt.encoder.param_views();
  const auto& blobs = header.at("blobs");
  if (blobs.size() != views.size()) throw ParseError("corrupt checkpoint: blob count mismatch");
  for (size_t i = 0; i < views.size(); ++i) {
    if (blobs[i].at("name") != views[i].name ||
        blobs[i].at("size").get<Eigen::Index>() != views[i].size) {
      throw ParseError("corrupt checkpoint: blob layout mismatch at '" + views[i].name + "'");
    }
    const size_t nbytes = static_cast<size_t>(views[i].size) * sizeof(double);
    if (pos + nbytes > buf.size() - sizeof(uint64_t)) {
      throw ParseError("corrupt checkpoint: truncated parameter data");
    }
    std::memcpy(views[i].data, buf.data() + pos, nbytes);
    pos += nbytes;
  }

  for (const auto& extra : header.at("extra_blobs")) {
    Eigen::MatrixXd m(extra.at("rows").get<Eigen::Index>(), extra.at("cols").get<Eigen::Index>());
    const size_t nbytes = static_cast<size_t>(m.size()) * sizeof(double);
    if (pos + nbytes > buf.size() - sizeof(uint64_t)) {
      throw ParseError("corrupt checkpoint: truncated parameter data");
    }
    std::memcpy(m.data(), buf.data() + pos, nbytes);
    pos += nbytes;
    ckpt.extra_blobs.emplace_back(extra.at("name").get<std::string>(), std::move(m));
  }
  return ckpt;
}

}  // namespace salm::nn
