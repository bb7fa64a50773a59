#include "salm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <unordered_map>

#include "salm/errors.hpp"
#include "salm/rng.hpp"

namespace salm::pipeline {

FeatureFn text_feature_fn(const TextFeaturizerConfig& config) {
  return [config](const Sample& s) { return featurize_text(s.text, config); };
}

FeatureFn payload_feature_fn(const PayloadFeaturizerConfig& config) {
  return [config](const Sample& s) { return featurize_payload(parse_http_sample(s.text), config); };
}

std::string to_string(Stage1Loss loss) {
  return loss == Stage1Loss::CachedMnrl ? "cached_mnrl" : "triplet";
}

Stage1Loss stage1_loss_from_string(std::string_view s) {
  if (s == "cached_mnrl") return Stage1Loss::CachedMnrl;
  if (s == "triplet") return Stage1Loss::Triplet;
  throw ParseError("unknown stage-1 loss '" + std::string(s) + "'");
}

void StageConfig::validate() const {
  if (epochs < 0) throw ConfigError("stage: epochs must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("stage: lr must be > 0");
  if (early_stop.patience < 1) throw ConfigError("stage: early-stop patience must be >= 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("stage: validation_fraction must be in [0, 1)");
  }
  if (batch == 0) throw ConfigError("stage: batch must be >= 1");
  losses::MnrlConfig mnrl{mnrl_scale, micro_batch, effective_batch};
  mnrl.validate();
}

nlohmann::json StageConfig::to_json() const {
  return nlohmann::json{
      {"epochs", epochs},
      {"lr", lr},
      {"weight_decay", weight_decay},
      {"loss", to_string(loss)},
      {"effective_batch", effective_batch},
      {"micro_batch", micro_batch},
      {"batch", batch},
      {"mnrl_scale", mnrl_scale},
      {"triplet_margin", triplet.margin},
      {"early_stop", {{"patience", early_stop.patience}, {"min_delta", early_stop.min_delta}}},
      {"validation_fraction", validation_fraction},
      {"seed", seed},
      {"resample_triplets_each_epoch", resample_triplets_each_epoch}};
}

StageConfig StageConfig::from_json(const nlohmann::json& j) {
  StageConfig c;
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
  if (j.contains("lr")) c.lr = j.at("lr").get<double>();
  if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
  if (j.contains("loss")) c.loss = stage1_loss_from_string(j.at("loss").get<std::string>());
  if (j.contains("effective_batch")) c.effective_batch = j.at("effective_batch").get<uint32_t>();
  if (j.contains("micro_batch")) c.micro_batch = j.at("micro_batch").get<uint32_t>();
  if (j.contains("batch")) c.batch = j.at("batch").get<uint32_t>();
  if (j.contains("mnrl_scale")) c.mnrl_scale = j.at("mnrl_scale").get<double>();
  if (j.contains("triplet_margin")) c.triplet.margin = j.at("triplet_margin").get<double>();
  if (j.contains("early_stop")) {
    const auto& e = j.at("early_stop");
    if (e.contains("patience")) c.early_stop.patience = e.at("patience").get<int>();
    if (e.contains("min_delta")) c.early_stop.min_delta = e.at("min_delta").get<double>();
  }
  if (j.contains("validation_fraction")) {
    c.validation_fraction = j.at("validation_fraction").get<double>();
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
  if (j.contains("resample_triplets_each_epoch")) {
    c.resample_triplets_each_epoch = j.at("resample_triplets_each_epoch").get<bool>();
  }
  c.validate();
  return c;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "epoch,train_loss,val_loss\n";
  char buf[64];
  for (const auto& row : history.epochs) {
    out << row.epoch << ",";
    if (std::isfinite(row.train_loss)) {
      std::snprintf(buf, sizeof(buf), "%.17g", row.train_loss);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", row.val_loss);
    out << "," << buf << "\n";
  }
}

// ---------------------------------------------------------------------------

namespace {

constexpr uint64_t kValSplitStream = 0x76616c5350ULL;   // validation split draws
constexpr uint64_t kEpochShuffleBase = 0x653000ULL;     // per-epoch shuffles

class FeatureCache {
 public:
  FeatureCache(const Corpus& corpus, const FeatureFn& fn) : corpus_(corpus), fn_(fn) {}

  const FeatureVector& get(const std::string& sample_id) {
    auto it = cache_.find(sample_id);
    if (it != cache_.end()) return it->second;
    const Sample* s = corpus_.sample_by_id(sample_id);
    if (s == nullptr) throw ValidationError("unknown sample id '" + sample_id + "'");
    return cache_.emplace(sample_id, fn_(*s)).first->second;
  }

 private:
  const Corpus& corpus_;
  const FeatureFn& fn_;
  std::unordered_map<std::string, FeatureVector> cache_;
};

/// Deterministic validation split over item indices 0..n-1. Both halves come
/// back sorted; per-epoch shuffling is a separate seeded draw.
std::pair<std::vector<size_t>, std::vector<size_t>> split_validation(size_t n, double fraction,
                                                                     uint64_t seed) {
  Rng rng(Rng::derive(seed, kValSplitStream));
  std::vector<size_t> perm = rng.permutation(n);
  size_t n_val = fraction > 0.0 ? static_cast<size_t>(fraction * static_cast<double>(n)) : 0;
  if (fraction > 0.0 && n_val == 0 && n >= 2) n_val = 1;
  std::vector<size_t> val(perm.begin(), perm.begin() + n_val);
  std::vector<size_t> train(perm.begin() + n_val, perm.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {train, val};
}

void check_finite(double loss, const char* stage, int epoch) {
  if (!std::isfinite(loss)) {
    throw NumericError(std::string(stage) + ": non-finite loss at epoch " +
                       std::to_string(epoch));
  }
}

struct EarlyStopper {
  explicit EarlyStopper(const EarlyStopConfig& config) : config(config) {}

  // Returns true when training should halt.
  bool observe(double val_loss) {
    const bool improved = best - val_loss > config.min_delta;
    if (improved) {
      stale = 0;
    } else {
      ++stale;
    }
    if (val_loss < best) best = val_loss;
    return stale >= config.patience;
  }

  EarlyStopConfig config;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Stage 1

nn::Encoder train_stage1(nn::Encoder encoder, const Corpus& corpus,
                         const std::vector<Triplet>& triplets, const StageConfig& config,
                         const FeatureFn& feature_fn, TrainHistory* history) {
  config.validate();
  if (triplets.empty()) throw ValidationError("train_stage1: no triplets");

  FeatureCache cache(corpus, feature_fn);
  const losses::MnrlConfig mnrl{config.mnrl_scale, config.micro_batch, config.effective_batch};

  auto [train_idx, val_idx] = split_validation(triplets.size(), config.validation_fraction,
                                               config.seed);
  if (train_idx.empty()) throw ValidationError("train_stage1: empty training split");

  std::vector<Triplet> train_items;
  train_items.reserve(train_idx.size());
  for (size_t i : train_idx) train_items.push_back(triplets[i]);
  std::vector<Triplet> val_items;
  val_items.reserve(val_idx.size());
  for (size_t i : val_idx) val_items.push_back(triplets[i]);

  const bool use_mnrl = config.loss == Stage1Loss::CachedMnrl;
  const size_t train_chunk = use_mnrl ? config.effective_batch : config.batch;

  auto batch_features = [&](const std::vector<Triplet>& items, size_t start, size_t len) {
    std::array<std::vector<FeatureVector>, 3> out;
    for (auto& v : out) v.reserve(len);
    for (size_t k = start; k < start + len; ++k) {
      out[0].push_back(cache.get(items[k].anchor_id));
      out[1].push_back(cache.get(items[k].positive_id));
      if (!use_mnrl) out[2].push_back(cache.get(items[k].negative_id));
    }
    return out;
  };

  auto eval_loss = [&](const std::vector<Triplet>& items) {
    if (items.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (size_t start = 0; start < items.size(); start += train_chunk) {
      const size_t len = std::min(train_chunk, items.size() - start);
      auto feats = batch_features(items, start, len);
      double loss;
      if (use_mnrl) {
        loss = losses::mnrl_loss(encoder.encode(feats[0]), encoder.encode(feats[1]),
                                 config.mnrl_scale)
                   .loss;
      } else {
        loss = losses::triplet_loss(encoder.encode(feats[0]), encoder.encode(feats[1]),
                                    encoder.encode(feats[2]), config.triplet)
                   .loss;
      }
      total += loss * static_cast<double>(len);
    }
    return total / static_cast<double>(items.size());
  };

  auto record = [&](int epoch, double train_loss, double val_loss) {
    if (history != nullptr) history->epochs.push_back({epoch, train_loss, val_loss});
  };

  // Validation falls back to the training items when the split is empty, so
  // early stopping always has a signal.
  const std::vector<Triplet>& val_ref = val_items.empty() ? train_items : val_items;

  double val0 = eval_loss(val_ref);
  check_finite(val0, "train_stage1", 0);
  record(0, std::numeric_limits<double>::quiet_NaN(), val0);

  nn::Encoder best = encoder;
  double best_val = val0;
  int best_epoch = 0;

  nn::AdamW optimizer({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  EarlyStopper stopper(config.early_stop);
  stopper.best = val0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.resample_triplets_each_epoch) {
      // Fresh training triplets; the validation set stays fixed.
      train_items = sample_triplets(corpus, train_items.size(),
                                    Rng::derive(config.seed, 0x7265ULL + epoch));
    }
    Rng shuffle_rng(Rng::derive(config.seed, kEpochShuffleBase + epoch));
    shuffle_rng.shuffle(train_items);

    double epoch_loss = 0.0;
    for (size_t start = 0; start < train_items.size(); start += train_chunk) {
      const size_t len = std::min(train_chunk, train_items.size() - start);
      auto feats = batch_features(train_items, start, len);
      double loss;
      if (use_mnrl) {
        auto res = losses::cached_mnrl_step(encoder, feats[0], feats[1], mnrl);
        loss = res.loss;
        optimizer.step(encoder.param_views(), nn::grad_views(res.grads));
      } else {
        auto ca = encoder.forward(feats[0]);
        auto cp = encoder.forward(feats[1]);
        auto cn = encoder.forward(feats[2]);
        auto res = losses::triplet_loss(ca.output, cp.output, cn.output, config.triplet);
        loss = res.loss;
        nn::Gradients grads = encoder.backward(ca, res.grad_anchor);
        grads.add(encoder.backward(cp, res.grad_positive));
        grads.add(encoder.backward(cn, res.grad_negative));
        optimizer.step(encoder.param_views(), nn::grad_views(grads));
      }
      check_finite(loss, "train_stage1", epoch);
      epoch_loss += loss * static_cast<double>(len);
    }
    epoch_loss /= static_cast<double>(train_items.size());

    const double val = eval_loss(val_ref);
    check_finite(val, "train_stage1", epoch);
    record(epoch, epoch_loss, val);

    const bool halt = stopper.observe(val);
    if (val < best_val) {
      best_val = val;
      best = encoder;
      best_epoch = epoch;
    }
    if (halt) break;
  }

  if (history != nullptr) {
    history->best_epoch = best_epoch;
    history->best_val_loss = best_val;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Stage 2

nn::Encoder train_stage2(nn::Encoder student, const Corpus& corpus,
                         const std::vector<AlignPair>& pairs, const nn::Encoder& teacher,
                         const FeatureFn& teacher_feature_fn, const StageConfig& config,
                         const FeatureFn& student_feature_fn, TrainHistory* history) {
  config.validate();
  if (pairs.empty()) throw ValidationError("train_stage2: no alignment pairs");

  // The teacher is frozen: encode each distinct description once, up front.
  FeatureCache teacher_cache(corpus, teacher_feature_fn);
  std::map<std::string, Eigen::Index> teacher_column;
  std::vector<FeatureVector> teacher_features;
  for (const auto& p : pairs) {
    if (teacher_column.emplace(p.description_id,
                               static_cast<Eigen::Index>(teacher_features.size()))
            .second) {
      teacher_features.push_back(teacher_cache.get(p.description_id));
    }
  }
  const auto embed_dim = static_cast<Eigen::Index>(teacher.config().embed_dim);
  Eigen::MatrixXd teacher_embs(embed_dim, static_cast<Eigen::Index>(teacher_features.size()));
  constexpr size_t kTeacherChunk = 512;
  for (size_t start = 0; start < teacher_features.size(); start += kTeacherChunk) {
    const size_t len = std::min(kTeacherChunk, teacher_features.size() - start);
    teacher_embs.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) =
        teacher.encode(std::span<const FeatureVector>(teacher_features).subspan(start, len));
  }

  FeatureCache student_cache(corpus, student_feature_fn);

  auto [train_idx, val_idx] = split_validation(pairs.size(), config.validation_fraction,
                                               config.seed);
  if (train_idx.empty()) throw ValidationError("train_stage2: empty training split");

  auto gather = [&](const std::vector<size_t>& items, size_t start, size_t len,
                    std::vector<FeatureVector>& feats, Eigen::MatrixXd& targets) {
    feats.clear();
    feats.reserve(len);
    targets.resize(embed_dim, static_cast<Eigen::Index>(len));
    for (size_t k = 0; k < len; ++k) {
      const AlignPair& p = pairs[items[start + k]];
      feats.push_back(student_cache.get(p.payload_id));
      targets.col(static_cast<Eigen::Index>(k)) = teacher_embs.col(teacher_column.at(p.description_id));
    }
  };

  auto eval_loss = [&](const std::vector<size_t>& items) {
    if (items.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    std::vector<FeatureVector> feats;
    Eigen::MatrixXd targets;
    for (size_t start = 0; start < items.size(); start += config.batch) {
      const size_t len = std::min<size_t>(config.batch, items.size() - start);
      gather(items, start, len, feats, targets);
      total += losses::mse_align_loss(student.encode(feats), targets).loss *
               static_cast<double>(len);
    }
    return total / static_cast<double>(items.size());
  };

  auto record = [&](int epoch, double train_loss, double val_loss) {
    if (history != nullptr) history->epochs.push_back({epoch, train_loss, val_loss});
  };

  const std::vector<size_t>& val_ref = val_idx.empty() ? train_idx : val_idx;

  double val0 = eval_loss(val_ref);
  check_finite(val0, "train_stage2", 0);
  record(0, std::numeric_limits<double>::quiet_NaN(), val0);

  nn::Encoder best = student;
  double best_val = val0;
  int best_epoch = 0;

  nn::AdamW optimizer({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  EarlyStopper stopper(config.early_stop);
  stopper.best = val0;

  std::vector<FeatureVector> feats;
  Eigen::MatrixXd targets;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng(Rng::derive(config.seed, kEpochShuffleBase + epoch));
    std::vector<size_t> order = train_idx;
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += config.batch) {
      const size_t len = std::min<size_t>(config.batch, order.size() - start);
      gather(order, start, len, feats, targets);
      nn::ForwardContext ctx = student.forward(feats);
      auto res = losses::mse_align_loss(ctx.output, targets);
      check_finite(res.loss, "train_stage2", epoch);
      nn::Gradients grads = student.backward(ctx, res.grad_student);
      optimizer.step(student.param_views(), nn::grad_views(grads));
      epoch_loss += res.loss * static_cast<double>(len);
    }
    epoch_loss /= static_cast<double>(order.size());

    const double val = eval_loss(val_ref);
    check_finite(val, "train_stage2", epoch);
    record(epoch, epoch_loss, val);

    const bool halt = stopper.observe(val);
    if (val < best_val) {
      best_val = val;
      best = student;
      best_epoch = epoch;
    }
    if (halt) break;
  }

  if (history != nullptr) {
    history->best_epoch = best_epoch;
    history->best_val_loss = best_val;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Prototypes

const Prototype* PrototypeSet::by_class_id(int class_id) const {
  for (const auto& p : entries) {
    if (p.class_id == class_id) return &p;
  }
  return nullptr;
}

const Prototype* PrototypeSet::by_name(std::string_view name) const {
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  };
  const std::string needle = lower(name);
  for (const auto& p : entries) {
    if (lower(p.name) == needle) return &p;
  }
  return nullptr;
}

PrototypeSet build_prototypes(const nn::Encoder& text_encoder,
                              const TextFeaturizerConfig& featurizer,
                              const std::vector<VulnClass>& classes) {
  if (classes.empty()) throw ValidationError("build_prototypes: no classes");
  std::vector<VulnClass> sorted = classes;
  std::sort(sorted.begin(), sorted.end(),
            [](const VulnClass& a, const VulnClass& b) { return a.id < b.id; });

  PrototypeSet set;
  set.provenance = "generic class labels";

  std::vector<FeatureVector> features;
  features.reserve(sorted.size());
  for (const auto& c : sorted) {
    if (c.generic_label.empty()) {
      throw ValidationError("build_prototypes: class '" + c.name + "' has no generic label");
    }
    features.push_back(featurize_text(c.generic_label, featurizer));
  }
  const Eigen::MatrixXd embs = text_encoder.encode(features);

  std::map<std::string, std::string> seen_labels;
  for (size_t i = 0; i < sorted.size(); ++i) {
    set.entries.push_back({sorted[i].id, sorted[i].name, sorted[i].generic_label,
                           embs.col(static_cast<Eigen::Index>(i))});
    auto [it, inserted] = seen_labels.emplace(sorted[i].generic_label, sorted[i].name);
    if (!inserted) {
      set.warnings.push_back("classes '" + it->second + "' and '" + sorted[i].name +
                             "' share identical label text; their prototypes coincide");
    }
  }
  return set;
}

int add_zero_shot_class(PrototypeSet& prototypes, const nn::Encoder& text_encoder,
                        const TextFeaturizerConfig& featurizer, std::string_view name,
                        std::string_view label_text) {
  if (prototypes.by_name(name) != nullptr) {
    throw ValidationError("add_zero_shot_class: class name '" + std::string(name) +
                          "' already exists");
  }
  if (label_text.empty()) throw ValidationError("add_zero_shot_class: empty label text");
  int next_id = 0;
  for (const auto& p : prototypes.entries) next_id = std::max(next_id, p.class_id);
  ++next_id;

  const std::vector<FeatureVector> features{featurize_text(label_text, featurizer)};
  const Eigen::MatrixXd emb = text_encoder.encode(features);
  prototypes.entries.push_back(
      {next_id, std::string(name), std::string(label_text), emb.col(0)});
  return next_id;
}

}  // namespace salm::pipeline
