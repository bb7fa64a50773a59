#include "salm/experiment.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "salm/errors.hpp"

namespace salm::experiment {

using nlohmann::json;

namespace {

nn::EncoderConfig encoder_from_json(const json& j, uint32_t input_dim) {
  nn::EncoderConfig c;
  c.input_dim = input_dim;
  if (j.contains("hidden_dims")) c.hidden_dims = j.at("hidden_dims").get<std::vector<uint32_t>>();
  if (j.contains("embed_dim")) c.embed_dim = j.at("embed_dim").get<uint32_t>();
  if (j.contains("activation")) {
    c.activation = nn::activation_from_string(j.at("activation").get<std::string>());
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
  c.validate();
  return c;
}

}  // namespace

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.raw = j;

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    cfg.dataset_path = d.at("path").get<std::string>();
    const std::string fmt = d.value("format", "jsonl");
    if (fmt == "jsonl") {
      cfg.dataset_format = CorpusFormat::Jsonl;
    } else if (fmt == "json_array") {
      cfg.dataset_format = CorpusFormat::JsonArray;
    } else {
      throw ConfigError("dataset.format must be 'jsonl' or 'json_array'");
    }
  }
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("max_payload_bytes")) {
    cfg.max_payload_bytes = j.at("max_payload_bytes").get<size_t>();
  }

  if (j.contains("split")) {
    const auto& s = j.at("split");
    const std::string mode = s.value("mode", "stratified");
    if (mode == "temporal") {
      cfg.split.mode = SplitSpec::Mode::Temporal;
      if (s.contains("cutoff")) cfg.split.cutoff = Date::parse(s.at("cutoff").get<std::string>());
    } else if (mode == "stratified") {
      cfg.split.mode = SplitSpec::Mode::Stratified;
      if (s.contains("test_fraction")) {
        cfg.split.test_fraction = s.at("test_fraction").get<double>();
      }
      if (s.contains("seed")) cfg.split.seed = s.at("seed").get<uint64_t>();
    } else {
      throw ConfigError("split.mode must be 'temporal' or 'stratified'");
    }
  }

  if (j.contains("featurizer")) {
    const auto& f = j.at("featurizer");
    if (f.contains("text")) cfg.text_featurizer = text_featurizer_from_json(f.at("text"));
    if (f.contains("payload")) {
      cfg.payload_featurizer = payload_featurizer_from_json(f.at("payload"));
    }
  }

  const json encoders = j.value("encoder", json::object());
  cfg.text_encoder = encoder_from_json(encoders.value("text", json::object()),
                                       cfg.text_featurizer.dim);
  cfg.payload_encoder = encoder_from_json(encoders.value("payload", json::object()),
                                          cfg.payload_featurizer.total_dim());
  if (encoders.contains("init_payload_from_teacher")) {
    cfg.init_payload_from_teacher = encoders.at("init_payload_from_teacher").get<bool>();
  }

  if (j.contains("stage1")) cfg.stage1 = pipeline::StageConfig::from_json(j.at("stage1"));
  if (j.contains("stage2")) {
    cfg.stage2 = pipeline::StageConfig::from_json(j.at("stage2"));
  } else {
    cfg.stage2.seed = 1;
  }
  if (j.contains("stage1") && j.at("stage1").contains("triplet_count")) {
    cfg.triplet_count = j.at("stage1").at("triplet_count").get<size_t>();
  }

  if (j.contains("baselines")) {
    const auto& b = j.at("baselines");
    if (b.contains("tfidf")) {
      const auto& t = b.at("tfidf");
      if (t.contains("mode")) {
        cfg.tfidf.mode = baselines::token_mode_from_string(t.at("mode").get<std::string>());
      }
      if (t.contains("ngram_min")) cfg.tfidf.ngram_min = t.at("ngram_min").get<int>();
      if (t.contains("ngram_max")) cfg.tfidf.ngram_max = t.at("ngram_max").get<int>();
      if (t.contains("min_df")) cfg.tfidf.min_df = t.at("min_df").get<size_t>();
      if (t.contains("max_features")) cfg.tfidf.max_features = t.at("max_features").get<size_t>();
    }
    if (b.contains("forest")) {
      const auto& f = b.at("forest");
      if (f.contains("n_trees")) cfg.forest.n_trees = f.at("n_trees").get<int>();
      if (f.contains("max_depth")) cfg.forest.max_depth = f.at("max_depth").get<int>();
      if (f.contains("features_per_split")) {
        cfg.forest.features_per_split = f.at("features_per_split").get<size_t>();
      }
      if (f.contains("bootstrap")) cfg.forest.bootstrap = f.at("bootstrap").get<bool>();
      if (f.contains("seed")) cfg.forest.seed = f.at("seed").get<uint64_t>();
    }
    if (b.contains("supervised")) {
      const auto& s = b.at("supervised");
      cfg.supervised.encoder = encoder_from_json(s.value("encoder", json::object()),
                                                 cfg.payload_featurizer.total_dim());
      if (s.contains("epochs")) cfg.supervised.epochs = s.at("epochs").get<int>();
      if (s.contains("lr")) cfg.supervised.lr = s.at("lr").get<double>();
      if (s.contains("batch")) cfg.supervised.batch = s.at("batch").get<uint32_t>();
      if (s.contains("seed")) cfg.supervised.seed = s.at("seed").get<uint64_t>();
      if (s.contains("validation_fraction")) {
        cfg.supervised.validation_fraction = s.at("validation_fraction").get<double>();
      }
      if (s.contains("early_stop")) {
        const auto& e = s.at("early_stop");
        if (e.contains("patience")) cfg.supervised.early_stop.patience = e.at("patience").get<int>();
        if (e.contains("min_delta")) {
          cfg.supervised.early_stop.min_delta = e.at("min_delta").get<double>();
        }
      }
    } else {
      cfg.supervised.encoder = encoder_from_json(json::object(),
                                                 cfg.payload_featurizer.total_dim());
    }
    if (b.contains("knn")) {
      const auto& k = b.at("knn");
      if (k.contains("k")) cfg.knn.k = k.at("k").get<int>();
      if (k.contains("max_neighbors")) cfg.knn.ann.max_neighbors = k.at("max_neighbors").get<int>();
      if (k.contains("ef_construction")) {
        cfg.knn.ann.ef_construction = k.at("ef_construction").get<int>();
      }
      if (k.contains("ef_search")) cfg.knn.ann.ef_search = k.at("ef_search").get<int>();
      if (k.contains("seed")) cfg.knn.encoder_seed = k.at("seed").get<uint64_t>();
    }
  } else {
    cfg.supervised.encoder = encoder_from_json(json::object(),
                                               cfg.payload_featurizer.total_dim());
  }

  if (j.contains("labels_path")) {
    cfg.labels_path = std::filesystem::path(j.at("labels_path").get<std::string>());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open experiment config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

std::pair<Corpus, Corpus> apply_split(const Corpus& corpus, const SplitSpec& split,
                                      std::vector<std::string>* warnings) {
  if (split.mode == SplitSpec::Mode::Temporal) {
    return temporal_split(corpus, split.cutoff);
  }
  SplitResult r = stratified_split(corpus, split.test_fraction, split.seed);
  if (warnings != nullptr) {
    warnings->insert(warnings->end(), r.warnings.begin(), r.warnings.end());
  }
  return {std::move(r.train), std::move(r.test)};
}

std::vector<VulnClass> resolve_labels(const Corpus& corpus,
                                      const std::optional<std::filesystem::path>& labels_path) {
  std::vector<VulnClass> classes = corpus.classes;
  if (!labels_path) return classes;
  std::ifstream in(*labels_path, std::ios::binary);
  if (!in) throw IoError("cannot open labels file '" + labels_path->string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(labels_path->string() + ": " + e.what());
  }
  for (auto& c : classes) {
    if (j.contains(c.name)) c.generic_label = j.at(c.name).get<std::string>();
  }
  return classes;
}

// ---------------------------------------------------------------------------
// Digests and manifests

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for digest");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();
  return sha256_hex(content);
}

json RunManifest::to_json() const {
  json inputs = json::object();
  for (const auto& [path, digest] : input_digests) inputs[path] = digest;
  return json{{"tool_version", tool_version}, {"command", command},
              {"config_hash", config_hash},   {"seeds", seeds},
              {"inputs", inputs},             {"outputs", outputs},
              {"timings_ms", timings_ms}};
}

void write_run_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << manifest.to_json().dump(2) << "\n";
    if (!out) throw IoError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Directory lock

DirLock::DirLock(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  lock_path_ = dir / ".salm.lock";
  const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw ConfigError("output directory '" + dir.string() +
                      "' is locked by another run (remove " + lock_path_.string() +
                      " if that run is dead)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  const ssize_t written = ::write(fd, pid.data(), pid.size());
  (void)written;
  ::close(fd);
  held_ = true;
}

DirLock::~DirLock() {
  if (held_) {
    std::error_code ec;
    std::filesystem::remove(lock_path_, ec);
  }
}

}  // namespace salm::experiment
