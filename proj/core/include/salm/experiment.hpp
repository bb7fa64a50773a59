#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "salm/baselines.hpp"
#include "salm/corpus.hpp"
#include "salm/featurize.hpp"
#include "salm/nn.hpp"
#include "salm/pipeline.hpp"
#include "salm/retrieve.hpp"

namespace salm::experiment {

inline constexpr const char* kToolVersion = "0.1.0";

struct SplitSpec {
  enum class Mode { Temporal, Stratified };
  Mode mode = Mode::Stratified;
  Date cutoff{2023, 1, 1};     // temporal
  double test_fraction = 0.2;  // stratified
  uint64_t seed = 7;
};

struct KnnBaselineConfig {
  int k = 5;
  retrieve::AnnParams ann;
  uint64_t encoder_seed = 0xbead;  // seed of the untrained embedding encoder
};

/// One experiment file drives every command; flags override single fields.
struct ExperimentConfig {
  std::filesystem::path dataset_path;
  CorpusFormat dataset_format = CorpusFormat::Jsonl;
  std::filesystem::path output_dir = "out";
  size_t max_payload_bytes = 16384;

  SplitSpec split;

  TextFeaturizerConfig text_featurizer;
  PayloadFeaturizerConfig payload_featurizer;

  nn::EncoderConfig text_encoder;     // input_dim filled from the featurizer
  nn::EncoderConfig payload_encoder;  // input_dim filled from the featurizer
  bool init_payload_from_teacher = false;

  pipeline::StageConfig stage1;
  pipeline::StageConfig stage2;
  size_t triplet_count = 4096;

  baselines::TfidfConfig tfidf;
  baselines::ForestConfig forest;
  baselines::SupervisedConfig supervised;
  KnnBaselineConfig knn;

  std::optional<std::filesystem::path> labels_path;  // custom prototype labels

  nlohmann::json raw;  // the resolved document, hashed into manifests
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig experiment_from_json(const nlohmann::json& j);

/// Applies the configured split to a corpus.
std::pair<Corpus, Corpus> apply_split(const Corpus& corpus, const SplitSpec& split,
                                      std::vector<std::string>* warnings = nullptr);

/// Prototype labels: the corpus classes by default, overridden by a JSON
/// object {"ClassName": "label text", ...} when labels_path is set.
std::vector<VulnClass> resolve_labels(const Corpus& corpus,
                                      const std::optional<std::filesystem::path>& labels_path);

// ---------------------------------------------------------------------------
// Run manifests

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string command;
  std::string config_hash;
  std::map<std::string, uint64_t> seeds;
  std::map<std::string, std::string> input_digests;  // path -> sha256
  std::vector<std::string> outputs;
  std::map<std::string, double> timings_ms;

  nlohmann::json to_json() const;
};

/// Written atomically (temp file + rename).
void write_run_manifest(const RunManifest& manifest, const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Advisory lock on an output directory; throws if another run holds it.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::filesystem::path lock_path_;
  bool held_ = false;
};

}  // namespace salm::experiment
