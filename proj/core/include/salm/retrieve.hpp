#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "salm/corpus.hpp"
#include "salm/pipeline.hpp"
#include "salm/rng.hpp"

namespace salm::retrieve {

/// 1 - dot(u, v) for unit vectors; range [0, 2]. Inputs must be unit norm
/// within 1e-6.
double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Classification by semantic retrieval against the prototype set.
/// ranking covers every prototype, sorted by ascending (distance, class_id);
/// the head is the prediction, so ties resolve to the lowest class id.
struct Prediction {
  int class_id = 0;
  double distance = 0.0;
  std::vector<std::pair<int, double>> ranking;
};

Prediction classify(const Eigen::VectorXd& embedding, const pipeline::PrototypeSet& prototypes);

/// Convenience: featurize + encode + classify one raw payload.
Prediction classify_payload(const std::string& raw_payload, const nn::Encoder& payload_encoder,
                            const PayloadFeaturizerConfig& featurizer,
                            const pipeline::PrototypeSet& prototypes);

// ---------------------------------------------------------------------------
// HNSW approximate nearest-neighbor index (cosine distance on unit vectors)

struct AnnParams {
  int max_neighbors = 16;       // M; layer 0 allows 2M links
  int ef_construction = 200;
  int ef_search = 64;
  uint64_t seed = 0;
};

inline constexpr uint32_t kAnnFormatVersion = 1;

class AnnIndex {
 public:
  AnnIndex() = default;

  /// Build from unit vectors (columns) and one integer label per column.
  static AnnIndex build(const Eigen::MatrixXd& vectors, const std::vector<int>& labels,
                        const AnnParams& params);

  /// Approximate k nearest stored vectors by cosine distance, ascending.
  /// With ef_search >= size() the search degrades to an exact scan over all
  /// stored vectors, so recall is exactly 1.
  std::vector<std::pair<size_t, double>> query(const Eigen::VectorXd& q, size_t k) const;
  std::vector<std::pair<size_t, double>> query(const Eigen::VectorXd& q, size_t k,
                                               int ef_search) const;

  size_t size() const { return labels_.size(); }
  int label(size_t id) const { return labels_.at(id); }
  Eigen::VectorXd vector(size_t id) const { return vectors_.col(static_cast<Eigen::Index>(id)); }
  const AnnParams& params() const { return params_; }
  int max_level() const { return max_level_; }

  void save(const std::filesystem::path& path) const;
  static AnnIndex load(const std::filesystem::path& path);

 private:
  struct Node {
    int level = 0;
    std::vector<std::vector<uint32_t>> neighbors;  // one adjacency list per level
  };

  double dist(const Eigen::VectorXd& q, uint32_t id) const;
  void insert(uint32_t id, Rng& level_rng);
  std::vector<std::pair<double, uint32_t>> search_layer(const Eigen::VectorXd& q,
                                                        uint32_t entry, size_t ef,
                                                        int level) const;
  void connect(uint32_t id, int level,
               const std::vector<std::pair<double, uint32_t>>& candidates);

  AnnParams params_;
  Eigen::MatrixXd vectors_;  // dim x n
  std::vector<int> labels_;
  std::vector<Node> nodes_;
  uint32_t entry_point_ = 0;
  int max_level_ = -1;
};

struct Neighbor {
  size_t id = 0;
  int label = 0;
  double distance = 0.0;
};

/// Plurality vote; ties break by smaller summed distance, then lower label.
int knn_majority(const std::vector<Neighbor>& neighbors);

// ---------------------------------------------------------------------------
// Embedding export

/// CSV with header id,class,kind,e0..e{d-1}; one row per corpus sample
/// (descriptions through the text encoder, payloads through the payload
/// encoder) plus one "prototype" row per prototype when requested. Floats
/// are printed with round-trip precision.
void export_embeddings(const pipeline::TrainedPipeline& pipeline, const Corpus& corpus,
                       const std::filesystem::path& path, bool include_prototypes = true);

}  // namespace salm::retrieve
