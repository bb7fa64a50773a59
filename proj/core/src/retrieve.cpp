#include "salm/retrieve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "salm/errors.hpp"

namespace salm::retrieve {

double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) throw ValidationError("cosine_distance: dimension mismatch");
  if (std::abs(u.norm() - 1.0) > 1e-6 || std::abs(v.norm() - 1.0) > 1e-6) {
    throw ValidationError("cosine_distance: inputs must be unit vectors");
  }
  return 1.0 - u.dot(v);
}

Prediction classify(const Eigen::VectorXd& embedding, const pipeline::PrototypeSet& prototypes) {
  if (prototypes.entries.empty()) throw ValidationError("classify: empty prototype set");

  Prediction pred;
  pred.ranking.reserve(prototypes.entries.size());
  for (const auto& proto : prototypes.entries) {
    pred.ranking.emplace_back(proto.class_id, cosine_distance(embedding, proto.embedding));
  }
  std::sort(pred.ranking.begin(), pred.ranking.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second < b.second;
              return a.first < b.first;
            });
  pred.class_id = pred.ranking.front().first;
  pred.distance = pred.ranking.front().second;
  return pred;
}

Prediction classify_payload(const std::string& raw_payload, const nn::Encoder& payload_encoder,
                            const PayloadFeaturizerConfig& featurizer,
                            const pipeline::PrototypeSet& prototypes) {
  const std::vector<FeatureVector> feats{
      featurize_payload(parse_http_sample(raw_payload), featurizer)};
  const Eigen::MatrixXd emb = payload_encoder.encode(feats);
  return classify(emb.col(0), prototypes);
}

int knn_majority(const std::vector<Neighbor>& neighbors) {
  if (neighbors.empty()) throw ValidationError("knn_majority: empty neighbor list");
  struct Tally {
    size_t votes = 0;
    double summed_distance = 0.0;
  };
  std::map<int, Tally> tallies;
  for (const auto& n : neighbors) {
    auto& t = tallies[n.label];
    ++t.votes;
    t.summed_distance += n.distance;
  }
  int best_label = tallies.begin()->first;
  Tally best = tallies.begin()->second;
  for (const auto& [label, t] : tallies) {
    const bool wins = t.votes > best.votes ||
                      (t.votes == best.votes && t.summed_distance < best.summed_distance);
    // map iteration is ascending by label, so equal (votes, distance) keeps
    // the lowest label
    if (wins) {
      best_label = label;
      best = t;
    }
  }
  return best_label;
}

void export_embeddings(const pipeline::TrainedPipeline& pipeline, const Corpus& corpus,
                       const std::filesystem::path& path, bool include_prototypes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");

  const auto dim = static_cast<Eigen::Index>(pipeline.text_encoder.config().embed_dim);
  out << "id,class,kind";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",e" << i;
  out << "\n";

  char buf[32];
  auto write_row = [&](const std::string& id, int class_id, const std::string& kind,
                       const Eigen::VectorXd& v) {
    out << id << "," << class_id << "," << kind;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", v(i));
      out << "," << buf;
    }
    out << "\n";
  };

  constexpr size_t kChunk = 512;
  std::vector<const Sample*> chunk;
  std::vector<FeatureVector> feats;
  auto flush = [&](const pipeline::FeatureFn& fn, const nn::Encoder& encoder) {
    if (chunk.empty()) return;
    feats.clear();
    for (const Sample* s : chunk) feats.push_back(fn(*s));
    const Eigen::MatrixXd embs = encoder.encode(feats);
    for (size_t i = 0; i < chunk.size(); ++i) {
      write_row(chunk[i]->id, chunk[i]->class_id, to_string(chunk[i]->kind),
                embs.col(static_cast<Eigen::Index>(i)));
    }
    chunk.clear();
  };

  const auto text_fn = pipeline::text_feature_fn(pipeline.text_featurizer);
  const auto payload_fn = pipeline::payload_feature_fn(pipeline.payload_featurizer);

  for (SampleKind kind : {SampleKind::Description, SampleKind::Payload}) {
    const auto& fn = kind == SampleKind::Description ? text_fn : payload_fn;
    const auto& encoder =
        kind == SampleKind::Description ? pipeline.text_encoder : pipeline.payload_encoder;
    for (const auto& s : corpus.samples) {
      if (s.kind != kind) continue;
      chunk.push_back(&s);
      if (chunk.size() == kChunk) flush(fn, encoder);
    }
    flush(fn, encoder);
  }

  if (include_prototypes) {
    for (const auto& proto : pipeline.prototypes.entries) {
      write_row("proto-" + proto.name, proto.class_id, "prototype", proto.embedding);
    }
  }
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace salm::retrieve
