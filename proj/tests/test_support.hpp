// Shared fixtures and independent oracles. Oracles here deliberately avoid
// the library's computation paths: plain loops, no Eigen expressions beyond
// storage, and a from-scratch hash reimplementation.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "salm/corpus.hpp"
#include "salm/featurize.hpp"
#include "salm/nn.hpp"

namespace testsupport {

// ---------------------------------------------------------------------------
// Scratch directories

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("salm_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Independent hash oracle (fresh implementation of the documented function)

inline uint64_t oracle_fnv1a64(const std::string& bytes, uint64_t basis) {
  uint64_t h = basis;
  for (char c : bytes) {
    h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  }
  return h;
}

inline double oracle_sign(const std::string& term) {
  const uint64_t basis = 0xcbf29ce484222325ULL ^ 0x5bd1e9955bd1e995ULL;
  return (oracle_fnv1a64(term, basis) & 1u) == 0 ? 1.0 : -1.0;
}

inline uint64_t oracle_bucket(const std::string& term, uint64_t dim) {
  return oracle_fnv1a64(term, 0xcbf29ce484222325ULL) % dim;
}

// ---------------------------------------------------------------------------
// Naive dense forward pass (loop-only replica of the encoder contract)

inline std::vector<double> oracle_forward_one(const salm::nn::Encoder& encoder,
                                              const salm::FeatureVector& x) {
  std::vector<double> act(encoder.config().input_dim, 0.0);
  for (const auto& [idx, w] : x.entries) act[idx] = w;

  for (size_t l = 0; l < encoder.layers().size(); ++l) {
    const auto& layer = encoder.layers()[l];
    std::vector<double> next(static_cast<size_t>(layer.weights.rows()), 0.0);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      double acc = layer.bias(r);
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        acc += layer.weights(r, c) * act[static_cast<size_t>(c)];
      }
      next[static_cast<size_t>(r)] = acc;
    }
    if (l + 1 < encoder.layers().size()) {
      for (double& v : next) {
        if (encoder.config().activation == salm::nn::Activation::ReLU) {
          v = v > 0.0 ? v : 0.0;
        } else {
          v = std::tanh(v);
        }
      }
    }
    act = std::move(next);
  }

  double norm = 0.0;
  for (double v : act) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : act) v /= norm;
  return act;
}

// ---------------------------------------------------------------------------
// Random inputs

inline std::vector<salm::FeatureVector> random_feature_batch(uint64_t seed, size_t batch,
                                                             uint32_t dim, size_t nnz) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> weight(-1.0, 1.0);
  std::vector<salm::FeatureVector> out;
  for (size_t b = 0; b < batch; ++b) {
    salm::FeatureVector fv;
    fv.dim = dim;
    std::vector<uint32_t> idx;
    while (idx.size() < std::min<size_t>(nnz, dim)) {
      const auto candidate = static_cast<uint32_t>(gen() % dim);
      if (std::find(idx.begin(), idx.end(), candidate) == idx.end()) idx.push_back(candidate);
    }
    std::sort(idx.begin(), idx.end());
    for (uint32_t i : idx) fv.entries.emplace_back(i, weight(gen));
    out.push_back(std::move(fv));
  }
  return out;
}

/// Columns are random unit vectors.
inline Eigen::MatrixXd random_unit_columns(uint64_t seed, Eigen::Index dim, Eigen::Index count) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(dim, count);
  for (Eigen::Index j = 0; j < count; ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) m(i, j) = normal(gen);
    m.col(j).normalize();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Small labeled corpus built by hand

inline salm::Corpus tiny_corpus() {
  using namespace salm;
  Corpus corpus;
  corpus.classes = {{1, "Injection", "A vulnerability that lets attackers inject malicious code."},
                    {2, "XSS", "A vulnerability allowing unauthorized script execution."},
                    {3, "DoS", "An attack aimed at rendering a system unusable."}};
  auto add = [&](const std::string& id, SampleKind kind, const std::string& text, int cls,
                 const std::string& date, const std::string& threat) {
    Sample s;
    s.id = id;
    s.kind = kind;
    s.text = text;
    s.class_id = cls;
    s.published = Date::parse(date);
    s.threat_id = threat;
    corpus.samples.push_back(std::move(s));
  };
  add("d1", SampleKind::Description, "sql injection in login form", 1, "2022-03-01", "T1");
  add("d2", SampleKind::Description, "union select injection in search", 1, "2022-06-10", "T2");
  add("d3", SampleKind::Description, "script tag stored in comments", 2, "2022-09-20", "T3");
  add("d4", SampleKind::Description, "reflected script in error page", 2, "2023-02-05", "T4");
  add("d5", SampleKind::Description, "request flood exhausts workers", 3, "2023-04-15", "T5");
  add("p1", SampleKind::Payload, "GET /login?user=admin'-- HTTP/1.1", 1, "2022-03-02", "T1");
  add("p2", SampleKind::Payload, "GET /search?q=1 UNION SELECT 1 HTTP/1.1", 1, "2022-06-11",
      "T2");
  add("p3", SampleKind::Payload, "POST /comment <script>x</script> HTTP/1.1", 2, "2022-09-21",
      "T3");
  add("p4", SampleKind::Payload, "GET /err?<script>y</script> HTTP/1.1", 2, "2023-02-06", "T4");
  add("p5", SampleKind::Payload, "GET /api?q=" + std::string(64, 'a') + " HTTP/1.1", 3,
      "2023-04-16", "T5");
  return corpus;
}

}  // namespace testsupport
