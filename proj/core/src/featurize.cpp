#include "salm/featurize.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "salm/errors.hpp"

namespace salm {

double FeatureVector::l2_norm() const {
  double sq = 0.0;
  for (const auto& [idx, w] : entries) sq += w * w;
  return std::sqrt(sq);
}

double FeatureVector::dot(const FeatureVector& other) const {
  double acc = 0.0;
  auto a = entries.begin();
  auto b = other.entries.begin();
  while (a != entries.end() && b != other.entries.end()) {
    if (a->first < b->first) {
      ++a;
    } else if (b->first < a->first) {
      ++b;
    } else {
      acc += a->second * b->second;
      ++a;
      ++b;
    }
  }
  return acc;
}

uint64_t fnv1a64(std::string_view bytes, uint64_t basis) {
  uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= static_cast<uint64_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

double hash_sign(std::string_view term) {
  return (fnv1a64(term, kFnvSignBasis) & 1u) == 0 ? 1.0 : -1.0;
}

HttpSample parse_http_sample(std::string_view raw) {
  if (raw.empty()) throw ValidationError("parse_http_sample: empty payload");
  HttpSample out;
  const size_t pos = raw.find(kResponseSeparator);
  if (pos == std::string_view::npos) {
    out.request = std::string(raw);
  } else {
    out.request = std::string(raw.substr(0, pos));
    out.response = std::string(raw.substr(pos + kResponseSeparator.size()));
  }
  if (out.request.empty()) {
    throw ValidationError("parse_http_sample: empty request part before response separator");
  }
  return out;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

// Accumulates signed term counts into buckets; std::map keeps the output
// sorted by index, as the FeatureVector contract requires.
class BucketAccumulator {
 public:
  void add(std::string_view term, uint32_t dim, uint32_t offset) {
    const uint32_t idx = offset + static_cast<uint32_t>(fnv1a64(term) % dim);
    buckets_[idx] += hash_sign(term);
  }

  FeatureVector finish(uint32_t total_dim, double scale) {
    FeatureVector v;
    v.dim = total_dim;
    v.entries.reserve(buckets_.size());
    for (const auto& [idx, w] : buckets_) {
      const double scaled = w * scale;
      if (scaled != 0.0) v.entries.emplace_back(idx, scaled);
    }
    return v;
  }

  double l2_norm() const {
    double sq = 0.0;
    for (const auto& [idx, w] : buckets_) sq += w * w;
    return std::sqrt(sq);
  }

 private:
  std::map<uint32_t, double> buckets_;
};

}  // namespace

FeatureVector featurize_text(std::string_view text, const TextFeaturizerConfig& config) {
  if (config.dim < 2) throw ConfigError("featurize_text: dim must be >= 2");
  const std::vector<std::string> tokens = tokenize_words(text);
  if (tokens.empty()) return FeatureVector{config.dim, {}};

  BucketAccumulator acc;
  for (const auto& tok : tokens) acc.add(tok, config.dim, 0);
  for (size_t i = 0; i + 1 < tokens.size(); ++i) {
    acc.add(tokens[i] + " " + tokens[i + 1], config.dim, 0);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(tokens.size()));
  return acc.finish(config.dim, scale);
}

FeatureVector featurize_payload(const HttpSample& sample, const PayloadFeaturizerConfig& config) {
  if (config.dim_per_half < 2) throw ConfigError("featurize_payload: dim_per_half must be >= 2");
  if (config.ngram_min < 2 || config.ngram_max > 8 || config.ngram_min > config.ngram_max) {
    throw ConfigError("featurize_payload: ngram range must satisfy 2 <= min <= max <= 8");
  }

  BucketAccumulator acc;
  auto add_ngrams = [&](std::string_view bytes, uint32_t offset) {
    for (int n = config.ngram_min; n <= config.ngram_max; ++n) {
      if (bytes.size() < static_cast<size_t>(n)) continue;
      for (size_t i = 0; i + n <= bytes.size(); ++i) {
        acc.add(bytes.substr(i, n), config.dim_per_half, offset);
      }
    }
  };
  add_ngrams(sample.request, 0);
  if (sample.response) add_ngrams(*sample.response, config.dim_per_half);

  const double norm = acc.l2_norm();
  const double scale = norm > 0.0 ? 1.0 / norm : 0.0;
  return acc.finish(config.total_dim(), scale);
}

nlohmann::json text_featurizer_to_json(const TextFeaturizerConfig& config) {
  return nlohmann::json{{"kind", "text"}, {"dim", config.dim}};
}

TextFeaturizerConfig text_featurizer_from_json(const nlohmann::json& j) {
  TextFeaturizerConfig c;
  if (j.contains("kind") && j.at("kind") != "text") {
    throw ConfigError("text featurizer config: wrong kind '" + j.at("kind").get<std::string>() + "'");
  }
  if (j.contains("dim")) c.dim = j.at("dim").get<uint32_t>();
  return c;
}

nlohmann::json payload_featurizer_to_json(const PayloadFeaturizerConfig& config) {
  return nlohmann::json{{"kind", "payload"},
                        {"dim_per_half", config.dim_per_half},
                        {"ngram_min", config.ngram_min},
                        {"ngram_max", config.ngram_max}};
}

PayloadFeaturizerConfig payload_featurizer_from_json(const nlohmann::json& j) {
  PayloadFeaturizerConfig c;
  if (j.contains("kind") && j.at("kind") != "payload") {
    throw ConfigError("payload featurizer config: wrong kind '" + j.at("kind").get<std::string>() + "'");
  }
  if (j.contains("dim_per_half")) c.dim_per_half = j.at("dim_per_half").get<uint32_t>();
  if (j.contains("ngram_min")) c.ngram_min = j.at("ngram_min").get<int>();
  if (j.contains("ngram_max")) c.ngram_max = j.at("ngram_max").get<int>();
  return c;
}

}  // namespace salm
