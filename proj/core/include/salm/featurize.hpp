#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace salm {

/// Sparse feature vector. Entries are (index, weight) with strictly
/// increasing unique indices below dim; the all-zero vector has no entries.
struct FeatureVector {
  uint32_t dim = 0;
  std::vector<std::pair<uint32_t, double>> entries;

  double l2_norm() const;
  double dot(const FeatureVector& other) const;
};

/// FNV-1a 64-bit over raw bytes. Fixed constants, no per-process seeding:
/// equal bytes hash equally across runs and platforms.
constexpr uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
constexpr uint64_t kFnvPrime = 0x100000001b3ULL;
/// Offset basis of the second (sign) hash; any fixed value != kFnvOffsetBasis.
constexpr uint64_t kFnvSignBasis = kFnvOffsetBasis ^ 0x5bd1e9955bd1e995ULL;

uint64_t fnv1a64(std::string_view bytes, uint64_t basis = kFnvOffsetBasis);

/// Sign for a hashed term: +1 or -1 from the low bit of the second hash.
double hash_sign(std::string_view term);

/// Word-level featurizer for descriptions and label texts.
///
/// Lowercased alphanumeric tokens; emitted terms are the unigrams plus
/// adjacent bigrams joined by a single space. Each term contributes
/// hash_sign(term) to bucket fnv1a64(term) % dim, and the accumulated counts
/// are scaled by 1/sqrt(unigram token count). The resulting L2 norm is
/// bounded by 2*sqrt(token count).
struct TextFeaturizerConfig {
  uint32_t dim = 1u << 18;
};

/// Byte-level featurizer for raw HTTP payloads.
///
/// Case-preserving byte n-grams, n in [ngram_min, ngram_max], over the
/// request and the response separately. Request grams hash into buckets
/// [0, dim_per_half), response grams into [dim_per_half, 2*dim_per_half);
/// the halves never collide. The full vector is L2-normalized, so the output
/// norm is exactly 1 (or 0 for empty input).
struct PayloadFeaturizerConfig {
  uint32_t dim_per_half = 1u << 18;
  int ngram_min = 3;
  int ngram_max = 4;

  uint32_t total_dim() const { return dim_per_half * 2; }
};

/// One HTTP transaction: raw request bytes plus optional raw response bytes.
struct HttpSample {
  std::string request;
  std::optional<std::string> response;
};

/// Separator between request and response in the wire format for samples.
inline constexpr std::string_view kResponseSeparator = "\n\n---RESPONSE---\n\n";

/// Split a raw payload at the FIRST separator occurrence. No separator means
/// response-less sample. Empty request part is a format error.
HttpSample parse_http_sample(std::string_view raw);

FeatureVector featurize_text(std::string_view text, const TextFeaturizerConfig& config);
FeatureVector featurize_payload(const HttpSample& sample, const PayloadFeaturizerConfig& config);

/// Lowercased alphanumeric word tokens, shared by featurize_text and the
/// word-mode TF-IDF tokenizer.
std::vector<std::string> tokenize_words(std::string_view text);

nlohmann::json text_featurizer_to_json(const TextFeaturizerConfig& config);
TextFeaturizerConfig text_featurizer_from_json(const nlohmann::json& j);
nlohmann::json payload_featurizer_to_json(const PayloadFeaturizerConfig& config);
PayloadFeaturizerConfig payload_featurizer_from_json(const nlohmann::json& j);

}  // namespace salm
