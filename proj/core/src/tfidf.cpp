#include <algorithm>
#include <cmath>
#include <map>

#include "salm/baselines.hpp"
#include "salm/errors.hpp"

namespace salm::baselines {

std::string to_string(TokenMode mode) {
  return mode == TokenMode::Words ? "words" : "byte_ngrams";
}

TokenMode token_mode_from_string(std::string_view s) {
  if (s == "words") return TokenMode::Words;
  if (s == "byte_ngrams") return TokenMode::ByteNgrams;
  throw ParseError("unknown token mode '" + std::string(s) + "'");
}

namespace {

std::vector<std::string> terms_of(const std::string& doc, const TfidfConfig& config) {
  if (config.mode == TokenMode::Words) return tokenize_words(doc);
  std::vector<std::string> grams;
  for (int n = config.ngram_min; n <= config.ngram_max; ++n) {
    if (doc.size() < static_cast<size_t>(n)) continue;
    for (size_t i = 0; i + n <= doc.size(); ++i) grams.push_back(doc.substr(i, n));
  }
  return grams;
}

}  // namespace

TfidfModel tfidf_fit(std::span<const std::string> documents, const TfidfConfig& config) {
  if (documents.empty()) throw ValidationError("tfidf_fit: no documents");
  if (config.ngram_min < 1 || config.ngram_min > config.ngram_max) {
    throw ConfigError("tfidf_fit: bad n-gram range");
  }

  // document frequency per term; std::map keeps term order lexicographic
  std::map<std::string, size_t> df;
  for (const auto& doc : documents) {
    std::map<std::string, size_t> seen;
    for (auto& t : terms_of(doc, config)) seen.emplace(std::move(t), 1);
    for (const auto& [term, one] : seen) df[term]++;
  }

  std::vector<std::pair<std::string, size_t>> kept;
  kept.reserve(df.size());
  for (const auto& [term, count] : df) {
    if (count >= config.min_df) kept.emplace_back(term, count);
  }
  if (kept.empty()) throw ValidationError("tfidf_fit: empty vocabulary after pruning");

  if (config.max_features > 0 && kept.size() > config.max_features) {
    // keep the highest-df terms; stable sort preserves lexicographic order
    // among equal frequencies
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    kept.resize(config.max_features);
    std::sort(kept.begin(), kept.end());
  }

  TfidfModel model;
  model.config = config;
  model.document_count = documents.size();
  const double n_docs = static_cast<double>(documents.size());
  for (auto& [term, count] : kept) {
    model.terms.push_back(term);
    model.idf.push_back(std::log((1.0 + n_docs) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return model;
}

FeatureVector tfidf_transform(const TfidfModel& model, const std::string& document) {
  FeatureVector v;
  v.dim = model.vocabulary_size();

  std::map<uint32_t, double> counts;
  for (const auto& term : terms_of(document, model.config)) {
    const auto it = std::lower_bound(model.terms.begin(), model.terms.end(), term);
    if (it != model.terms.end() && *it == term) {
      counts[static_cast<uint32_t>(it - model.terms.begin())] += 1.0;
    }
  }

  double sq = 0.0;
  for (auto& [idx, tf] : counts) {
    const double w = tf * model.idf[idx];
    sq += w * w;
    v.entries.emplace_back(idx, w);
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& [idx, w] : v.entries) w *= inv;
  }
  return v;
}

nlohmann::json TfidfModel::to_json() const {
  return nlohmann::json{{"format_version", 1},
                        {"model", "tfidf"},
                        {"mode", baselines::to_string(config.mode)},
                        {"ngram_min", config.ngram_min},
                        {"ngram_max", config.ngram_max},
                        {"min_df", config.min_df},
                        {"max_features", config.max_features},
                        {"document_count", document_count},
                        {"terms", terms},
                        {"idf", idf}};
}

TfidfModel TfidfModel::from_json(const nlohmann::json& j) {
  if (j.value("format_version", 0) != 1 || j.value("model", "") != "tfidf") {
    throw ParseError("not a version-1 tfidf model file");
  }
  TfidfModel m;
  m.config.mode = token_mode_from_string(j.at("mode").get<std::string>());
  m.config.ngram_min = j.at("ngram_min").get<int>();
  m.config.ngram_max = j.at("ngram_max").get<int>();
  m.config.min_df = j.at("min_df").get<size_t>();
  m.config.max_features = j.at("max_features").get<size_t>();
  m.document_count = j.at("document_count").get<size_t>();
  m.terms = j.at("terms").get<std::vector<std::string>>();
  m.idf = j.at("idf").get<std::vector<double>>();
  if (m.terms.size() != m.idf.size()) throw ParseError("tfidf model: terms/idf size mismatch");
  return m;
}

}  // namespace salm::baselines
