#include "salm/featurize.hpp"

#include <doctest.h>

#include <map>
#include <random>

#include "salm/errors.hpp"
#include "test_support.hpp"

using namespace salm;

TEST_CASE("parse_http_sample splits at the first separator") {
  const auto s = parse_http_sample("GET /a\n\n---RESPONSE---\n\nHTTP/1.1 200 OK");
  CHECK(s.request == "GET /a");
  REQUIRE(s.response.has_value());
  CHECK(*s.response == "HTTP/1.1 200 OK");
}

TEST_CASE("parse_http_sample without separator has no response") {
  const auto s = parse_http_sample("GET /a");
  CHECK(s.request == "GET /a");
  CHECK_FALSE(s.response.has_value());
}

TEST_CASE("parse_http_sample with two separators keeps the second inside the response") {
  const std::string sep(kResponseSeparator);
  const std::string raw = "REQ" + sep + "R1" + sep + "R2";
  // string-search oracle: split position is the first find()
  const size_t first = raw.find(sep);
  const auto s = parse_http_sample(raw);
  CHECK(s.request == raw.substr(0, first));
  CHECK(*s.response == "R1" + sep + "R2");
  CHECK(s.response->find(sep) != std::string::npos);
}

TEST_CASE("parse_http_sample rejects empty input and empty request part") {
  CHECK_THROWS_AS(parse_http_sample(""), ValidationError);
  CHECK_THROWS_AS(parse_http_sample(std::string(kResponseSeparator) + "resp"), ValidationError);
}

TEST_CASE("featurize_text: empty text gives the zero vector") {
  TextFeaturizerConfig cfg;
  cfg.dim = 64;
  const auto v = featurize_text("", cfg);
  CHECK(v.dim == 64);
  CHECK(v.entries.empty());
  CHECK(v.l2_norm() == 0.0);
}

TEST_CASE("featurize_text is deterministic") {
  TextFeaturizerConfig cfg;
  const auto a = featurize_text("sql injection attack", cfg);
  const auto b = featurize_text("sql injection attack", cfg);
  CHECK(a.entries == b.entries);
}

TEST_CASE("featurize_text matches an independent hash computation") {
  TextFeaturizerConfig cfg;
  cfg.dim = 1u << 20;
  const auto v = featurize_text("sql injection", cfg);

  // oracle: unigrams + space-joined bigram, signed counts / sqrt(#tokens)
  std::map<uint64_t, double> expected;
  for (const std::string& term : {std::string("sql"), std::string("injection"),
                                  std::string("sql injection")}) {
    expected[testsupport::oracle_bucket(term, cfg.dim)] += testsupport::oracle_sign(term);
  }
  const double scale = 1.0 / std::sqrt(2.0);

  std::map<uint64_t, double> actual;
  for (const auto& [idx, w] : v.entries) actual[idx] = w;
  std::map<uint64_t, double> expected_scaled;
  for (const auto& [idx, w] : expected) {
    if (w != 0.0) expected_scaled[idx] = w * scale;
  }
  CHECK(actual == expected_scaled);
}

TEST_CASE("featurize_payload: missing response leaves the response half empty") {
  PayloadFeaturizerConfig cfg;
  cfg.dim_per_half = 4096;
  const auto v = featurize_payload(HttpSample{"GET /index.html HTTP/1.1", std::nullopt}, cfg);
  CHECK(v.dim == 8192);
  for (const auto& [idx, w] : v.entries) CHECK(idx < 4096);
}

TEST_CASE("featurize_payload n-grams match a brute-force enumerator") {
  PayloadFeaturizerConfig cfg;
  cfg.dim_per_half = 1u << 16;
  cfg.ngram_min = 3;
  cfg.ngram_max = 3;
  const auto v = featurize_payload(HttpSample{"abcd", std::nullopt}, cfg);

  // oracle: exactly {"abc", "bcd"}, each hashed independently
  std::map<uint64_t, double> buckets;
  for (const std::string& gram : {std::string("abc"), std::string("bcd")}) {
    buckets[testsupport::oracle_bucket(gram, cfg.dim_per_half)] +=
        testsupport::oracle_sign(gram);
  }
  double norm = 0.0;
  for (const auto& [idx, w] : buckets) norm += w * w;
  norm = std::sqrt(norm);

  REQUIRE(v.entries.size() == buckets.size());
  for (const auto& [idx, w] : v.entries) {
    REQUIRE(buckets.count(idx) == 1);
    CHECK(w == doctest::Approx(buckets[idx] / norm).epsilon(1e-12));
  }
}

TEST_CASE("featurize_payload: request and response halves never collide") {
  PayloadFeaturizerConfig cfg;
  cfg.dim_per_half = 512;
  const auto v = featurize_payload(HttpSample{"GET /abc", std::string("HTTP/1.1 200 abc")}, cfg);
  bool saw_request_half = false;
  bool saw_response_half = false;
  for (const auto& [idx, w] : v.entries) {
    if (idx < 512) saw_request_half = true;
    if (idx >= 512) saw_response_half = true;
  }
  CHECK(saw_request_half);
  CHECK(saw_response_half);
}

TEST_CASE("featurize_payload output is unit norm or zero; identical inputs agree") {
  PayloadFeaturizerConfig cfg;
  cfg.dim_per_half = 2048;
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::string req;
    const size_t len = 3 + gen() % 200;
    for (size_t i = 0; i < len; ++i) req.push_back(static_cast<char>(gen() % 256));
    if (req.find(kResponseSeparator) != std::string::npos) continue;
    HttpSample sample{req, std::nullopt};
    const auto a = featurize_payload(sample, cfg);
    const auto b = featurize_payload(sample, cfg);
    CHECK(a.entries == b.entries);
    CHECK(a.l2_norm() == doctest::Approx(1.0).epsilon(1e-9));
    uint32_t prev = 0;
    bool first = true;
    for (const auto& [idx, w] : a.entries) {
      if (!first) CHECK(idx > prev);
      prev = idx;
      first = false;
      CHECK(std::isfinite(w));
    }
  }
}

TEST_CASE("featurizer configs round-trip through JSON") {
  TextFeaturizerConfig t;
  t.dim = 777;
  const auto t2 = text_featurizer_from_json(text_featurizer_to_json(t));
  CHECK(t2.dim == 777);

  PayloadFeaturizerConfig p;
  p.dim_per_half = 123;
  p.ngram_min = 2;
  p.ngram_max = 5;
  const auto p2 = payload_featurizer_from_json(payload_featurizer_to_json(p));
  CHECK(p2.dim_per_half == 123);
  CHECK(p2.ngram_min == 2);
  CHECK(p2.ngram_max == 5);

  CHECK_THROWS_AS(text_featurizer_from_json(payload_featurizer_to_json(p)), ConfigError);
}

TEST_CASE("featurizer config validation") {
  TextFeaturizerConfig t;
  t.dim = 1;
  CHECK_THROWS_AS(featurize_text("x", t), ConfigError);

  PayloadFeaturizerConfig p;
  p.ngram_min = 1;
  CHECK_THROWS_AS(featurize_payload(HttpSample{"x", std::nullopt}, p), ConfigError);
  p.ngram_min = 3;
  p.ngram_max = 9;
  CHECK_THROWS_AS(featurize_payload(HttpSample{"x", std::nullopt}, p), ConfigError);
}
