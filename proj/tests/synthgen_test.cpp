#include "salm/synthgen.hpp"

#include <doctest.h>

#include <fstream>
#include <mutex>
#include <set>

#include "salm/baselines.hpp"
#include "salm/featurize.hpp"
#include "test_support.hpp"

using namespace salm;
using namespace salm::synthgen;
using nlohmann::json;

namespace {

GenSpec small_spec(size_t per_class, uint64_t seed,
                   std::vector<std::string> names = {"Injection", "XSS"}) {
  GenSpec spec = genspec_for_classes(default_genspec(), names);
  spec.samples_per_class = per_class;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("template corpus: balanced classes, descriptions and payloads per threat") {
  const Corpus corpus = generate_template_corpus(small_spec(3, 1));
  CHECK(corpus.provenance == Provenance::Template);
  CHECK(corpus.classes.size() == 2);
  CHECK(corpus.count_kind(SampleKind::Payload) == 6);
  CHECK(corpus.count_kind(SampleKind::Description) == 6);
  const auto hist = corpus.class_histogram(SampleKind::Payload);
  CHECK(hist.at(1) == 3);
  CHECK(hist.at(2) == 3);

  // each payload shares its threat with exactly one description
  const auto pairs = build_pairs(corpus);
  CHECK(pairs.pairs.size() == 6);
  CHECK(pairs.report.empty());
}

TEST_CASE("template corpus is byte-identical for equal seeds") {
  testsupport::TempDir dir("det");
  const auto a = dir.path() / "a.jsonl";
  const auto b = dir.path() / "b.jsonl";
  save_corpus_jsonl(generate_template_corpus(small_spec(5, 42)), a);
  save_corpus_jsonl(generate_template_corpus(small_spec(5, 42)), b);
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ca == cb);

  const auto c = generate_template_corpus(small_spec(5, 43));
  testsupport::TempDir dir2("det2");
  const auto cc = dir2.path() / "c.jsonl";
  save_corpus_jsonl(c, cc);
  std::ifstream fc(cc, std::ios::binary);
  const std::string ccontent((std::istreambuf_iterator<char>(fc)),
                             std::istreambuf_iterator<char>());
  CHECK(ca != ccontent);  // different seed, different bytes
}

TEST_CASE("every generated sample passes validate_sample") {
  GenSpec spec = default_genspec();  // all 11 profiles
  spec.samples_per_class = 4;
  spec.seed = 7;
  const Corpus corpus = generate_template_corpus(spec);
  const json records = to_synthetic_records(corpus);
  CHECK(records.size() == 44);
  for (const auto& rec : records) {
    const auto v = validate_sample(rec);
    if (!v.ok) {
      for (const auto& reason : v.violations) MESSAGE(reason);
    }
    CHECK(v.ok);
  }
}

TEST_CASE("template output round-trips through load_corpus with zero rejections") {
  testsupport::TempDir dir("rt");
  GenSpec spec = default_genspec();
  spec.samples_per_class = 3;
  spec.seed = 9;
  const Corpus corpus = generate_template_corpus(spec);
  const auto path = dir.path() / "synth.json";
  write_synthetic_json(corpus, path);
  const auto loaded = load_corpus(path, CorpusFormat::JsonArray);
  CHECK(loaded.rejections.empty());
  CHECK(loaded.corpus.samples.size() == corpus.count_kind(SampleKind::Payload));
}

TEST_CASE("template corpus payloads are nearest-centroid separable in feature space") {
  GenSpec spec = default_genspec();
  spec.samples_per_class = 12;
  spec.seed = 21;
  const Corpus corpus = generate_template_corpus(spec);

  PayloadFeaturizerConfig fcfg;
  fcfg.dim_per_half = 4096;

  std::map<int, FeatureVector> sums;  // raw-feature centroid per class
  std::map<int, size_t> counts;
  std::vector<std::pair<int, FeatureVector>> payloads;
  for (const auto& s : corpus.samples) {
    if (s.kind != SampleKind::Payload) continue;
    payloads.emplace_back(s.class_id, featurize_payload(parse_http_sample(s.text), fcfg));
  }
  std::map<int, std::map<uint32_t, double>> centroid_acc;
  for (const auto& [cls, fv] : payloads) {
    for (const auto& [idx, w] : fv.entries) centroid_acc[cls][idx] += w;
    counts[cls]++;
  }
  std::map<int, std::map<uint32_t, double>> centroids;
  for (auto& [cls, acc] : centroid_acc) {
    double norm = 0.0;
    for (auto& [idx, w] : acc) norm += w * w;
    norm = std::sqrt(norm);
    for (auto& [idx, w] : acc) centroids[cls][idx] = w / norm;
  }

  size_t correct = 0;
  for (const auto& [cls, fv] : payloads) {
    int best = 0;
    double best_sim = -2.0;
    for (const auto& [c, centroid] : centroids) {
      double sim = 0.0;
      for (const auto& [idx, w] : fv.entries) {
        auto it = centroid.find(idx);
        if (it != centroid.end()) sim += w * it->second;
      }
      if (sim > best_sim) {
        best_sim = sim;
        best = c;
      }
    }
    correct += best == cls ? 1 : 0;
  }
  CHECK(correct == payloads.size());  // 100% by construction
}

TEST_CASE("genspec validation and class selection") {
  GenSpec spec = default_genspec();
  spec.samples_per_class = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  CHECK_THROWS_AS(genspec_for_classes(default_genspec(), {"NoSuchClass"}), ConfigError);
  GenSpec empty = default_genspec();
  empty.classes.clear();
  CHECK_THROWS_AS(generate_template_corpus(empty), ConfigError);
}

TEST_CASE("render_prompt fills the class name and demands JSON-array output") {
  const std::string prompt = render_prompt("Worm", {"worm_iocs.txt"});
  CHECK(prompt.find("specific vulnerability type Worm") != std::string::npos);
  CHECK(prompt.find("valid JSON array") != std::string::npos);
  CHECK(prompt.find("valid JSON with no extra text") != std::string::npos);
  CHECK(prompt.find("at least 8 realistic HTTP headers") != std::string::npos);
  CHECK(prompt.find("worm_iocs.txt") != std::string::npos);
  CHECK(prompt == render_prompt("Worm", {"worm_iocs.txt"}));  // deterministic
  CHECK(render_prompt("XSS", {}, 100).find("**100 realistic") != std::string::npos);
}

TEST_CASE("validate_sample: conforming and violating records") {
  std::string request = "GET /a?x=1 HTTP/1.1\r\n";
  for (int i = 0; i < 8; ++i) request += "Header-" + std::to_string(i) + ": v\r\n";
  const std::string payload =
      request + std::string(kResponseSeparator) + "HTTP/1.1 200 OK\r\n\r\nbody";

  CHECK(validate_sample({{"Category", "XSS"}, {"HTTP Payload", payload}}).ok);

  const auto missing_cat = validate_sample({{"HTTP Payload", payload}});
  CHECK_FALSE(missing_cat.ok);
  CHECK(missing_cat.violations[0].find("Category") != std::string::npos);

  const auto no_sep = validate_sample({{"Category", "XSS"}, {"HTTP Payload", request}});
  CHECK_FALSE(no_sep.ok);
  CHECK(no_sep.violations[0] == "missing response separator");

  // exactly 7 headers: violation names the count
  std::string seven = "GET / HTTP/1.1\r\n";
  for (int i = 0; i < 7; ++i) seven += "Header-" + std::to_string(i) + ": v\r\n";
  const auto short_headers = validate_sample(
      {{"Category", "XSS"},
       {"HTTP Payload", seven + std::string(kResponseSeparator) + "HTTP/1.1 200 OK"}});
  CHECK_FALSE(short_headers.ok);
  REQUIRE(short_headers.violations.size() == 1);
  CHECK(short_headers.violations[0].find("7 header lines") != std::string::npos);

  const auto doubled = validate_sample(
      {{"Category", "XSS"},
       {"HTTP Payload", payload + std::string(kResponseSeparator) + "again"}});
  CHECK_FALSE(doubled.ok);
}

TEST_CASE("find_duplicate_payloads groups exact duplicates") {
  json records = json::array();
  records.push_back({{"Category", "XSS"}, {"HTTP Payload", "AAA"}});
  records.push_back({{"Category", "XSS"}, {"HTTP Payload", "BBB"}});
  records.push_back({{"Category", "DoS"}, {"HTTP Payload", "AAA"}});
  const auto groups = find_duplicate_payloads(records);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0] == std::vector<size_t>{0, 2});
}

// ---------------------------------------------------------------------------
// LLM client against a scripted transport

namespace {

class ScriptedTransport final : public ChatTransport {
 public:
  explicit ScriptedTransport(std::vector<Response> script) : script_(std::move(script)) {}

  Response post(const std::string&, const std::string&, const std::string&) override {
    std::lock_guard<std::mutex> lock(mutex_);
    ++calls_;
    if (cursor_ >= script_.size()) return script_.back();
    return script_[cursor_++];
  }

  int calls() const { return calls_; }

 private:
  std::mutex mutex_;
  std::vector<Response> script_;
  size_t cursor_ = 0;
  int calls_ = 0;
};

std::string envelope_with(const std::string& content) {
  return json{{"choices", json::array({json{{"message", json{{"content", content}}}}})}}.dump();
}

std::string valid_record_array() {
  std::string request = "GET /x?id=1 HTTP/1.1\r\n";
  for (int i = 0; i < 8; ++i) request += "H" + std::to_string(i) + ": v\r\n";
  const json records = json::array(
      {json{{"Category", "Injection"},
            {"HTTP Payload",
             request + std::string(kResponseSeparator) + "HTTP/1.1 200 OK\r\n\r\nok"}}});
  return records.dump();
}

LlmClientConfig test_config() {
  LlmClientConfig cfg;
  cfg.endpoint = "http://service.test/v1/chat/completions";
  cfg.model = "test-model";
  cfg.api_key = "key";
  cfg.backoff_base_ms = 0;  // no real sleeping in tests
  cfg.max_retries = 2;
  return cfg;
}

}  // namespace

TEST_CASE("llm_generate: one valid record comes back accepted") {
  ScriptedTransport transport({{200, envelope_with(valid_record_array()), false}});
  const auto result = llm_generate(transport, test_config(), "prompt");
  CHECK(result.accepted.size() == 1);
  CHECK(result.rejected.empty());
  CHECK(result.backoff_log_ms.empty());
}

TEST_CASE("llm_generate: prose before JSON is a schema violation") {
  ScriptedTransport transport(
      {{200, envelope_with("Sure! Here are your samples:\n[]"), false}});
  CHECK_THROWS_AS(llm_generate(transport, test_config(), "prompt"), LlmSchemaError);
}

TEST_CASE("llm_generate: 429 then success retries once and logs the backoff") {
  ScriptedTransport transport({{429, "slow down", false},
                               {200, envelope_with(valid_record_array()), false}});
  LlmClientConfig cfg = test_config();
  cfg.backoff_base_ms = 1;
  const auto result = llm_generate(transport, cfg, "prompt");
  CHECK(result.accepted.size() == 1);
  CHECK(transport.calls() == 2);
  REQUIRE(result.backoff_log_ms.size() == 1);
  CHECK(result.backoff_log_ms[0] == 1);
}

TEST_CASE("llm_generate: distinct error types per failure mode") {
  ScriptedTransport auth({{401, "nope", false}});
  CHECK_THROWS_AS(llm_generate(auth, test_config(), "p"), LlmAuthError);

  ScriptedTransport timeouts({{0, "", true}});
  CHECK_THROWS_AS(llm_generate(timeouts, test_config(), "p"), LlmTimeoutError);

  ScriptedTransport bad_body({{200, "<html>not json</html>", false}});
  CHECK_THROWS_AS(llm_generate(bad_body, test_config(), "p"), LlmResponseError);

  ScriptedTransport exhausted({{503, "down", false}});
  CHECK_THROWS_AS(llm_generate(exhausted, test_config(), "p"), LlmResponseError);

  LlmClientConfig unconfigured = test_config();
  unconfigured.api_key.clear();
  ScriptedTransport any({{200, "", false}});
  CHECK_THROWS_AS(llm_generate(any, unconfigured, "p"), ConfigError);
}

TEST_CASE("llm_generate: invalid records are rejected with reasons, valid kept") {
  json records = json::parse(valid_record_array());
  records.push_back({{"Category", "XSS"}, {"HTTP Payload", "no separator here"}});
  ScriptedTransport transport({{200, envelope_with(records.dump()), false}});
  const auto result = llm_generate(transport, test_config(), "prompt");
  CHECK(result.accepted.size() == 1);
  REQUIRE(result.rejected.size() == 1);
  CHECK(result.rejected[0].find("missing response separator") != std::string::npos);
}

TEST_CASE("llm_generate_many: bounded concurrency, results aligned with prompts") {
  ScriptedTransport transport({{200, envelope_with(valid_record_array()), false}});
  LlmClientConfig cfg = test_config();
  cfg.max_concurrent = 3;
  const auto results = llm_generate_many(transport, cfg, {"a", "b", "c", "d", "e"});
  REQUIRE(results.size() == 5);
  for (const auto& r : results) CHECK(r.accepted.size() == 1);
  CHECK(transport.calls() == 5);
}
