#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "salm/corpus.hpp"
#include "salm/errors.hpp"

namespace salm::synthgen {

/// Generation profile of one class: request/response building blocks plus
/// the IoC fragments that carry the class signal, and description phrases
/// sharing vocabulary with the class's generic label.
struct ClassProfile {
  std::string name;
  std::string generic_label;  // empty -> taken from the default taxonomy
  std::vector<std::string> paths;
  std::vector<std::string> param_templates;  // may contain {hex}/{num}/{ip} slots
  std::vector<std::string> ioc_fragments;
  std::vector<std::string> description_phrases;
  std::vector<std::string> extra_headers;  // class-specific header templates
  std::string response_status = "200 OK";
  std::vector<std::string> response_bodies;
  bool use_post = false;
};

struct GenSpec {
  std::vector<ClassProfile> classes;
  size_t samples_per_class = 1000;  // threats per class
  size_t payloads_per_threat = 1;
  uint64_t seed = 0;
  std::vector<std::string> header_pool;  // >= 8 request header templates
  Date date_start{2021, 1, 1};
  Date date_end{2023, 12, 31};

  void validate() const;
};

/// Built-in profiles for the 11 classes with concrete public IoCs; the four
/// classes whose indicators are only high-level (Botnet, Code-execution,
/// Scanner, Webshell) are not generated.
GenSpec default_genspec();

/// Restrict a spec to the named classes (case-insensitive).
GenSpec genspec_for_classes(const GenSpec& base, const std::vector<std::string>& names);

/// Load generation settings from JSON: seed, samples_per_class,
/// payloads_per_threat, optional class-name subset. Profiles are built in.
GenSpec load_genspec(const std::filesystem::path& path);

/// Deterministic benchmark corpus: per class, samples_per_class threats of
/// one description plus payloads_per_threat payloads sharing the threat id.
/// Class ids are renumbered densely in spec order. Byte-identical per seed.
Corpus generate_template_corpus(const GenSpec& spec);

/// Payload records in the interchange JSON-array shape
/// ({"Category", "HTTP Payload"}).
nlohmann::json to_synthetic_records(const Corpus& corpus);
void write_synthetic_json(const Corpus& corpus, const std::filesystem::path& path);

/// Fill the generation prompt template with a class name and guidance file
/// names.
std::string render_prompt(std::string_view class_name,
                          const std::vector<std::string>& ioc_files, int sample_count = 250);

struct SampleValidation {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Checks one record against the generation contract: both fields present,
/// exactly one response separator, non-empty request and response parts, at
/// least 8 request header lines.
SampleValidation validate_sample(const nlohmann::json& record);

/// Exact-duplicate payload detection; each group lists the record indices
/// sharing one payload string.
std::vector<std::vector<size_t>> find_duplicate_payloads(const nlohmann::json& records);

// ---------------------------------------------------------------------------
// External generation service (JSON-over-HTTP chat-completion contract)

class LlmAuthError : public Error {
 public:
  using Error::Error;
};
class LlmTimeoutError : public Error {
 public:
  using Error::Error;
};
/// Transport-level failure: non-JSON body, missing fields, exhausted retries.
class LlmResponseError : public Error {
 public:
  using Error::Error;
};
/// The service answered, but its output violates the sample schema.
class LlmSchemaError : public Error {
 public:
  using Error::Error;
};

struct LlmClientConfig {
  std::string endpoint;  // full URL of the chat-completion endpoint
  std::string model;
  std::string api_key;   // resolved from the environment by the caller
  int max_retries = 3;
  int backoff_base_ms = 500;  // doubles per retry
  int timeout_seconds = 60;
  int max_concurrent = 2;
};

/// Transport seam: the production implementation speaks HTTP, tests script
/// responses. Implementations must be safe for concurrent post() calls.
class ChatTransport {
 public:
  struct Response {
    int status = 0;
    std::string body;
    bool timed_out = false;
  };

  virtual ~ChatTransport() = default;
  virtual Response post(const std::string& url, const std::string& api_key,
                        const std::string& json_body) = 0;
};

/// cpp-httplib transport (http and https endpoints).
std::unique_ptr<ChatTransport> make_http_transport(int timeout_seconds);

struct LlmBatchResult {
  std::vector<nlohmann::json> accepted;      // records that passed validate_sample
  std::vector<std::string> rejected;         // violation summaries per bad record
  std::vector<int> backoff_log_ms;           // delay before each retry
};

/// One prompt -> validated records. Retries 429/5xx/timeouts with
/// exponential backoff; auth failures, non-JSON responses and schema
/// violations raise their distinct error types.
LlmBatchResult llm_generate(ChatTransport& transport, const LlmClientConfig& config,
                            const std::string& prompt);

/// Bounded-concurrency batch; results are positionally aligned with prompts
/// and each request retries independently.
std::vector<LlmBatchResult> llm_generate_many(ChatTransport& transport,
                                              const LlmClientConfig& config,
                                              const std::vector<std::string>& prompts);

}  // namespace salm::synthgen
