#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "salm/synthgen.hpp"

namespace salm::synthgen {

using nlohmann::json;

namespace {

class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(int timeout_seconds) : timeout_seconds_(timeout_seconds) {}

  Response post(const std::string& url, const std::string& api_key,
                const std::string& json_body) override {
    // split "scheme://host[:port]/path"
    const size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      throw ConfigError("llm endpoint must be a full http(s) URL: '" + url + "'");
    }
    const size_t path_start = url.find('/', scheme_end + 3);
    const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    auto result = client.Post(path, headers, json_body, "application/json");
    Response response;
    if (!result) {
      response.timed_out = true;
      return response;
    }
    response.status = result->status;
    response.body = result->body;
    return response;
  }

 private:
  int timeout_seconds_;
};

}  // namespace

std::unique_ptr<ChatTransport> make_http_transport(int timeout_seconds) {
  return std::make_unique<HttpChatTransport>(timeout_seconds);
}

LlmBatchResult llm_generate(ChatTransport& transport, const LlmClientConfig& config,
                            const std::string& prompt) {
  if (config.endpoint.empty()) throw ConfigError("llm_generate: no endpoint configured");
  if (config.model.empty()) throw ConfigError("llm_generate: no model configured");
  if (config.api_key.empty()) throw ConfigError("llm_generate: no API credential configured");

  const std::string body =
      json{{"model", config.model},
           {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}}
          .dump();

  LlmBatchResult result;
  ChatTransport::Response response;
  int attempt = 0;
  while (true) {
    response = transport.post(config.endpoint, config.api_key, body);

    if (!response.timed_out) {
      if (response.status == 401 || response.status == 403) {
        throw LlmAuthError("llm_generate: authentication failed (HTTP " +
                           std::to_string(response.status) + ")");
      }
      if (response.status == 200) break;
      const bool retryable = response.status == 429 || response.status >= 500;
      if (!retryable) {
        throw LlmResponseError("llm_generate: HTTP " + std::to_string(response.status));
      }
    }
    if (attempt >= config.max_retries) {
      if (response.timed_out) {
        throw LlmTimeoutError("llm_generate: request timed out after " +
                              std::to_string(attempt) + " retries");
      }
      throw LlmResponseError("llm_generate: HTTP " + std::to_string(response.status) +
                             " after " + std::to_string(attempt) + " retries");
    }
    const int delay_ms = config.backoff_base_ms * (1 << attempt);
    result.backoff_log_ms.push_back(delay_ms);
    if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    ++attempt;
  }

  json envelope;
  try {
    envelope = json::parse(response.body);
  } catch (const json::exception&) {
    throw LlmResponseError("llm_generate: service returned a non-JSON body");
  }
  std::string content;
  try {
    content = envelope.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw LlmResponseError("llm_generate: response lacks choices[0].message.content");
  }

  json records;
  try {
    records = json::parse(content);
  } catch (const json::exception&) {
    throw LlmSchemaError("llm_generate: model output is not valid JSON");
  }
  if (!records.is_array()) {
    throw LlmSchemaError("llm_generate: model output is not a JSON array");
  }

  for (size_t i = 0; i < records.size(); ++i) {
    const SampleValidation v = validate_sample(records[i]);
    if (v.ok) {
      result.accepted.push_back(records[i]);
    } else {
      std::string reason = "record " + std::to_string(i) + ": ";
      for (size_t k = 0; k < v.violations.size(); ++k) {
        if (k > 0) reason += "; ";
        reason += v.violations[k];
      }
      result.rejected.push_back(std::move(reason));
    }
  }
  return result;
}

std::vector<LlmBatchResult> llm_generate_many(ChatTransport& transport,
                                              const LlmClientConfig& config,
                                              const std::vector<std::string>& prompts) {
  std::vector<LlmBatchResult> results(prompts.size());
  std::vector<std::exception_ptr> errors(prompts.size());
  std::atomic<size_t> next{0};

  const size_t workers =
      std::min<size_t>(std::max(config.max_concurrent, 1), std::max<size_t>(prompts.size(), 1));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= prompts.size()) return;
        try {
          results[i] = llm_generate(transport, config, prompts[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return results;
}

}  // namespace salm::synthgen
