#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

#include <json.hpp>

#include "vocada/domain.hpp"

namespace vocada {

struct GatewayConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8000/v1"; "/chat/completions" is appended
  std::string api_key_env = "VOCADA_API_KEY";
  std::string model;
  double timeout_seconds = 120.0;
  int max_retries = 3;
  std::chrono::milliseconds backoff_initial{1000};  // doubled per retry, with jitter
  int max_in_flight = 4;
  std::optional<std::filesystem::path> cache_dir;
  double temperature = 0.0;
  int max_tokens = 1024;

  void validate() const;
};

struct CaptionerPrompt {
  std::string text;

  static CaptionerPrompt builtin();
  static CaptionerPrompt load(const std::filesystem::path& path);
};

std::string sha256_hex(std::string_view data);
std::string base64_encode(std::string_view data);

/// OpenAI-compatible chat-completions client. Shareable across threads: at most
/// max_in_flight HTTP requests are outstanding at any time. Transport errors and
/// HTTP 429/5xx are retried; other statuses fail at once. Responses are cached
/// under cache_dir/<sha256>.json when a cache directory is configured.
class ChatClient {
 public:
  explicit ChatClient(GatewayConfig cfg);

  /// Sends the prompt plus the image (local file as a base64 data URL, or an http(s) URL as is).
  CaptionRecord caption_image(const std::string& image_id, const std::string& image_ref,
                              const CaptionerPrompt& prompt);

  /// Raw assistant text for a system + user exchange. `label` names the work item in errors.
  std::string chat_select(std::string_view system_prompt, std::string_view user_message,
                          std::string_view label = {});

  const GatewayConfig& config() const { return cfg_; }
  std::size_t http_requests() const { return http_requests_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

 private:
  std::string complete(const nlohmann::json& messages, const nlohmann::json& cache_material, std::string_view label);
  std::optional<std::string> cache_read(const std::string& key) const;
  void cache_write(const std::string& key, const nlohmann::json& material, const nlohmann::json& response,
                   const std::string& text) const;

  GatewayConfig cfg_;
  std::string scheme_host_port_;
  std::string endpoint_path_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
  std::atomic<std::size_t> http_requests_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace vocada
