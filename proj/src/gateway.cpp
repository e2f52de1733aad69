#include "vocada/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include <httplib.h>
#include <openssl/evp.h>

#include "vocada/error.hpp"
#include "vocada/resources.hpp"

namespace vocada {

namespace {

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot read " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_remote(std::string_view ref) { return ref.starts_with("http://") || ref.starts_with("https://"); }

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

std::string mime_for(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (ext == ".png") {
    return "image/png";
  }
  if (ext == ".webp") {
    return "image/webp";
  }
  if (ext == ".gif") {
    return "image/gif";
  }
  return "image/jpeg";
}

bool retryable(int status) { return status == 429 || status >= 500; }

std::chrono::milliseconds jittered(std::chrono::milliseconds base) {
  thread_local std::mt19937 rng{std::random_device{}()};
  std::uniform_real_distribution<double> dist(0.0, 0.25);
  return std::chrono::milliseconds(static_cast<long long>(static_cast<double>(base.count()) * (1.0 + dist(rng))));
}

std::string extract_content(const nlohmann::json& response) {
  const auto& content = response.at("choices").at(0).at("message").at("content");
  if (content.is_string()) {
    return content.get<std::string>();
  }
  std::string out;
  if (content.is_array()) {
    for (const auto& part : content) {
      if (part.value("type", "") == "text") {
        out += part.value("text", "");
      }
    }
  }
  return out;
}

}  // namespace

void GatewayConfig::validate() const {
  if (base_url.empty()) {
    throw DataError("gateway base_url is empty");
  }
  if (!is_remote(base_url)) {
    throw DataError("gateway base_url must start with http:// or https://: " + base_url);
  }
  if (model.empty()) {
    throw DataError("gateway model is empty");
  }
  if (max_in_flight < 1) {
    throw DataError("gateway max_in_flight must be >= 1");
  }
  if (max_retries < 0) {
    throw DataError("gateway max_retries must be >= 0");
  }
  if (!(timeout_seconds > 0.0)) {
    throw DataError("gateway timeout must be > 0");
  }
}

CaptionerPrompt CaptionerPrompt::builtin() {
  std::string text(resources::kCaptionerPrompt);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
    text.pop_back();
  }
  return {std::move(text)};
}

CaptionerPrompt CaptionerPrompt::load(const std::filesystem::path& path) {
  std::string text = read_file_bytes(path);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
    text.pop_back();
  }
  if (text.empty()) {
    throw DataError("captioner prompt " + path.string() + " is empty");
  }
  return {std::move(text)};
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string base64_encode(std::string_view data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(data.data()), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

ChatClient::ChatClient(GatewayConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto scheme_end = cfg_.base_url.find("://");
  const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
  scheme_host_port_ = cfg_.base_url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? std::string() : cfg_.base_url.substr(path_start);
  while (!path.empty() && path.back() == '/') {
    path.pop_back();
  }
  endpoint_path_ = path.ends_with("/chat/completions") ? path : path + "/chat/completions";
  in_flight_ = std::make_unique<std::counting_semaphore<>>(cfg_.max_in_flight);
  if (cfg_.cache_dir) {
    std::filesystem::create_directories(*cfg_.cache_dir);
  }
}

CaptionRecord ChatClient::caption_image(const std::string& image_id, const std::string& image_ref,
                                        const CaptionerPrompt& prompt) {
  if (prompt.text.empty()) {
    throw DataError("captioner prompt is empty");
  }
  std::string url;
  std::string image_digest;
  if (is_remote(image_ref)) {
    url = image_ref;
    image_digest = sha256_hex(image_ref);
  } else {
    const std::string bytes = read_file_bytes(image_ref);
    url = "data:" + mime_for(image_ref) + ";base64," + base64_encode(bytes);
    image_digest = sha256_hex(bytes);
  }
  const nlohmann::json messages = nlohmann::json::array(
      {{{"role", "user"},
        {"content", nlohmann::json::array({{{"type", "text"}, {"text", prompt.text}},
                                           {{"type", "image_url"}, {"image_url", {{"url", url}}}}})}}});
  const nlohmann::json material = {
      {"kind", "caption"}, {"model", cfg_.model}, {"prompt", prompt.text}, {"image_sha256", image_digest}};
  return {image_id, complete(messages, material, image_id), cfg_.model};
}

std::string ChatClient::chat_select(std::string_view system_prompt, std::string_view user_message,
                                    std::string_view label) {
  const nlohmann::json messages = nlohmann::json::array(
      {{{"role", "system"}, {"content", system_prompt}}, {{"role", "user"}, {"content", user_message}}});
  const nlohmann::json material = {
      {"kind", "chat"}, {"model", cfg_.model}, {"system", system_prompt}, {"user", user_message}};
  return complete(messages, material, label);
}

std::optional<std::string> ChatClient::cache_read(const std::string& key) const {
  if (!cfg_.cache_dir) {
    return std::nullopt;
  }
  const auto path = *cfg_.cache_dir / (key + ".json");
  std::ifstream in(path);
  if (!in) {
    return std::nullopt;
  }
  try {
    return nlohmann::json::parse(in).at("text").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;  // unreadable entry: refetch and overwrite
  }
}

void ChatClient::cache_write(const std::string& key, const nlohmann::json& material, const nlohmann::json& response,
                             const std::string& text) const {
  if (!cfg_.cache_dir) {
    return;
  }
  const auto path = *cfg_.cache_dir / (key + ".json");
  std::ostringstream tid;
  tid << std::this_thread::get_id();
  const auto tmp = *cfg_.cache_dir / (key + ".json.tmp" + tid.str());
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << nlohmann::json{{"key", material}, {"response", response}, {"text", text}}.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::string ChatClient::complete(const nlohmann::json& messages, const nlohmann::json& cache_material,
                                 std::string_view label) {
  const std::string key = sha256_hex(cache_material.dump());
  if (auto hit = cache_read(key)) {
    ++cache_hits_;
    return *hit;
  }

  const nlohmann::json request = {{"model", cfg_.model},
                                  {"messages", messages},
                                  {"temperature", cfg_.temperature},
                                  {"max_tokens", cfg_.max_tokens}};
  const std::string body = request.dump();
  httplib::Headers headers;
  if (const char* api_key = std::getenv(cfg_.api_key_env.c_str()); api_key != nullptr && *api_key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + api_key);
  }

  const std::string what = label.empty() ? std::string("request") : "request for '" + std::string(label) + "'";
  std::vector<std::string> attempts;
  auto delay = cfg_.backoff_initial;
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(cfg_.timeout_seconds));

  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(jittered(delay));
      delay *= 2;
    }
    httplib::Result res{nullptr, httplib::Error::Unknown};
    {
      const SlotGuard slot(*in_flight_);
      ++http_requests_;
      httplib::Client client(scheme_host_port_);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      res = client.Post(endpoint_path_, headers, body, "application/json");
    }

    if (!res) {
      attempts.push_back("attempt " + std::to_string(attempt + 1) + ": transport error (" +
                         httplib::to_string(res.error()) + ")");
      continue;
    }
    if (res->status != 200) {
      attempts.push_back("attempt " + std::to_string(attempt + 1) + ": HTTP " + std::to_string(res->status));
      if (retryable(res->status)) {
        continue;
      }
      break;
    }

    nlohmann::json response;
    std::string text;
    try {
      response = nlohmann::json::parse(res->body);
      text = extract_content(response);
    } catch (const nlohmann::json::exception& e) {
      throw GatewayError(what + ": malformed chat-completions response: " + e.what());
    }
    if (text.empty()) {
      throw GatewayError(what + ": empty assistant content");
    }
    cache_write(key, cache_material, response, text);
    return text;
  }

  std::string msg = what + " to " + cfg_.base_url + " failed";
  for (const auto& a : attempts) {
    msg += "; " + a;
  }
  throw GatewayError(msg);
}

}  // namespace vocada
