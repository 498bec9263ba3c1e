#include "httplib.h"

#include "tracefix/gateway.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace tracefix {

namespace fs = std::filesystem;

ChatRequest make_request(const RenderedPrompt& prompt, std::string model, double temperature,
                         std::size_t sample_index) {
  ChatRequest request;
  request.model = std::move(model);
  if (!prompt.system.empty()) request.messages.push_back({"system", prompt.system});
  request.messages.push_back({"user", prompt.user});
  request.temperature = temperature;
  request.sample_index = sample_index;
  return request;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string request_key(const ChatRequest& request) {
  nlohmann::ordered_json doc;
  doc["model"] = request.model;
  auto messages = nlohmann::ordered_json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  doc["messages"] = std::move(messages);
  char temperature[32];
  std::snprintf(temperature, sizeof temperature, "%.17g", request.temperature);
  doc["temperature"] = temperature;
  doc["sample_index"] = request.sample_index;
  return sha256_hex(doc.dump());
}

void GatewayConfig::validate() const {
  if (!(temperature >= 0.0)) throw ConfigError("gateway temperature must be >= 0");
  if (max_retries < 0) throw ConfigError("gateway max_retries must be >= 0");
}

// -- HttpGateway ------------------------------------------------------------

HttpGateway::HttpGateway(GatewayConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("gateway endpoint must be an http(s) URL");
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  scheme_host_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/v1/chat/completions" : config_.endpoint.substr(path_start);
  if (const char* key = std::getenv("GATEWAY_API_KEY")) api_key_ = key;
}

std::string HttpGateway::complete(const ChatRequest& request) {
  nlohmann::json body;
  body["model"] = request.model.empty() ? config_.model : request.model;
  body["temperature"] = request.temperature;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  httplib::Client client(scheme_host_);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count();
  client.set_connection_timeout(static_cast<time_t>(seconds));
  client.set_read_timeout(static_cast<time_t>(seconds));
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto response = client.Post(path_, headers, body.dump(), "application/json");
  if (!response) throw GatewayError("request failed: " + httplib::to_string(response.error()));
  if (response->status != 200)
    throw GatewayError("gateway returned HTTP " + std::to_string(response->status) + ": " +
                       response->body.substr(0, 300));
  try {
    auto doc = nlohmann::json::parse(response->body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw GatewayError(std::string("malformed completion response: ") + e.what());
  }
}

// -- TokenBucket --------------------------------------------------------------

TokenBucket::TokenBucket(double per_minute, double burst)
    : rate_per_second_(per_minute / 60.0),
      capacity_(std::max(1.0, burst)),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  std::unique_lock lock(mutex_);
  while (true) {
    const auto now = std::chrono::steady_clock::now();
    tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_per_second_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait = (1.0 - tokens_) / rate_per_second_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    lock.lock();
  }
}

// -- CachingGateway -----------------------------------------------------------

CachingGateway::CachingGateway(ModelGateway& upstream, GatewayConfig config)
    : upstream_(upstream), config_(std::move(config)) {
  config_.validate();
  if (config_.requests_per_minute > 0) bucket_.emplace(config_.requests_per_minute);
  if (!config_.cache_dir.empty()) fs::create_directories(config_.cache_dir);
}

fs::path CachingGateway::entry_path(const ChatRequest& request) const {
  return config_.cache_dir / (request_key(request) + ".json");
}

std::optional<std::string> CachingGateway::lookup(const ChatRequest& request, const std::string& key) const {
  if (config_.cache_dir.empty()) return std::nullopt;
  std::ifstream in(config_.cache_dir / (key + ".json"), std::ios::binary);
  if (!in) return std::nullopt;
  try {
    auto doc = nlohmann::json::parse(in);
    if (doc.at("key").get<std::string>() != key || doc.at("model").get<std::string>() != request.model)
      return std::nullopt;
    return doc.at("reply").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

void CachingGateway::store(const ChatRequest& request, const std::string& reply) const {
  if (config_.cache_dir.empty()) return;
  write_scripted_reply(config_.cache_dir, request, reply);
}

std::string CachingGateway::complete(const ChatRequest& request) {
  const std::string key = request_key(request);
  if (auto hit = lookup(request, key)) {
    ++cache_hits_;
    return *hit;
  }
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto delay = config_.backoff_base * (1LL << std::min(attempt - 1, 16));
      std::this_thread::sleep_for(delay);
    }
    if (bucket_) bucket_->acquire();
    ++upstream_calls_;
    try {
      std::string reply = upstream_.complete(request);
      store(request, reply);
      return reply;
    } catch (const GatewayError& e) {
      last_error = e.what();
    }
  }
  throw GatewayError("gave up after " + std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

std::string cached_call(CachingGateway& gateway, const RenderedPrompt& prompt, double temperature,
                        std::size_t sample_index) {
  return gateway.complete(make_request(prompt, gateway.model(), temperature, sample_index));
}

void write_scripted_reply(const fs::path& directory, const ChatRequest& request, const std::string& reply) {
  fs::create_directories(directory);
  const std::string key = request_key(request);
  nlohmann::ordered_json doc;
  doc["key"] = key;
  doc["model"] = request.model;
  doc["sample_index"] = request.sample_index;
  doc["reply"] = reply;
  const fs::path target = directory / (key + ".json");
  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id();
  const fs::path temp = target.string() + suffix.str();
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << "\n";
    if (!out) throw GatewayError("cannot write cache entry " + temp.string());
  }
  fs::rename(temp, target);
}

// -- ScriptedGateway ----------------------------------------------------------

ScriptedGateway::ScriptedGateway(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw ConfigError("stub directory not found: " + directory.string());
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    try {
      auto doc = nlohmann::json::parse(in);
      keyed_[doc.at("key").get<std::string>()] = doc.at("reply").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad stub record " + entry.path().string() + ": " + e.what());
    }
  }
}

void ScriptedGateway::add_reply(const std::string& key, std::string reply) {
  std::lock_guard lock(mutex_);
  keyed_[key] = std::move(reply);
}

void ScriptedGateway::enqueue(std::string reply) {
  std::lock_guard lock(mutex_);
  queue_.push_back({false, std::move(reply)});
}

void ScriptedGateway::enqueue_failure(std::string message) {
  std::lock_guard lock(mutex_);
  queue_.push_back({true, std::move(message)});
}

void ScriptedGateway::set_responder(Responder responder) {
  std::lock_guard lock(mutex_);
  responder_ = std::move(responder);
}

std::string ScriptedGateway::complete(const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  log_.push_back(request);
  if (!keyed_.empty()) {
    auto it = keyed_.find(request_key(request));
    if (it != keyed_.end()) return it->second;
  }
  if (!queue_.empty()) {
    Queued next = std::move(queue_.front());
    queue_.pop_front();
    if (next.failure) throw GatewayError(next.text);
    return next.text;
  }
  if (responder_) {
    if (auto reply = responder_(request)) return *reply;
  }
  throw GatewayError("no scripted reply for request " + request_key(request));
}

std::size_t ScriptedGateway::calls() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

std::vector<ChatRequest> ScriptedGateway::requests() const {
  std::lock_guard lock(mutex_);
  return log_;
}

}  // namespace tracefix
