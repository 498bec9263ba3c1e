#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tracefix/error.hpp"
#include "tracefix/prompts.hpp"

namespace tracefix {

class GatewayError : public Error {
 public:
  using Error::Error;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::size_t sample_index = 0;
};

ChatRequest make_request(const RenderedPrompt& prompt, std::string model, double temperature,
                         std::size_t sample_index = 0);

/// Hex SHA-256 over (model, messages, temperature, sample_index). Used as
/// the disk-cache key and as the lookup key of scripted replies.
std::string request_key(const ChatRequest& request);

std::string sha256_hex(std::string_view data);

/// Chat-completion provider. Implementations must be thread-safe.
class ModelGateway {
 public:
  virtual ~ModelGateway() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

struct GatewayConfig {
  std::string endpoint;
  std::string model = "default";
  double temperature = 0.7;
  int max_retries = 3;
  std::chrono::milliseconds timeout{60'000};
  std::filesystem::path cache_dir;
  double requests_per_minute = 0.0;  // <= 0 disables rate limiting
  std::chrono::milliseconds backoff_base{500};

  /// Throws ConfigError on negative temperature or retries.
  void validate() const;
};

/// POSTs to an OpenAI-style /chat/completions endpoint. The bearer token is
/// read from GATEWAY_API_KEY at construction.
class HttpGateway : public ModelGateway {
 public:
  explicit HttpGateway(GatewayConfig config);
  std::string complete(const ChatRequest& request) override;

 private:
  GatewayConfig config_;
  std::string scheme_host_;
  std::string path_;
  std::string api_key_;
};

class TokenBucket {
 public:
  explicit TokenBucket(double per_minute, double burst = 1.0);
  void acquire();

 private:
  double rate_per_second_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mutex_;
};

/// Disk cache, exponential-backoff retries and a token-bucket rate limit in
/// front of an upstream gateway. A cache hit performs no upstream call;
/// unreadable cache entries count as misses. Entries are written to a
/// temporary file and renamed into place.
class CachingGateway : public ModelGateway {
 public:
  CachingGateway(ModelGateway& upstream, GatewayConfig config);

  std::string complete(const ChatRequest& request) override;

  std::size_t upstream_calls() const { return upstream_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }
  const std::string& model() const { return config_.model; }
  std::filesystem::path entry_path(const ChatRequest& request) const;

 private:
  std::optional<std::string> lookup(const ChatRequest& request, const std::string& key) const;
  void store(const ChatRequest& request, const std::string& reply) const;

  ModelGateway& upstream_;
  GatewayConfig config_;
  std::optional<TokenBucket> bucket_;
  std::atomic<std::size_t> upstream_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

std::string cached_call(CachingGateway& gateway, const RenderedPrompt& prompt, double temperature,
                        std::size_t sample_index);

/// Offline gateway. Replies are looked up by request_key(), then taken from
/// a FIFO queue, then from an optional responder; otherwise the call fails
/// with GatewayError. A directory of cache entries written by
/// CachingGateway loads as keyed replies.
class ScriptedGateway : public ModelGateway {
 public:
  using Responder = std::function<std::optional<std::string>(const ChatRequest&)>;

  ScriptedGateway() = default;
  explicit ScriptedGateway(const std::filesystem::path& directory);

  void add_reply(const std::string& key, std::string reply);
  void enqueue(std::string reply);
  void enqueue_failure(std::string message);
  void set_responder(Responder responder);

  std::string complete(const ChatRequest& request) override;

  std::size_t calls() const;
  std::vector<ChatRequest> requests() const;

 private:
  struct Queued {
    bool failure;
    std::string text;
  };
  mutable std::mutex mutex_;
  std::map<std::string, std::string> keyed_;
  std::deque<Queued> queue_;
  Responder responder_;
  std::vector<ChatRequest> log_;
};

/// Writes a keyed reply in the cache-entry format read by ScriptedGateway.
void write_scripted_reply(const std::filesystem::path& directory, const ChatRequest& request,
                          const std::string& reply);

}  // namespace tracefix
