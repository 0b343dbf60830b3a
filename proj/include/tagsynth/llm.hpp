#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace tagsynth {

enum class AgentRole { Manager, Perception, Enhancement, Evaluation, Goal };

std::string_view to_string(AgentRole role);
std::optional<AgentRole> parse_role(std::string_view text);

enum class ResponseContract { FreeText, Json };

struct ChatRequest {
  AgentRole role = AgentRole::Manager;
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  int max_tokens = 4096;
  ResponseContract contract = ResponseContract::FreeText;

  void validate() const;  // throws ValidationError
};

/// Default sampling temperature for a role.
double default_temperature(AgentRole role);

struct TokenUsage {
  std::optional<long> prompt_tokens;
  std::optional<long> completion_tokens;
};

struct ChatResponse {
  std::string text;
  TokenUsage usage;
  std::size_t retries = 0;
  double latency_ms = 0.0;
};

/// 16 hex digits of FNV-1a 64 over system prompt, a unit separator and the
/// user prompt.
std::string prompt_hash(const ChatRequest& request);
std::string text_hash(std::string_view text);

class Provider {
 public:
  virtual ~Provider() = default;

  virtual ChatResponse complete(const ChatRequest& request) = 0;
  /// One vector per text, same order. Throws ValidationError on empty text.
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;

  // Replies depend only on inputs (timings may be omitted from audits).
  virtual bool deterministic() const { return false; }
};

struct ProviderConfig {
  std::string endpoint = "http://localhost:8000/v1";
  std::string model = "default";
  std::string embedding_model = "default";
  std::string api_key_env = "TAGSYNTH_API_KEY";
  double timeout_seconds = 120.0;
  std::size_t max_retries = 3;
  double backoff_base_ms = 500.0;
  double backoff_max_ms = 30000.0;
  std::size_t max_inflight = 4;
  std::size_t embedding_batch = 64;

  void validate() const;  // throws ValidationError
};

/// OpenAI-compatible chat/embeddings client. Timeouts, connection failures,
/// 5xx and 429 are retried with exponential backoff and jitter; other 4xx
/// fail at once.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(ProviderConfig config, std::uint64_t jitter_seed = 0);

  ChatResponse complete(const ChatRequest& request) override;
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

  const ProviderConfig& config() const { return config_; }

 private:
  struct Reply {
    nlohmann::json body;
    std::size_t retries = 0;
  };
  Reply post(const std::string& path, const nlohmann::json& body);
  double backoff_ms(std::size_t attempt);

  ProviderConfig config_;
  std::string scheme_host_port_;
  std::string base_path_;
  std::mutex rng_mutex_;
  std::uint64_t rng_state_;
};

/// Seeded feature-hashing embedding: nonnegative token counts hashed into
/// `dim` buckets, L2-normalized. Throws ValidationError on empty text.
std::vector<double> hash_embedding(std::string_view text, std::uint64_t seed, std::size_t dim = 64);

/// Replays replies from a JSON script. Lookup order for a call: the key
/// "<Role>:<prompt hash>", then "<Role>#<n>" (n-th call of that role, from 1),
/// then "<n>" (n-th call overall, from 1), then "<Role>", then "*". A value is
/// a string, any other JSON value (sent as its compact dump), or
/// {"sequence": [...]} whose elements are used one per matching call with
/// the last one repeating.
class MockProvider : public Provider {
 public:
  explicit MockProvider(nlohmann::json script, std::uint64_t seed = 0, std::size_t dimension = 64);
  static MockProvider from_file(const std::filesystem::path& path, std::uint64_t seed = 0,
                                std::size_t dimension = 64);

  ChatResponse complete(const ChatRequest& request) override;
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
  bool deterministic() const override { return true; }

  std::size_t calls() const { return calls_; }

 private:
  nlohmann::json script_;
  std::uint64_t seed_;
  std::size_t dimension_;
  std::size_t calls_ = 0;
  std::map<AgentRole, std::size_t> role_calls_;
  std::map<std::string, std::size_t> key_uses_;
};

enum class OutputSchema { GeneratedNodes, QualityScores, ModeDecision, GoalDecision };

std::string_view to_string(OutputSchema schema);

/// First balanced JSON object or array in `text` (code fences and
/// surrounding prose tolerated), or nullopt.
std::optional<nlohmann::json> extract_json(std::string_view text);

/// Parses `text` against the schema and returns the normalized value:
///  GeneratedNodes -> {"nodes": [{"node_id", "label", "text", "neighbors", "mask"}...],
///                     "invalid": [{"index", "reason"}...]}
///  QualityScores  -> {"scores": [{"node_id", "score", "reason"?}...], "summary"?}
///  ModeDecision   -> {"mode": "semantic"|"topological", "reason"?}
///  GoalDecision   -> {"goal_reached": bool, "reason"?}
/// Throws SchemaError describing the first problem.
nlohmann::json parse_structured(std::string_view text, OutputSchema schema);

struct StructuredReply {
  nlohmann::json value;
  std::string raw;
  bool repaired = false;
};

/// Sends the request; on a parse failure re-asks once with a repair prompt,
/// then throws StructuredOutputError carrying the last raw reply.
StructuredReply complete_structured(Provider& provider, ChatRequest request, OutputSchema schema);

/// Append-only JSON-lines trail.
class AuditLog {
 public:
  void record(nlohmann::json entry);
  const std::vector<nlohmann::json>& entries() const { return entries_; }
  std::string to_jsonl() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::mutex mutex_;
  std::vector<nlohmann::json> entries_;
};

/// Forwards to `inner` and records every call: role, prompt hash, reply hash,
/// retries, token usage, and latency unless the inner provider is
/// deterministic.
class AuditedProvider : public Provider {
 public:
  AuditedProvider(Provider& inner, AuditLog& log) : inner_(inner), log_(log) {}

  ChatResponse complete(const ChatRequest& request) override;
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
  bool deterministic() const override { return inner_.deterministic(); }

 private:
  Provider& inner_;
  AuditLog& log_;
};

}  // namespace tagsynth
