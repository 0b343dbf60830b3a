#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "tagsynth/error.hpp"
#include "tagsynth/graph.hpp"
#include "tagsynth/llm.hpp"

namespace tagsynth {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<AgentRole, std::string_view>, 5> kRoles{{
    {AgentRole::Manager, "Manager"},
    {AgentRole::Perception, "Perception"},
    {AgentRole::Enhancement, "Enhancement"},
    {AgentRole::Evaluation, "Evaluation"},
    {AgentRole::Goal, "Goal"},
}};

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::string_view to_string(AgentRole role) {
  for (const auto& [r, name] : kRoles)
    if (r == role) return name;
  return "Unknown";
}

std::optional<AgentRole> parse_role(std::string_view text) {
  for (const auto& [r, name] : kRoles)
    if (name == text) return r;
  return std::nullopt;
}

void ChatRequest::validate() const {
  if (system_prompt.empty() || user_prompt.empty()) throw ValidationError("chat prompts must be nonempty");
  if (!(temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
  if (max_tokens <= 0) throw ValidationError("max_tokens must be positive");
}

double default_temperature(AgentRole role) { return role == AgentRole::Enhancement ? 0.7 : 0.0; }

std::string prompt_hash(const ChatRequest& request) {
  std::uint64_t h = fnv1a(request.system_prompt);
  h = fnv1a("\x1f", h);
  return hex16(fnv1a(request.user_prompt, h));
}

std::string text_hash(std::string_view text) { return hex16(fnv1a(text)); }

std::vector<double> hash_embedding(std::string_view text, std::uint64_t seed, std::size_t dim) {
  if (text.empty()) throw ValidationError("cannot embed an empty text");
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
  std::vector<double> v(dim, 0.0);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = mix(fnv1a(token) ^ mix(seed + 0x632be59bd9b4e019ULL));
    v[h % dim] += 1.0;
    token.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80)
      token.push_back(static_cast<char>(std::tolower(c)));
    else
      flush();
  }
  flush();
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm == 0.0) {
    // Punctuation-only text: fall back to hashing the raw bytes.
    v[mix(fnv1a(text) ^ seed) % dim] = 1.0;
    norm = 1.0;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

MockProvider::MockProvider(json script, std::uint64_t seed, std::size_t dimension)
    : script_(std::move(script)), seed_(seed), dimension_(dimension) {
  if (!script_.is_object()) throw SchemaError("mock script: expected a JSON object");
}

MockProvider MockProvider::from_file(const std::filesystem::path& path, std::uint64_t seed, std::size_t dimension) {
  try {
    return MockProvider(read_json_file(path), seed, dimension);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

ChatResponse MockProvider::complete(const ChatRequest& request) {
  request.validate();
  ++calls_;
  const std::size_t role_call = ++role_calls_[request.role];
  const std::string role(to_string(request.role));
  const std::string keys[] = {role + ":" + prompt_hash(request), role + "#" + std::to_string(role_call),
                              std::to_string(calls_), role, "*"};
  for (const auto& key : keys) {
    if (!script_.contains(key)) continue;
    const json& value = script_[key];
    const std::size_t use = key_uses_[key]++;
    const bool sequence = value.is_object() && value.size() == 1 && value.contains("sequence") &&
                          value["sequence"].is_array() && !value["sequence"].empty();
    const json& chosen = sequence ? value["sequence"][std::min(use, value["sequence"].size() - 1)] : value;
    ChatResponse out;
    out.text = chosen.is_string() ? chosen.get<std::string>() : chosen.dump();
    return out;
  }
  throw PermanentProviderError("mock script has no reply for " + role + " call " + std::to_string(role_call) +
                               " (prompt hash " + prompt_hash(request) + ")");
}

std::vector<std::vector<double>> MockProvider::embed(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hash_embedding(t, seed_, dimension_));
  return out;
}

void AuditLog::record(json entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
}

std::string AuditLog::to_jsonl() const {
  std::string out;
  for (const auto& e : entries_) {
    out += e.dump();
    out += '\n';
  }
  return out;
}

void AuditLog::write(const std::filesystem::path& path) const { write_file_atomic(path, to_jsonl()); }

ChatResponse AuditedProvider::complete(const ChatRequest& request) {
  json entry{{"event", "call"},
             {"role", std::string(to_string(request.role))},
             {"prompt_hash", prompt_hash(request)},
             {"temperature", request.temperature}};
  try {
    ChatResponse r = inner_.complete(request);
    entry["reply_hash"] = text_hash(r.text);
    entry["retries"] = r.retries;
    if (r.usage.prompt_tokens) entry["prompt_tokens"] = *r.usage.prompt_tokens;
    if (r.usage.completion_tokens) entry["completion_tokens"] = *r.usage.completion_tokens;
    if (!inner_.deterministic()) entry["latency_ms"] = r.latency_ms;
    log_.record(std::move(entry));
    return r;
  } catch (const Error& e) {
    entry["error"] = e.what();
    log_.record(std::move(entry));
    throw;
  }
}

std::vector<std::vector<double>> AuditedProvider::embed(std::span<const std::string> texts) {
  auto out = inner_.embed(texts);
  log_.record(json{{"event", "embed"}, {"count", texts.size()}, {"dimension", out.empty() ? 0 : out[0].size()}});
  return out;
}

}  // namespace tagsynth
