#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>

#include <spdlog/spdlog.h>

#include "tagsynth/error.hpp"
#include "tagsynth/llm.hpp"

namespace tagsynth {

using nlohmann::json;

void ProviderConfig::validate() const {
  if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0)
    throw ValidationError("provider endpoint must start with http:// or https://");
  if (!(timeout_seconds > 0.0)) throw ValidationError("provider timeout_seconds must be > 0");
  if (!(backoff_base_ms >= 0.0)) throw ValidationError("provider backoff_base_ms must be >= 0");
  if (max_inflight == 0) throw ValidationError("provider max_inflight must be >= 1");
  if (embedding_batch == 0) throw ValidationError("provider embedding_batch must be >= 1");
}

HttpProvider::HttpProvider(ProviderConfig config, std::uint64_t jitter_seed)
    : config_(std::move(config)), rng_state_(jitter_seed ^ 0x9e3779b97f4a7c15ULL) {
  config_.validate();
  const auto scheme_end = config_.endpoint.find("://") + 3;
  const auto path_start = config_.endpoint.find('/', scheme_end);
  scheme_host_port_ = config_.endpoint.substr(0, path_start);
  base_path_ = path_start == std::string::npos ? "" : config_.endpoint.substr(path_start);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

double HttpProvider::backoff_ms(std::size_t attempt) {
  double unit;
  {
    std::lock_guard lock(rng_mutex_);
    // splitmix64 step
    std::uint64_t z = (rng_state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    unit = static_cast<double>(z >> 11) * 0x1.0p-53;
  }
  const double base = std::min(config_.backoff_max_ms, config_.backoff_base_ms * std::pow(2.0, static_cast<double>(attempt)));
  return base * (0.5 + 0.5 * unit);
}

HttpProvider::Reply HttpProvider::post(const std::string& path, const json& body) {
  httplib::Client client(scheme_host_port_);
  const auto seconds = static_cast<time_t>(config_.timeout_seconds);
  const auto micros = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);
  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  const std::string payload = body.dump();
  const std::string url = base_path_ + path;
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double wait = backoff_ms(attempt - 1);
      spdlog::warn("retrying {} (attempt {}/{}) after {:.0f} ms: {}", url, attempt + 1, config_.max_retries + 1,
                   wait, last_error);
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(wait));
    }
    auto result = client.Post(url, headers, payload, "application/json");
    if (!result) {
      last_error = "transport failure: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status == 429 || status >= 500) {
      last_error = "HTTP " + std::to_string(status);
      continue;
    }
    if (status < 200 || status >= 300)
      throw PermanentProviderError("HTTP " + std::to_string(status) + " from " + url + ": " +
                                   result->body.substr(0, 500));
    try {
      return Reply{json::parse(result->body), attempt};
    } catch (const json::parse_error& e) {
      throw PermanentProviderError("malformed JSON body from " + url + ": " + e.what());
    }
  }
  throw TransportError("giving up on " + url + " after " + std::to_string(config_.max_retries + 1) +
                       " attempts: " + last_error);
}

ChatResponse HttpProvider::complete(const ChatRequest& request) {
  request.validate();
  json body{{"model", config_.model},
            {"messages", json::array({json{{"role", "system"}, {"content", request.system_prompt}},
                                      json{{"role", "user"}, {"content", request.user_prompt}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  if (request.contract == ResponseContract::Json) body["response_format"] = json{{"type", "json_object"}};

  const auto start = std::chrono::steady_clock::now();
  auto reply = post("/chat/completions", body);
  ChatResponse out;
  out.retries = reply.retries;
  out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  try {
    out.text = reply.body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw PermanentProviderError(std::string("chat reply lacks choices[0].message.content: ") + e.what());
  }
  if (reply.body.contains("usage") && reply.body["usage"].is_object()) {
    const auto& u = reply.body["usage"];
    if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_integer())
      out.usage.prompt_tokens = u["prompt_tokens"].get<long>();
    if (u.contains("completion_tokens") && u["completion_tokens"].is_number_integer())
      out.usage.completion_tokens = u["completion_tokens"].get<long>();
  }
  return out;
}

std::vector<std::vector<double>> HttpProvider::embed(std::span<const std::string> texts) {
  for (const auto& t : texts)
    if (t.empty()) throw ValidationError("cannot embed an empty text");
  std::vector<std::vector<double>> out(texts.size());
  const std::size_t batch = config_.embedding_batch;
  const std::size_t batches = (texts.size() + batch - 1) / batch;

  auto run = [&](std::size_t b) {
    const std::size_t lo = b * batch, hi = std::min(texts.size(), lo + batch);
    json input = json::array();
    for (std::size_t i = lo; i < hi; ++i) input.push_back(texts[i]);
    auto reply = post("/embeddings", json{{"model", config_.embedding_model}, {"input", std::move(input)}});
    try {
      const auto& data = reply.body.at("data");
      if (data.size() != hi - lo) throw PermanentProviderError("embedding reply has wrong number of rows");
      for (std::size_t k = 0; k < data.size(); ++k) {
        const std::size_t slot = data[k].contains("index") ? data[k]["index"].get<std::size_t>() : k;
        if (slot >= hi - lo) throw PermanentProviderError("embedding reply index out of range");
        out[lo + slot] = data[k].at("embedding").get<std::vector<double>>();
      }
    } catch (const json::exception& e) {
      throw PermanentProviderError(std::string("embedding reply lacks data[i].embedding: ") + e.what());
    }
  };

  // At most max_inflight batches in flight.
  for (std::size_t start = 0; start < batches; start += config_.max_inflight) {
    std::vector<std::future<void>> inflight;
    for (std::size_t b = start; b < std::min(batches, start + config_.max_inflight); ++b)
      inflight.push_back(std::async(std::launch::async, run, b));
    std::exception_ptr first;
    for (auto& f : inflight) {
      try {
        f.get();
      } catch (...) {
        if (!first) first = std::current_exception();
      }
    }
    if (first) std::rethrow_exception(first);
  }
  return out;
}

}  // namespace tagsynth
