#include <set>

#include "tagsynth/config.hpp"
#include "tagsynth/error.hpp"

namespace tagsynth {

using nlohmann::json;

namespace {

// Reads known keys from one object and rejects whatever is left over.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ValidationError(where() + "must be a JSON object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    const json& v = doc_[key];
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ValidationError(where(key) + "expected a boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ValidationError(where(key) + "expected a string");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ValidationError(where(key) + "expected a nonnegative integer");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!v.is_number()) throw ValidationError(where(key) + "expected a number");
      }
      out = v.get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(where(key) + e.what());
    }
  }

  void read(const char* key, Weights& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    const json& v = doc_[key];
    if (!v.is_array() || v.size() != 3) throw ValidationError(where(key) + "expected an array of 3 numbers");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!v[i].is_number()) throw ValidationError(where(key) + "expected an array of 3 numbers");
      out[i] = v[i].get<double>();
    }
  }

  void read(const char* key, std::optional<std::size_t>& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    if (doc_[key].is_null()) {
      out.reset();
      return;
    }
    std::size_t v = 0;
    read(key, v);
    out = v;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return doc_.contains(key) ? &doc_[key] : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : doc_.items())
      if (!seen_.count(k)) throw ValidationError("unknown config key \"" + prefix() + k + "\"");
  }

 private:
  std::string prefix() const { return path_.empty() ? "" : path_ + "."; }
  std::string where(const char* key = nullptr) const {
    if (!key) return path_.empty() ? "config: " : "config \"" + path_ + "\": ";
    return "config \"" + prefix() + key + "\": ";
  }

  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
  synthesis.validate();
  limiter.validate();
  provider.validate();
  static const std::set<std::string> levels{"trace", "debug", "info", "warn", "error", "off"};
  if (!levels.count(log_level)) throw ValidationError("log_level must be one of trace|debug|info|warn|error|off");
}

RunConfig merge_run_config(RunConfig c, const json& doc) {
  Section top(doc, "");
  top.read("seed", c.seed);
  top.read("log_level", c.log_level);

  if (const json* s = top.child("synthesis")) {
    Section sec(*s, "synthesis");
    auto& x = c.synthesis;
    sec.read("capsule_size", x.capsule_size);
    sec.read("new_node_fraction", x.new_node_fraction);
    sec.read("theta_semantic", x.theta_semantic);
    sec.read("theta_topological", x.theta_topological);
    sec.read("edge_threshold", x.edge_threshold);
    sec.read("tau0", x.tau0);
    sec.read("zeta", x.zeta);
    sec.read("epsilon", x.epsilon);
    sec.read("window", x.window);
    sec.read("eta", x.eta);
    sec.read("lambda_init", x.lambda_init);
    sec.read("max_iterations", x.max_iterations);
    sec.read("score_min", x.score_min);
    sec.read("score_max", x.score_max);
    sec.read("new_node_edges", x.new_node_edges);
    sec.read("perception_narrative", x.perception_narrative);
    sec.read("imbalance_fallback", x.imbalance_fallback);
    sec.read("min_text_length", x.min_text_length);
    sec.read("embedding_dimension", x.embedding_dimension);
    sec.finish();
  }
  if (const json* s = top.child("perception")) {
    Section sec(*s, "perception");
    auto& p = c.synthesis.perception;
    sec.read("mu", p.mu);
    sec.read("teleport_alpha", p.teleport_alpha);
    sec.read("ppr_tolerance", p.ppr_tolerance);
    sec.read("ppr_max_iters", p.ppr_max_iters);
    sec.read("top_k_percent", p.top_k_percent);
    sec.read("beta", p.beta);
    sec.read("seed_min_community_size", p.seed_min_community_size);
    sec.finish();
  }
  if (const json* s = top.child("modularity")) {
    Section sec(*s, "modularity");
    auto& m = c.synthesis.modularity;
    sec.read("gamma", m.gamma);
    std::string term = m.semantic_term == SemanticTerm::Similarity ? "similarity" : "distance";
    sec.read("semantic_term", term);
    if (term == "similarity")
      m.semantic_term = SemanticTerm::Similarity;
    else if (term == "distance")
      m.semantic_term = SemanticTerm::Distance;
    else
      throw ValidationError("config \"modularity.semantic_term\": expected \"similarity\" or \"distance\"");
    sec.read("exact_normalizer_limit", m.exact_normalizer_limit);
    sec.read("normalizer_sample_pairs", m.normalizer_sample_pairs);
    sec.finish();
  }
  if (const json* s = top.child("limiter")) {
    Section sec(*s, "limiter");
    auto& l = c.limiter;
    sec.read("alpha", l.alpha);
    sec.read("epsilon", l.epsilon);
    sec.read("lambda1", l.lambda1);
    sec.read("lambda2", l.lambda2);
    sec.read("lambda3", l.lambda3);
    sec.read("max_repair_swaps", l.max_repair_swaps);
    sec.read("repair_candidates", l.repair_candidates);
    sec.finish();
  }
  if (const json* s = top.child("provider")) {
    Section sec(*s, "provider");
    auto& p = c.provider;
    sec.read("endpoint", p.endpoint);
    sec.read("model", p.model);
    sec.read("embedding_model", p.embedding_model);
    sec.read("api_key_env", p.api_key_env);
    sec.read("timeout_seconds", p.timeout_seconds);
    sec.read("max_retries", p.max_retries);
    sec.read("backoff_base_ms", p.backoff_base_ms);
    sec.read("backoff_max_ms", p.backoff_max_ms);
    sec.read("max_inflight", p.max_inflight);
    sec.read("embedding_batch", p.embedding_batch);
    sec.finish();
  }
  top.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = read_json_file(path);
  } catch (const SchemaError& e) {
    throw ValidationError(e.what());
  }
  try {
    return merge_run_config({}, doc);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

json to_json(const RunConfig& c) {
  json synth = to_json(c.synthesis);
  json perception = synth["perception"], modularity = synth["modularity"];
  synth.erase("perception");
  synth.erase("modularity");
  const auto& l = c.limiter;
  const auto& p = c.provider;
  return json{{"seed", c.seed},
              {"log_level", c.log_level},
              {"synthesis", synth},
              {"perception", perception},
              {"modularity", modularity},
              {"limiter",
               json{{"alpha", l.alpha},
                    {"epsilon", l.epsilon},
                    {"lambda1", l.lambda1},
                    {"lambda2", l.lambda2},
                    {"lambda3", l.lambda3},
                    {"max_repair_swaps", l.max_repair_swaps ? json(*l.max_repair_swaps) : json(nullptr)},
                    {"repair_candidates", l.repair_candidates}}},
              {"provider",
               json{{"endpoint", p.endpoint},
                    {"model", p.model},
                    {"embedding_model", p.embedding_model},
                    {"api_key_env", p.api_key_env},
                    {"timeout_seconds", p.timeout_seconds},
                    {"max_retries", p.max_retries},
                    {"backoff_base_ms", p.backoff_base_ms},
                    {"backoff_max_ms", p.backoff_max_ms},
                    {"max_inflight", p.max_inflight},
                    {"embedding_batch", p.embedding_batch}}}};
}

}  // namespace tagsynth
