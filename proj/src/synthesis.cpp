#include "tagsynth/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "tagsynth/analysis.hpp"
#include "tagsynth/error.hpp"

namespace tagsynth {

using nlohmann::json;

namespace {

bool finite_nonnegative(const Weights& w) {
  return std::all_of(w.begin(), w.end(), [](double x) { return std::isfinite(x) && x >= 0.0; });
}

json weights_json(const Weights& w) { return json::array({w[0], w[1], w[2]}); }

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string trimmed(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string_view::npos ? std::string{} : std::string(s.substr(b, e - b + 1));
}

// Compact report view for prompts other than the Manager's.
json report_digest(const EnvironmentReport& r) {
  json global = to_json(r.global);
  global.erase("degree_distribution");
  global.erase("degree_histogram");
  json classes = json::object();
  for (const auto& [label, c] : r.classes)
    classes[std::to_string(label)] =
        json{{"count", c.count}, {"internal_edges", c.internal_edges}, {"avg_degree", c.avg_degree}};
  return json{{"Graph", std::move(global)}, {"communities", r.communities.size()}, {"ClassStatistics", std::move(classes)}};
}

ChatRequest make_request(AgentRole role, std::string system, std::string user) {
  ChatRequest r;
  r.role = role;
  r.system_prompt = std::move(system);
  r.user_prompt = std::move(user);
  r.temperature = default_temperature(role);
  return r;
}

const char* kManagerSystem =
    "You are the Manager agent of a graph data synthesis loop for a text-attributed graph. "
    "Each round you read an environment report and choose one enhancement mode. "
    "semantic: enrich a cohesive but small community with topically consistent nodes. "
    "topological: add nodes of under-represented classes and strengthen sparse regions. "
    "Answer with JSON only.";

const char* kEnhancementSystem =
    "You are the Enhancement agent of a graph data synthesis loop. You write new nodes for a "
    "text-attributed graph of scientific papers: each node has a title and abstract, an integer class "
    "label and the ids of existing nodes it should link to. Stay consistent with the knowledge "
    "subgraph you are given. Answer with JSON only.";

const char* kEvaluationSystem =
    "You are the Evaluation agent of a graph data synthesis loop. Score each generated node from 0 to 10 "
    "on two dimensions. Semantic Coherence: the text is meaningful, domain-consistent and fits its label "
    "and neighbors. Structural Integrity: its edges form logical connections that keep the graph's "
    "topological patterns while filling structural gaps. Answer with JSON only.";

const char* kGoalSystem =
    "You judge whether a graph data synthesis loop has reached its goal: the current graph should keep "
    "the initial graph's structure and semantics while improving balance and coverage. Answer with JSON only.";

const char* kPerceptionSystem =
    "You are the Perception agent of a graph data synthesis loop. Summarize the environment report in a "
    "few paragraphs for the Manager agent: size, connectivity, community structure, class balance and "
    "where enhancement would help most.";

}  // namespace

// ---------------------------------------------------------------------------
// Config

void SynthesisConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("synthesis config: " + what); };
  if (capsule_size == 0) fail("capsule_size must be >= 1");
  if (!(new_node_fraction > 0.0 && new_node_fraction <= 1.0)) fail("new_node_fraction must be in (0, 1]");
  if (!finite_nonnegative(theta_semantic) || !finite_nonnegative(theta_topological))
    fail("theta weights must be finite and nonnegative");
  if (!(edge_threshold >= 0.0 && edge_threshold <= 1.0)) fail("edge_threshold must be in [0, 1]");
  if (!(score_min < score_max)) fail("score_min must be below score_max");
  if (!(tau0 >= score_min && tau0 <= score_max)) fail("tau0 must lie within the score scale");
  if (!(zeta >= 0.0) || !std::isfinite(zeta)) fail("zeta must be >= 0");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
  if (window == 0) fail("window must be >= 1");
  if (!(eta >= 0.0) || !std::isfinite(eta)) fail("eta must be >= 0");
  if (!finite_nonnegative(lambda_init) ||
      std::abs(lambda_init[0] + lambda_init[1] + lambda_init[2] - 1.0) > 1e-9)
    fail("lambda_init must lie on the probability simplex");
  if (max_iterations == 0) fail("max_iterations must be >= 1");
  if (embedding_dimension == 0) fail("embedding_dimension must be >= 1");
  if (!(imbalance_fallback >= 1.0)) fail("imbalance_fallback must be >= 1");
  if (!(modularity.gamma >= 0.0 && modularity.gamma <= 1.0)) fail("modularity gamma must be in [0, 1]");
  perception.validate();
}

json to_json(const SynthesisConfig& c) {
  const auto& p = c.perception;
  return json{
      {"capsule_size", c.capsule_size},
      {"new_node_fraction", c.new_node_fraction},
      {"theta_semantic", weights_json(c.theta_semantic)},
      {"theta_topological", weights_json(c.theta_topological)},
      {"edge_threshold", c.edge_threshold},
      {"tau0", c.tau0},
      {"zeta", c.zeta},
      {"epsilon", c.epsilon},
      {"window", c.window},
      {"eta", c.eta},
      {"lambda_init", weights_json(c.lambda_init)},
      {"max_iterations", c.max_iterations},
      {"score_min", c.score_min},
      {"score_max", c.score_max},
      {"new_node_edges", c.new_node_edges},
      {"perception_narrative", c.perception_narrative},
      {"imbalance_fallback", c.imbalance_fallback},
      {"min_text_length", c.min_text_length},
      {"embedding_dimension", c.embedding_dimension},
      {"perception",
       json{{"mu", p.mu},
            {"teleport_alpha", p.teleport_alpha},
            {"ppr_tolerance", p.ppr_tolerance},
            {"ppr_max_iters", p.ppr_max_iters},
            {"top_k_percent", p.top_k_percent},
            {"beta", p.beta},
            {"seed_min_community_size", p.seed_min_community_size}}},
      {"modularity",
       json{{"gamma", c.modularity.gamma},
            {"semantic_term", c.modularity.semantic_term == SemanticTerm::Similarity ? "similarity" : "distance"},
            {"exact_normalizer_limit", c.modularity.exact_normalizer_limit},
            {"normalizer_sample_pairs", c.modularity.normalizer_sample_pairs}}}};
}

// ---------------------------------------------------------------------------
// Manager

EnhancementMode fallback_mode(const EnvironmentReport& report, double threshold) {
  std::map<int, std::size_t> counts;
  for (const auto& [label, n] : report.global.label_distribution)
    if (n > 0) counts[label] = n;
  if (counts.empty()) return EnhancementMode::Semantic;
  double worst = 1.0;
  for (const auto& [label, phi] : class_imbalance(counts)) worst = std::max(worst, phi);
  return worst > threshold ? EnhancementMode::Topological : EnhancementMode::Semantic;
}

std::string manager_prompt(const EnvironmentReport& report, const Weights& lambda) {
  return "Environment report:\n" + to_json(report).dump(2) +
         "\n\nCurrent objective priorities (semantic coherence, structural integrity, class balance): [" +
         std::to_string(lambda[0]) + ", " + std::to_string(lambda[1]) + ", " + std::to_string(lambda[2]) +
         "]\n\nChoose the enhancement mode for this round. Reply with a JSON object "
         "{\"mode\": \"semantic\" or \"topological\", \"reason\": \"one sentence\"}.";
}

ModeChoice select_mode(const EnvironmentReport& report, const Weights& lambda, Provider& provider,
                       const SynthesisConfig& config) {
  ModeChoice choice;
  try {
    auto reply = complete_structured(provider, make_request(AgentRole::Manager, kManagerSystem, manager_prompt(report, lambda)),
                                     OutputSchema::ModeDecision);
    choice.mode = *parse_mode(reply.value.at("mode").get<std::string>());
    choice.reason = reply.value.value("reason", std::string{});
  } catch (const StructuredOutputError& e) {
    choice.mode = fallback_mode(report, config.imbalance_fallback);
    choice.fallback = true;
    choice.reason = e.what();
    spdlog::warn("manager reply unusable, falling back to {} mode", to_string(choice.mode));
  }
  return choice;
}

Weights project_to_simplex(const Weights& v) {
  Weights u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, shift = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) shift = t;
  }
  Weights out;
  for (std::size_t i = 0; i < 3; ++i) out[i] = std::max(0.0, v[i] - shift);
  const double sum = out[0] + out[1] + out[2];
  for (double& x : out) x /= sum;
  return out;
}

Weights update_weights(const Weights& lambda, const Weights& gradient, double eta) {
  Weights step;
  for (std::size_t i = 0; i < 3; ++i) step[i] = lambda[i] + eta * gradient[i];
  if (!std::all_of(step.begin(), step.end(), [](double x) { return std::isfinite(x); })) return lambda;
  return project_to_simplex(step);
}

// ---------------------------------------------------------------------------
// Enhancement

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double edge_probability(const EdgeFeatures& f, const Weights& theta) {
  return sigmoid(theta[0] * f.similarity + theta[1] * f.overlap + theta[2] * f.degree_ratio);
}

EdgeFeatures edge_features(std::span<const double> candidate_embedding, std::span<const double> target_embedding,
                           std::span<const NodeIndex> proposed_in_capsule, NodeIndex target,
                           const TextAttributedGraph& g) {
  EdgeFeatures f;
  f.similarity = std::clamp(cosine_similarity(candidate_embedding, target_embedding), 0.0, 1.0);
  if (!proposed_in_capsule.empty()) {
    std::size_t shared = 0;
    for (NodeIndex p : proposed_in_capsule) shared += g.has_edge(target, p) ? 1 : 0;
    f.overlap = static_cast<double>(shared) / static_cast<double>(proposed_in_capsule.size());
  }
  const std::size_t max_degree = g.max_degree();
  f.degree_ratio = max_degree ? static_cast<double>(g.degree(target)) / static_cast<double>(max_degree) : 0.0;
  return f;
}

void propose_edges(GeneratedNode& node, const TextAttributedGraph& g, const KnowledgeCapsule& capsule,
                   const EmbeddingTable& embeddings, const Weights& theta, double threshold) {
  node.probabilities.clear();
  node.kept.clear();
  const std::set<NodeIndex> in_capsule(capsule.nodes.begin(), capsule.nodes.end());
  std::vector<NodeIndex> targets, proposed_in_capsule;
  for (const auto& id : node.proposed) {
    const NodeIndex t = g.index_of(id);
    targets.push_back(t);
    if (in_capsule.count(t)) proposed_in_capsule.push_back(t);
  }
  const auto* self = embeddings.find(node.record.id);
  if (!self) throw ValidationError("no embedding for generated node " + node.record.id);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto* other = embeddings.find(node.proposed[k]);
    if (!other) throw ValidationError("no embedding for node " + node.proposed[k]);
    const auto f = edge_features(*self, *other, proposed_in_capsule, targets[k], g);
    node.probabilities.push_back(edge_probability(f, theta));
  }
  for (std::size_t k = 0; k < targets.size(); ++k)
    if (node.probabilities[k] >= threshold) node.kept.push_back(node.proposed[k]);
  if (node.kept.empty() && !targets.empty()) {
    const auto best = std::max_element(node.probabilities.begin(), node.probabilities.end()) - node.probabilities.begin();
    node.kept.push_back(node.proposed[static_cast<std::size_t>(best)]);
  }
}

std::size_t requested_node_count(std::size_t capsule_size, double fraction) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(capsule_size) - 1e-9));
}

std::string enhancement_prompt(const GenerationRequest& request, std::size_t count) {
  const auto& g = *request.graph;
  std::string directive =
      request.mode == EnhancementMode::Semantic
          ? "Mode: semantic enhancement. Write nodes that enrich the topic of the seed community ("
          : "Mode: topological enhancement. Write nodes that strengthen the under-represented class of the seed (";
  directive += request.capsule->seed_descriptor +
               "). Link each node to existing nodes it would plausibly cite or be cited by, preferring nodes of the "
               "knowledge subgraph.";
  std::string out = directive + "\n\nGraph summary:\n" + report_digest(*request.report).dump(2) +
                    "\n\nKnowledge subgraph:\n" + to_json(g, *request.capsule).dump(2);
  out += "\n\nObjective priorities (semantic coherence, structural integrity, class balance): [" +
         std::to_string(request.lambda[0]) + ", " + std::to_string(request.lambda[1]) + ", " +
         std::to_string(request.lambda[2]) + "]";
  if (!request.feedback.empty()) {
    out += "\n\nNodes rejected in the previous round:";
    for (const auto& [id, why] : request.feedback) out += "\n- " + id + ": " + why;
  }
  out += "\n\nGenerate exactly " + std::to_string(count) + " new nodes with node_id values \"new_node " +
         std::to_string(request.first_id) + "\" to \"new_node " + std::to_string(request.first_id + count - 1) +
         "\". Labels are integers from 0 to " + std::to_string(g.class_count() - 1) +
         ". The text holds a title and an abstract (\"Title: ...\\n Abstract: ...\"). neighbors lists node_id "
         "values of existing nodes. Reply with a JSON array of objects with the fields node_id, label, text, "
         "neighbors and mask (\"Train\").";
  return out;
}

GenerationResult generate_nodes(const GenerationRequest& request, const SynthesisConfig& config, Provider& provider) {
  if (!request.graph || !request.capsule || !request.report) throw ValidationError("generation request is incomplete");
  if (request.capsule->nodes.empty()) throw ValidationError("cannot generate from an empty knowledge subgraph");
  const auto& g = *request.graph;
  GenerationResult out;
  out.requested = requested_node_count(request.capsule->size(), config.new_node_fraction);
  auto reply = complete_structured(
      provider, make_request(AgentRole::Enhancement, kEnhancementSystem, enhancement_prompt(request, out.requested)),
      OutputSchema::GeneratedNodes);
  out.repaired = reply.repaired;
  for (const auto& bad : reply.value["invalid"])
    out.dropped.emplace_back("#" + std::to_string(bad["index"].get<std::size_t>()), "schema: " + bad["reason"].get<std::string>());

  std::unordered_set<std::string> batch_ids;
  for (const auto& item : reply.value["nodes"]) batch_ids.insert(item["node_id"].get<std::string>());

  for (const auto& item : reply.value["nodes"]) {
    const std::string id = item["node_id"].get<std::string>();
    auto drop = [&](std::string why) { out.dropped.emplace_back(id, std::move(why)); };
    if (out.nodes.size() == out.requested) {
      drop("over the requested count");
      continue;
    }
    if (g.find(id)) {
      drop("id collision with an existing node");
      continue;
    }
    const int label = item["label"].get<int>();
    if (label < 0 || label >= g.class_count()) {
      drop("label out of range");
      continue;
    }
    const std::string text = item["text"].get<std::string>();
    if (trimmed(text).empty()) {
      drop("empty text");
      continue;
    }
    auto mask = parse_mask(item["mask"].get<std::string>());
    if (!mask) {
      drop("invalid mask");
      continue;
    }
    GeneratedNode node;
    node.record.id = id;
    node.record.label = label;
    node.record.text = text;
    node.record.mask = *mask;
    std::string dangling;
    for (const auto& nb : item["neighbors"]) {
      const std::string n = nb.get<std::string>();
      if (n == id) continue;
      if (g.find(n)) {
        if (std::find(node.proposed.begin(), node.proposed.end(), n) == node.proposed.end()) node.proposed.push_back(n);
      } else if (batch_ids.count(n)) {
        if (config.new_node_edges &&
            std::find(node.new_node_links.begin(), node.new_node_links.end(), n) == node.new_node_links.end())
          node.new_node_links.push_back(n);
      } else {
        dangling = n;
        break;
      }
    }
    if (!dangling.empty()) {
      drop("dangling neighbor " + dangling);
      continue;
    }
    if (node.proposed.empty()) {
      drop("no neighbors in the graph");
      continue;
    }
    out.nodes.push_back(std::move(node));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

std::string evaluation_prompt(const EvaluationRequest& request, std::span<const GeneratedNode> nodes) {
  json generated = json::array();
  for (const auto& n : nodes)
    generated.push_back(json{{"node_id", n.record.id},
                             {"label", n.record.label},
                             {"text", n.record.text},
                             {"neighbors", n.kept},
                             {"mask", std::string(to_string(n.record.mask))}});
  return "Initial graph report:\n" + report_digest(*request.initial).dump(2) + "\n\nCurrent graph report:\n" +
         report_digest(*request.current).dump(2) + "\n\nKnowledge subgraph:\n" +
         to_json(*request.graph, *request.capsule).dump(2) + "\n\nGenerated nodes:\n" + generated.dump(2) +
         "\n\nReply with a JSON object {\"scores\": [{\"node_id\": ..., \"semantic_coherence\": 0-10, "
         "\"structural_integrity\": 0-10, \"reason\": \"...\"}], \"summary\": \"...\"} with one entry per "
         "generated node.";
}

std::string goal_prompt(const EnvironmentReport& initial, const EnvironmentReport& current) {
  return "Initial graph report:\n" + report_digest(initial).dump(2) + "\n\nCurrent graph report:\n" +
         report_digest(current).dump(2) +
         "\n\nHas the synthesis reached its goal? Reply with a JSON object {\"goal_reached\": true or false, "
         "\"reason\": \"one sentence\"}.";
}

QualityAssessment evaluate_nodes(std::vector<GeneratedNode>& nodes, const EvaluationRequest& request,
                                 Provider& provider, const SynthesisConfig& config) {
  if (!request.graph || !request.capsule || !request.initial || !request.current)
    throw ValidationError("evaluation request is incomplete");
  QualityAssessment qa;
  std::vector<GeneratedNode*> survivors;
  std::unordered_set<std::string> seen;
  for (auto& n : nodes) {
    n.score.reset();
    if (n.record.id.empty()) {
      qa.rejected.emplace_back(n.record.id, "schema: empty id");
    } else if (!seen.insert(n.record.id).second) {
      qa.rejected.emplace_back(n.record.id, "duplicate id");
    } else if (trimmed(n.record.text).size() < config.min_text_length) {
      qa.rejected.emplace_back(n.record.id, "degenerate text");
    } else {
      survivors.push_back(&n);
    }
  }
  if (survivors.empty()) {
    qa.goal_reason = "nothing to evaluate";
    return qa;
  }

  std::vector<GeneratedNode> batch;
  for (auto* n : survivors) batch.push_back(*n);
  auto reply = complete_structured(
      provider, make_request(AgentRole::Evaluation, kEvaluationSystem, evaluation_prompt(request, batch)),
      OutputSchema::QualityScores);
  std::map<std::string, double> by_id;
  for (const auto& s : reply.value["scores"]) {
    const auto id = s["node_id"].get<std::string>();
    if (!by_id.count(id)) by_id[id] = s["score"].get<double>();
  }
  double sum = 0.0;
  for (auto* n : survivors) {
    auto it = by_id.find(n->record.id);
    if (it == by_id.end()) {
      qa.rejected.emplace_back(n->record.id, "not scored");
      continue;
    }
    double s = it->second;
    if (s < config.score_min || s > config.score_max) {
      spdlog::warn("score {} for {} outside [{}, {}], clamped", s, n->record.id, config.score_min, config.score_max);
      s = std::clamp(s, config.score_min, config.score_max);
    }
    n->score = s;
    qa.scores.emplace_back(n->record.id, s);
    sum += s;
  }
  if (!qa.scores.empty()) qa.mean = sum / static_cast<double>(qa.scores.size());

  try {
    auto goal = complete_structured(
        provider, make_request(AgentRole::Goal, kGoalSystem, goal_prompt(*request.initial, *request.current)),
        OutputSchema::GoalDecision);
    qa.goal_reached = goal.value["goal_reached"].get<bool>();
    qa.goal_reason = goal.value.value("reason", std::string{});
  } catch (const StructuredOutputError& e) {
    qa.goal_reached = false;
    qa.goal_reason = std::string("unusable goal reply: ") + e.what();
  }
  return qa;
}

std::vector<std::string> filter_accepted(const QualityAssessment& assessment, double tau) {
  std::vector<std::string> out;
  for (const auto& [id, score] : assessment.scores)
    if (score > tau) out.push_back(id);
  return out;
}

double update_threshold(double tau_prev, std::optional<double> mean_prev, std::optional<double> mean_now, double zeta,
                        double score_min, double score_max) {
  double tau = tau_prev;
  if (mean_prev && mean_now) tau += zeta * (*mean_now - *mean_prev);
  return std::clamp(tau, score_min, score_max);
}

bool check_convergence(std::span<const std::optional<double>> history, double epsilon, std::size_t window,
                       bool goal_reached) {
  if (!goal_reached || history.size() < window + 1) return false;
  const auto& last = history.back();
  if (!last) return false;
  for (std::size_t j = 1; j <= window; ++j) {
    const auto& earlier = history[history.size() - 1 - j];
    if (!earlier || !(std::abs(*last - *earlier) < epsilon)) return false;
  }
  return true;
}

bool check_convergence(std::span<const double> history, double epsilon, std::size_t window, bool goal_reached) {
  std::vector<std::optional<double>> h(history.begin(), history.end());
  return check_convergence(std::span<const std::optional<double>>(h), epsilon, window, goal_reached);
}

Weights progress_vector(const TextAttributedGraph& g0, const TextAttributedGraph& g, std::optional<double> mean_score,
                        double score_max) {
  Weights p{0.0, 0.0, 0.0};
  if (mean_score) p[0] = *mean_score / score_max;
  double homogeneity = 0.0;
  if (g0.edge_count() > 0 && g.edge_count() > 0) homogeneity = label_homogeneity(g0, g).similarity;
  p[1] = 0.5 * (clustering_similarity(g0, g) + homogeneity);
  std::map<int, std::size_t> counts;
  for (const auto& [label, n] : g.label_distribution())
    if (n > 0) counts[label] = n;
  double worst = 1.0;
  if (!counts.empty())
    for (const auto& [label, phi] : class_imbalance(counts)) worst = std::max(worst, phi);
  p[2] = -(1.0 - 1.0 / worst);
  return p;
}

// ---------------------------------------------------------------------------
// Loop

namespace {

std::size_t next_generated_id(const TextAttributedGraph& g) {
  std::size_t next = 1;
  constexpr std::string_view prefix = "new_node ";
  for (const auto& rec : g.nodes()) {
    if (rec.id.rfind(prefix, 0) != 0) continue;
    const std::string rest = rec.id.substr(prefix.size());
    if (rest.empty() || !std::all_of(rest.begin(), rest.end(), [](unsigned char c) { return std::isdigit(c); }))
      continue;
    if (rest.size() > 18) continue;
    next = std::max(next, static_cast<std::size_t>(std::stoull(rest)) + 1);
  }
  return next;
}

json pairs_json(const std::vector<std::pair<std::string, std::string>>& pairs) {
  json out = json::array();
  for (const auto& [id, why] : pairs) out.push_back(json{{"node_id", id}, {"reason", why}});
  return out;
}

}  // namespace

SynthesisResult run_synthesis(const TextAttributedGraph& g, const SynthesisConfig& config, Provider& provider,
                              std::uint64_t seed, AuditLog& audit, const EmbeddingTable* embeddings) {
  config.validate();
  if (g.empty()) throw ValidationError("cannot synthesize from an empty graph");

  SynthesisResult result;
  result.graph = g;
  auto& state = result.state;
  state.lambda = config.lambda_init;
  state.tau = config.tau0;
  audit.record(json{{"event", "config"}, {"seed", seed}, {"config", to_json(config)}});

  AuditedProvider agent(provider, audit);
  PerceptionParams perception = config.perception;
  perception.capsule_size = config.capsule_size;

  try {
    EmbeddingTable emb = embeddings ? *embeddings : EmbeddingTable{};
    {
      std::vector<std::string> ids, texts;
      for (const auto& rec : g.nodes())
        if (!emb.contains(rec.id)) {
          ids.push_back(rec.id);
          texts.push_back(rec.text);
        }
      if (!texts.empty()) {
        auto vectors = agent.embed(texts);
        if (vectors.size() != texts.size()) throw PermanentProviderError("embedding count mismatch");
        for (std::size_t i = 0; i < ids.size(); ++i) emb.insert(ids[i], std::move(vectors[i]));
      }
    }

    std::size_t next_id = next_generated_id(g);
    std::vector<std::pair<std::string, std::string>> feedback;
    std::optional<double> last_mean;
    Weights last_progress = progress_vector(g, g, std::nullopt, config.score_max);

    for (std::size_t t = 0; t < config.max_iterations; ++t) {
      state.iteration = t + 1;
      result.iterations = t + 1;
      const TextAttributedGraph& current = result.graph;
      const auto iteration = static_cast<std::int64_t>(t + 1);

      const Partition partition = detect_communities(current, &emb, config.modularity, derive_seed(seed, t, 1));
      EnvironmentReport report = build_report(current, partition, &emb);
      if (config.perception_narrative) {
        auto reply = agent.complete(
            make_request(AgentRole::Perception, kPerceptionSystem, "Environment report:\n" + to_json(report).dump(2)));
        report.narrative = trimmed(reply.text);
      }
      if (!state.initial_report) state.initial_report = report;
      state.current_report = report;
      audit.record(json{{"event", "report"},
                        {"iteration", iteration},
                        {"num_nodes", current.node_count()},
                        {"num_edges", current.edge_count()},
                        {"communities", partition.community_count},
                        {"report_hash", text_hash(to_json(report).dump())}});

      const ModeChoice mode = select_mode(report, state.lambda, agent, config);
      state.mode = mode.mode;
      audit.record(json{{"event", "mode"},
                        {"iteration", iteration},
                        {"mode", std::string(to_string(mode.mode))},
                        {"fallback", mode.fallback},
                        {"reason", mode.reason}});

      const Seed seed_set = select_seed(current, partition, &emb, mode.mode, perception);
      const auto pi = personalized_pagerank(current, seed_set.nodes, perception);
      KnowledgeCapsule capsule = sample_knowledge(current, pi, &partition, perception, derive_seed(seed, t, 2));
      capsule.seed_descriptor = seed_set.descriptor();
      json capsule_ids = json::array();
      for (NodeIndex v : capsule.nodes) capsule_ids.push_back(current.node(v).id);
      audit.record(json{{"event", "capsule"},
                        {"iteration", iteration},
                        {"seed", capsule.seed_descriptor},
                        {"seed_size", seed_set.nodes.size()},
                        {"nodes", std::move(capsule_ids)}});

      auto abort_iteration = [&](const char* stage, const StructuredOutputError& e) {
        audit.record(json{{"event", "iteration_aborted"},
                          {"iteration", iteration},
                          {"stage", stage},
                          {"error", e.what()},
                          {"raw_hash", text_hash(e.raw())}});
        state.quality_history.push_back(std::nullopt);
      };

      GenerationRequest request;
      request.graph = &current;
      request.capsule = &capsule;
      request.report = &report;
      request.mode = mode.mode;
      request.lambda = state.lambda;
      request.first_id = next_id;
      request.feedback = feedback;
      GenerationResult generated;
      try {
        generated = generate_nodes(request, config, agent);
      } catch (const StructuredOutputError& e) {
        abort_iteration("generation", e);
        next_id += requested_node_count(capsule.size(), config.new_node_fraction);
        continue;
      }
      next_id += generated.requested;
      json generated_json = json::array();
      for (const auto& n : generated.nodes)
        generated_json.push_back(json{{"node_id", n.record.id},
                                      {"label", n.record.label},
                                      {"text_hash", text_hash(n.record.text)},
                                      {"proposed", n.proposed}});
      audit.record(json{{"event", "generated"},
                        {"iteration", iteration},
                        {"requested", generated.requested},
                        {"nodes", std::move(generated_json)},
                        {"dropped", pairs_json(generated.dropped)},
                        {"repaired", generated.repaired}});
      if (generated.nodes.empty()) {
        audit.record(json{{"event", "unproductive"}, {"iteration", iteration}});
        state.quality_history.push_back(std::nullopt);
        feedback = generated.dropped;
        continue;
      }

      {
        std::vector<std::string> texts;
        for (const auto& n : generated.nodes) texts.push_back(n.record.text);
        auto vectors = agent.embed(texts);
        if (vectors.size() != texts.size()) throw PermanentProviderError("embedding count mismatch");
        for (std::size_t i = 0; i < texts.size(); ++i) emb.insert(generated.nodes[i].record.id, std::move(vectors[i]));
      }
      const Weights& theta = mode.mode == EnhancementMode::Semantic ? config.theta_semantic : config.theta_topological;
      for (auto& n : generated.nodes) {
        propose_edges(n, current, capsule, emb, theta, config.edge_threshold);
        json proposals = json::array();
        for (std::size_t k = 0; k < n.proposed.size(); ++k)
          proposals.push_back(json{{"node_id", n.proposed[k]}, {"p", n.probabilities[k]}});
        audit.record(json{{"event", "edges"},
                          {"iteration", iteration},
                          {"node_id", n.record.id},
                          {"proposals", std::move(proposals)},
                          {"kept", n.kept}});
      }

      EvaluationRequest eval;
      eval.graph = &current;
      eval.capsule = &capsule;
      eval.initial = &*state.initial_report;
      eval.current = &report;
      QualityAssessment qa;
      try {
        qa = evaluate_nodes(generated.nodes, eval, agent, config);
      } catch (const StructuredOutputError& e) {
        abort_iteration("evaluation", e);
        continue;
      }
      json scores = json::array();
      for (const auto& [id, s] : qa.scores) scores.push_back(json{{"node_id", id}, {"score", s}});
      audit.record(json{{"event", "evaluation"},
                        {"iteration", iteration},
                        {"scores", std::move(scores)},
                        {"mean", qa.mean ? json(*qa.mean) : json(nullptr)},
                        {"rejected", pairs_json(qa.rejected)},
                        {"goal_reached", qa.goal_reached},
                        {"goal_reason", qa.goal_reason}});

      const auto accepted = filter_accepted(qa, state.tau);
      const std::set<std::string> accepted_set(accepted.begin(), accepted.end());
      std::map<std::string, std::string> rejection;
      for (const auto& [id, why] : qa.rejected) rejection.emplace(id, why);
      feedback.clear();
      SynthesizedDelta delta;
      std::set<std::pair<std::string, std::string>> internal;
      for (const auto& n : generated.nodes) {
        const auto& id = n.record.id;
        if (accepted_set.count(id) && !rejection.count(id)) {
          delta.new_nodes.push_back(n.record);
          delta.new_nodes.back().neighbors.clear();
          for (const auto& target : n.kept) delta.bridge_edges.emplace_back(id, target);
          for (const auto& other : n.new_node_links)
            if (accepted_set.count(other)) internal.insert(std::minmax(id, other));
          audit.record(json{{"event", "decision"}, {"iteration", iteration}, {"node_id", id}, {"action", "keep"},
                            {"score", *n.score}});
        } else {
          std::string why;
          if (auto it = rejection.find(id); it != rejection.end())
            why = it->second;
          else if (n.score)
            why = "score " + json(*n.score).dump() + " <= threshold " + json(state.tau).dump();
          else
            why = "not scored";
          if (!rejection.count(id)) rejection.emplace(id, why);
          feedback.emplace_back(id, why);
          audit.record(json{{"event", "decision"}, {"iteration", iteration}, {"node_id", id}, {"action", "delete"},
                            {"reason", why}});
        }
      }
      for (const auto& [id, why] : generated.dropped) feedback.emplace_back(id, why);
      delta.new_internal_edges.assign(internal.begin(), internal.end());
      TextAttributedGraph next = merge_synthesis(current, delta);
      result.nodes_added += delta.new_nodes.size();
      audit.record(json{{"event", "merge"},
                        {"iteration", iteration},
                        {"added", delta.new_nodes.size()},
                        {"bridge_edges", delta.bridge_edges.size()},
                        {"internal_edges", delta.new_internal_edges.size()},
                        {"num_nodes", next.node_count()},
                        {"num_edges", next.edge_count()}});

      state.quality_history.push_back(qa.mean);
      const double tau_before = state.tau;
      state.tau = update_threshold(state.tau, last_mean, qa.mean, config.zeta, config.score_min, config.score_max);
      audit.record(json{{"event", "threshold"}, {"iteration", iteration}, {"previous", tau_before}, {"tau", state.tau}});

      const Weights progress = progress_vector(g, next, qa.mean, config.score_max);
      Weights gradient{0.0, progress[1] - last_progress[1], progress[2] - last_progress[2]};
      if (qa.mean && last_mean) gradient[0] = (*qa.mean - *last_mean) / config.score_max;
      state.lambda = update_weights(state.lambda, gradient, config.eta);
      audit.record(json{{"event", "weights"},
                        {"iteration", iteration},
                        {"gradient", weights_json(gradient)},
                        {"lambda", weights_json(state.lambda)}});
      last_progress = progress;
      if (qa.mean) last_mean = qa.mean;
      result.graph = std::move(next);

      result.converged =
          check_convergence(std::span<const std::optional<double>>(state.quality_history), config.epsilon,
                            config.window, qa.goal_reached);
      audit.record(json{{"event", "convergence"},
                        {"iteration", iteration},
                        {"converged", result.converged},
                        {"goal_reached", qa.goal_reached}});
      if (result.converged) break;
    }
  } catch (const ProviderError& e) {
    result.failure = e.what();
    audit.record(json{{"event", "failure"}, {"iteration", state.iteration}, {"error", e.what()}});
    spdlog::error("synthesis stopped: {}", e.what());
  }
  audit.record(json{{"event", "finished"},
                    {"iterations", result.iterations},
                    {"converged", result.converged},
                    {"nodes_added", result.nodes_added},
                    {"num_nodes", result.graph.node_count()},
                    {"num_edges", result.graph.edge_count()}});
  return result;
}

DryRun dry_run_prompts(const TextAttributedGraph& g, const SynthesisConfig& config, std::uint64_t seed) {
  config.validate();
  if (g.empty()) throw ValidationError("cannot synthesize from an empty graph");
  EmbeddingTable emb;
  for (const auto& rec : g.nodes()) emb.insert(rec.id, hash_embedding(rec.text, seed, config.embedding_dimension));
  PerceptionParams perception = config.perception;
  perception.capsule_size = config.capsule_size;
  const Partition partition = detect_communities(g, &emb, config.modularity, derive_seed(seed, 0, 1));
  const EnvironmentReport report = build_report(g, partition, &emb);
  DryRun out;
  out.assumed_mode = fallback_mode(report, config.imbalance_fallback);
  out.manager_prompt = manager_prompt(report, config.lambda_init);
  const Seed seed_set = select_seed(g, partition, &emb, out.assumed_mode, perception);
  const auto pi = personalized_pagerank(g, seed_set.nodes, perception);
  KnowledgeCapsule capsule = sample_knowledge(g, pi, &partition, perception, derive_seed(seed, 0, 2));
  capsule.seed_descriptor = seed_set.descriptor();
  GenerationRequest request;
  request.graph = &g;
  request.capsule = &capsule;
  request.report = &report;
  request.mode = out.assumed_mode;
  request.lambda = config.lambda_init;
  request.first_id = next_generated_id(g);
  out.enhancement_prompt =
      enhancement_prompt(request, requested_node_count(capsule.size(), config.new_node_fraction));
  return out;
}

}  // namespace tagsynth
