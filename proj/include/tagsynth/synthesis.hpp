#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tagsynth/community.hpp"
#include "tagsynth/graph.hpp"
#include "tagsynth/llm.hpp"
#include "tagsynth/perception.hpp"

namespace tagsynth {

using Weights = std::array<double, 3>;  // (semantic, structural, balance)

struct SynthesisConfig {
  std::size_t capsule_size = 30;
  double new_node_fraction = 0.15;
  Weights theta_semantic{0.6, 0.3, 0.1};
  Weights theta_topological{0.2, 0.5, 0.3};
  double edge_threshold = 0.5;
  double tau0 = 7.0;
  double zeta = 0.1;
  double epsilon = 0.05;
  std::size_t window = 2;
  double eta = 0.05;
  Weights lambda_init{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::size_t max_iterations = 15;
  double score_min = 0.0;
  double score_max = 10.0;
  bool new_node_edges = false;       // allow edges among nodes of one batch
  bool perception_narrative = false;  // ask the Perception role for a report summary
  double imbalance_fallback = 3.0;    // fallback mode rule: topological above this max phi
  std::size_t min_text_length = 20;
  std::size_t embedding_dimension = 64;  // mock/dry-run hash embeddings

  PerceptionParams perception;   // capsule_size above takes precedence
  ModularityParams modularity;

  void validate() const;  // throws ValidationError
};

nlohmann::json to_json(const SynthesisConfig& config);

struct SynthesisState {
  std::size_t iteration = 0;
  std::optional<EnhancementMode> mode;
  Weights lambda{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double tau = 7.0;
  std::vector<std::optional<double>> quality_history;  // nullopt: nothing was scored
  std::optional<EnvironmentReport> initial_report;
  std::optional<EnvironmentReport> current_report;
};

struct GeneratedNode {
  NodeRecord record;
  std::vector<std::string> proposed;    // LLM-proposed neighbors
  std::vector<double> probabilities;    // parallel to proposed
  std::vector<std::string> kept;        // after thresholding
  std::vector<std::string> new_node_links;  // same-batch neighbors (only when enabled)
  std::optional<double> score;
};

struct QualityAssessment {
  std::vector<std::pair<std::string, double>> scores;    // in node order
  std::optional<double> mean;                             // nullopt when nothing was scored
  std::vector<std::pair<std::string, std::string>> rejected;  // (id, reason), pre-filter and threshold
  bool goal_reached = false;
  std::string goal_reason;
};

// ---- Manager

/// Topological when the report's largest class-imbalance ratio exceeds
/// `threshold`, else Semantic.
EnhancementMode fallback_mode(const EnvironmentReport& report, double threshold);

struct ModeChoice {
  EnhancementMode mode = EnhancementMode::Semantic;
  bool fallback = false;
  std::string reason;
};

std::string manager_prompt(const EnvironmentReport& report, const Weights& lambda);

/// Asks the Manager role; on structured-output failure applies fallback_mode.
ModeChoice select_mode(const EnvironmentReport& report, const Weights& lambda, Provider& provider,
                       const SynthesisConfig& config);

/// Euclidean projection onto the probability simplex.
Weights project_to_simplex(const Weights& v);
Weights update_weights(const Weights& lambda, const Weights& gradient, double eta);

// ---- Enhancement

struct EdgeFeatures {
  double similarity = 0.0;    // cosine clamped to [0, 1]
  double overlap = 0.0;       // |N(target) & proposed-in-capsule| / |proposed-in-capsule|
  double degree_ratio = 0.0;  // deg(target) / max degree
};

double sigmoid(double x);
double edge_probability(const EdgeFeatures& f, const Weights& theta);

/// Features of a candidate edge from a new node to `target`.
/// `proposed_in_capsule` are the node's proposals that lie in the capsule.
EdgeFeatures edge_features(std::span<const double> candidate_embedding, std::span<const double> target_embedding,
                           std::span<const NodeIndex> proposed_in_capsule, NodeIndex target,
                           const TextAttributedGraph& g);

/// Keeps proposals with probability >= threshold, or the best one when none
/// qualifies. Fills node.probabilities and node.kept. Throws ValidationError
/// on a missing embedding.
void propose_edges(GeneratedNode& node, const TextAttributedGraph& g, const KnowledgeCapsule& capsule,
                   const EmbeddingTable& embeddings, const Weights& theta, double threshold);

std::size_t requested_node_count(std::size_t capsule_size, double fraction);

struct GenerationRequest {
  const TextAttributedGraph* graph = nullptr;
  const KnowledgeCapsule* capsule = nullptr;
  const EnvironmentReport* report = nullptr;
  EnhancementMode mode = EnhancementMode::Semantic;
  Weights lambda{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::size_t first_id = 1;  // new nodes are named "new_node <k>" from here
  std::vector<std::pair<std::string, std::string>> feedback;  // last round's rejections
};

struct GenerationResult {
  std::size_t requested = 0;
  std::vector<GeneratedNode> nodes;
  std::vector<std::pair<std::string, std::string>> dropped;  // (id or #index, reason)
  bool repaired = false;
};

std::string enhancement_prompt(const GenerationRequest& request, std::size_t count);

/// One Enhancement call for ceil(M |capsule|) nodes, parsed and validated
/// locally. Throws StructuredOutputError when the reply stays unusable.
GenerationResult generate_nodes(const GenerationRequest& request, const SynthesisConfig& config,
                                Provider& provider);

// ---- Evaluation

struct EvaluationRequest {
  const TextAttributedGraph* graph = nullptr;
  const KnowledgeCapsule* capsule = nullptr;
  const EnvironmentReport* initial = nullptr;
  const EnvironmentReport* current = nullptr;
};

std::string evaluation_prompt(const EvaluationRequest& request, std::span<const GeneratedNode> nodes);
std::string goal_prompt(const EnvironmentReport& initial, const EnvironmentReport& current);

/// Pre-filters (duplicate id, text shorter than min_text_length, empty
/// record), one Evaluation call for the survivors, then one Goal call.
/// Scores are written back into `nodes`. Throws StructuredOutputError when
/// the Evaluation reply stays unusable; a failed Goal reply counts as "not
/// reached".
QualityAssessment evaluate_nodes(std::vector<GeneratedNode>& nodes, const EvaluationRequest& request,
                                 Provider& provider, const SynthesisConfig& config);

/// Nodes whose score is strictly greater than tau.
std::vector<std::string> filter_accepted(const QualityAssessment& assessment, double tau);

double update_threshold(double tau_prev, std::optional<double> mean_prev, std::optional<double> mean_now,
                        double zeta, double score_min, double score_max);

bool check_convergence(std::span<const std::optional<double>> history, double epsilon, std::size_t window,
                       bool goal_reached);
bool check_convergence(std::span<const double> history, double epsilon, std::size_t window, bool goal_reached);

// ---- Loop

struct SynthesisResult {
  TextAttributedGraph graph;
  SynthesisState state;
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t nodes_added = 0;
  std::optional<std::string> failure;
};

/// Runs the retrieve-generate-evaluate loop until convergence or
/// max_iterations. Every agent call and decision is appended to `audit`.
/// `embeddings` may supply vectors for the input nodes; missing ones come
/// from the provider.
SynthesisResult run_synthesis(const TextAttributedGraph& g, const SynthesisConfig& config, Provider& provider,
                              std::uint64_t seed, AuditLog& audit, const EmbeddingTable* embeddings = nullptr);

/// The Manager and Enhancement prompts of the first iteration, built with
/// local hash embeddings and the fallback mode rule (no provider calls).
struct DryRun {
  std::string manager_prompt;
  std::string enhancement_prompt;
  EnhancementMode assumed_mode = EnhancementMode::Semantic;
};

DryRun dry_run_prompts(const TextAttributedGraph& g, const SynthesisConfig& config, std::uint64_t seed);

/// Per-objective progress (mean score / scale, structural similarity to g0,
/// minus normalized class imbalance) used to finite-difference lambda.
Weights progress_vector(const TextAttributedGraph& g0, const TextAttributedGraph& g, std::optional<double> mean_score,
                        double score_max);

}  // namespace tagsynth
