#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tagsynth/community.hpp"
#include "tagsynth/graph.hpp"

namespace tagsynth {

enum class EnhancementMode { Semantic, Topological };

std::string_view to_string(EnhancementMode mode);
std::optional<EnhancementMode> parse_mode(std::string_view text);  // case-insensitive

struct PerceptionParams {
  double mu = 0.5;               // variance weight in the semantic seed score
  double teleport_alpha = 0.15;  // PPR restart probability
  double ppr_tolerance = 1e-10;  // L1
  std::size_t ppr_max_iters = 200;
  double top_k_percent = 20.0;
  double beta = 2.0;
  std::size_t capsule_size = 30;
  std::size_t seed_min_community_size = 1;

  void validate() const;  // throws ValidationError
};

/// phi(c) = max_c' |V_c'| / |V_c|. Throws ValidationError on an empty class.
std::map<int, double> class_imbalance(const std::map<int, std::size_t>& counts);

struct Seed {
  EnhancementMode mode = EnhancementMode::Semantic;
  std::vector<NodeIndex> nodes;  // sorted by id
  std::optional<std::size_t> community;
  std::optional<int> label;

  std::string descriptor() const;
};

/// Semantic: the community minimizing |C| * (1 + mu * mean per-dimension
/// variance). Topological: all Train nodes of the most under-represented
/// label among labels that have Train nodes.
Seed select_seed(const TextAttributedGraph& g, const Partition& partition, const EmbeddingTable* embeddings,
                 EnhancementMode mode, const PerceptionParams& params);

struct PprDiagnostics {
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Power iteration of pi = alpha v + (1 - alpha) W^T pi with v uniform over
/// `seed` and dangling mass sent to v. Throws ConvergenceError.
std::vector<double> personalized_pagerank(const TextAttributedGraph& g, std::span<const NodeIndex> seed,
                                          const PerceptionParams& params, PprDiagnostics* diagnostics = nullptr);

struct KnowledgeCapsule {
  std::vector<NodeIndex> nodes;  // descending PPR score
  std::vector<std::pair<NodeIndex, NodeIndex>> induced_edges;
  std::string seed_descriptor;
  std::vector<double> scores;  // parallel to nodes

  std::size_t size() const { return nodes.size(); }
};

nlohmann::json to_json(const TextAttributedGraph& g, const KnowledgeCapsule& capsule);

struct SampleDiagnostics {
  std::vector<NodeIndex> top_k;     // descending score
  std::vector<NodeIndex> retained;  // survivors of the stochastic filter, descending score
  std::vector<NodeIndex> diverse;
  bool fallback = false;            // no node survived the filter
};

/// Top-K% candidates, seeded retention with probability min(1, beta pi / max pi),
/// one top node per largest community, then padding by score to
/// min(N, |candidates|). `partition` may be null (no diversity guarantee).
KnowledgeCapsule sample_knowledge(const TextAttributedGraph& g, std::span<const double> pi,
                                  const Partition* partition, const PerceptionParams& params, std::uint64_t seed,
                                  SampleDiagnostics* diagnostics = nullptr);

struct CommunityStats {
  std::size_t size = 0;
  std::size_t internal_edges = 0;
  double fraction_of_graph = 0.0;
  double modularity_contribution = 0.0;

  bool operator==(const CommunityStats&) const = default;
};

struct ClassStats {
  std::size_t count = 0;
  double fraction = 0.0;
  std::size_t internal_edges = 0;
  double avg_degree = 0.0;  // 2 * internal_edges / count
  std::map<std::size_t, std::size_t> community_distribution;

  bool operator==(const ClassStats&) const = default;
};

struct SemanticSummary {
  std::vector<int> labels;
  std::vector<std::vector<double>> centroid_similarity;

  bool operator==(const SemanticSummary&) const = default;
};

inline constexpr std::string_view kSemanticPlaceholder = "Semantic distribution analysis would go here";

struct EnvironmentReport {
  GraphStats global;
  std::vector<CommunityStats> communities;  // indexed by community
  std::map<int, ClassStats> classes;
  std::optional<SemanticSummary> semantic;
  std::string narrative;

  bool operator==(const EnvironmentReport&) const = default;
};

EnvironmentReport build_report(const TextAttributedGraph& g, const Partition& partition,
                               const EmbeddingTable* embeddings = nullptr, const StatsOptions& options = {});

nlohmann::json to_json(const EnvironmentReport& report);
EnvironmentReport report_from_json(const nlohmann::json& doc);  // throws SchemaError

}  // namespace tagsynth
