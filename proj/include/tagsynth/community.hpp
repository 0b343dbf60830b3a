#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tagsynth/graph.hpp"

namespace tagsynth {

/// Dense node embeddings keyed by node id. All rows share one dimension and
/// zero-norm rows are rejected at insertion.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

  void insert(std::string id, std::vector<double> vector);

  const std::vector<double>* find(std::string_view id) const;
  const std::vector<double>& at(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return rows_.size(); }

  auto begin() const { return rows_.begin(); }
  auto end() const { return rows_.end(); }

 private:
  std::size_t dimension_ = 0;
  std::unordered_map<std::string, std::vector<double>> rows_;
};

EmbeddingTable embeddings_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const EmbeddingTable& table);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

enum class SemanticTerm {
  Similarity,  // max(0, cos), subtracted as printed in the modularity formula
  Distance,    // 1 - cos
};

struct ModularityParams {
  double gamma = 0.5;
  SemanticTerm semantic_term = SemanticTerm::Similarity;
  // Pair-sum normalizer: exact up to this many nodes, sampled above.
  std::size_t exact_normalizer_limit = 650;
  std::size_t normalizer_sample_pairs = 200000;
};

struct Partition {
  std::vector<std::size_t> community_of;  // indexed by NodeIndex
  std::size_t community_count = 0;

  std::vector<std::vector<NodeIndex>> members() const;
  std::vector<std::size_t> sizes() const;
  bool operator==(const Partition&) const = default;
};

/// Checks coverage of g and contiguous indices; throws ValidationError.
void validate_partition(const TextAttributedGraph& g, const Partition& p);

/// Relabels communities so indices follow the smallest member id (id_less).
Partition canonicalize(const TextAttributedGraph& g, const Partition& p);

Partition singleton_partition(const TextAttributedGraph& g);

/// Q_sem over all ordered pairs (i, j) including i == j. `embeddings` may be
/// null when gamma == 1. Throws ValidationError when the graph has no edges.
double semantic_modularity(const TextAttributedGraph& g, const Partition& p,
                           const EmbeddingTable* embeddings, const ModularityParams& params);

struct DetectionDiagnostics {
  std::size_t levels = 0;
  std::size_t moves = 0;
  bool normalizer_sampled = false;
  double normalizer = 0.0;
};

/// Louvain-style local moving and aggregation maximizing Q_sem. Visit order
/// is the canonical id order shuffled by `seed`; ties go to the lowest
/// community index; the result is canonicalized.
Partition detect_communities(const TextAttributedGraph& g, const EmbeddingTable* embeddings,
                             const ModularityParams& params, std::uint64_t seed,
                             DetectionDiagnostics* diagnostics = nullptr);

}  // namespace tagsynth
