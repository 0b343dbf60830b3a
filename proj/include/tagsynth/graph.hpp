#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace tagsynth {

using NodeIndex = std::size_t;
using Edge = std::pair<NodeIndex, NodeIndex>;

enum class Mask { Train, Validation, Test };

std::string_view to_string(Mask mask);
std::optional<Mask> parse_mask(std::string_view text);

struct NodeRecord {
  std::string id;
  int label = 0;
  std::string text;
  std::vector<std::string> neighbors;
  Mask mask = Mask::Train;
  // Serialize the id as a JSON integer (it was given as one).
  bool numeric_id = false;

  bool operator==(const NodeRecord&) const = default;
};

/// Canonical id order: integer-looking ids first, by value, then other ids
/// lexicographically. Every "ties by id" rule in the library uses this.
bool id_less(std::string_view a, std::string_view b);

struct NormalizationReport {
  std::size_t back_edges_added = 0;
  std::size_t duplicates_removed = 0;
  std::size_t self_loops_removed = 0;

  std::size_t total() const {
    return back_edges_added + duplicates_removed + self_loops_removed;
  }
};

/// Undirected simple graph whose nodes carry text, a class label and a split
/// mask. Immutable once built; the neighbor lists inside the records are kept
/// consistent with the adjacency (symmetric, no duplicates, no self-loops).
class TextAttributedGraph {
 public:
  TextAttributedGraph() = default;

  /// Validates and normalizes raw records. Throws ValidationError on
  /// duplicate ids, dangling neighbors or labels outside [0, class_count).
  static TextAttributedGraph build(std::vector<NodeRecord> nodes, int class_count,
                                   NormalizationReport* report = nullptr);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  int class_count() const { return class_count_; }
  bool empty() const { return nodes_.empty(); }

  const NodeRecord& node(NodeIndex i) const { return nodes_.at(i); }
  std::span<const NodeRecord> nodes() const { return nodes_; }

  // Sorted ascending by index.
  std::span<const NodeIndex> neighbors(NodeIndex i) const { return adjacency_.at(i); }
  std::size_t degree(NodeIndex i) const { return adjacency_.at(i).size(); }
  std::size_t max_degree() const;
  bool has_edge(NodeIndex a, NodeIndex b) const;

  std::optional<NodeIndex> find(std::string_view id) const;
  NodeIndex index_of(std::string_view id) const;  // throws ValidationError

  // Each undirected edge once, as (lower index, higher index), sorted.
  std::vector<Edge> edges() const;

  // Node indices sorted by id_less.
  std::vector<NodeIndex> canonical_order() const;

  /// Subgraph induced by `keep` (in the given order); neighbor lists are
  /// filtered to the kept nodes.
  TextAttributedGraph induced(std::span<const NodeIndex> keep) const;

  std::map<int, std::size_t> label_distribution() const;

 private:
  std::vector<NodeRecord> nodes_;
  std::vector<std::vector<NodeIndex>> adjacency_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::size_t edge_count_ = 0;
  int class_count_ = 0;
};

struct Components {
  std::vector<std::size_t> component_of;  // per node
  std::vector<std::size_t> sizes;         // per component, in discovery order
  std::size_t largest = 0;                // index into sizes

  std::size_t count() const { return sizes.size(); }
  std::size_t largest_size() const { return sizes.empty() ? 0 : sizes[largest]; }
};

Components connected_components(const TextAttributedGraph& g);

// Local clustering coefficient per node; 0 for degree < 2.
std::vector<double> local_clustering(const TextAttributedGraph& g);

struct GraphStats {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  double avg_degree = 0.0;
  double density = 0.0;
  double clustering_coefficient = 0.0;
  double avg_path_length = 0.0;
  bool avg_path_length_sampled = false;
  std::size_t connected_components = 0;
  std::size_t largest_component_size = 0;
  std::map<std::size_t, std::size_t> degree_histogram;
  std::map<int, std::size_t> label_distribution;

  bool operator==(const GraphStats&) const = default;
};

struct StatsOptions {
  // Above this largest-component size the mean shortest path is estimated
  // from `path_sources` evenly spaced BFS roots.
  std::size_t exact_path_limit = 20000;
  std::size_t path_sources = 1000;
};

GraphStats graph_stats(const TextAttributedGraph& g, const StatsOptions& options = {});

struct SynthesizedDelta {
  std::vector<NodeRecord> new_nodes;
  std::vector<std::pair<std::string, std::string>> new_internal_edges;
  std::vector<std::pair<std::string, std::string>> bridge_edges;  // (new, original)
};

/// Returns g extended by the delta. Original records keep their fields and
/// gain only appended neighbor ids. Throws ValidationError on id collisions
/// or unresolved endpoints.
TextAttributedGraph merge_synthesis(const TextAttributedGraph& g, const SynthesizedDelta& delta);

// TAG-JSON
TextAttributedGraph graph_from_json(const nlohmann::json& doc, NormalizationReport* report = nullptr);
nlohmann::json graph_to_json(const TextAttributedGraph& g);
TextAttributedGraph load_graph(const std::filesystem::path& path, NormalizationReport* report = nullptr);
void save_graph(const TextAttributedGraph& g, const std::filesystem::path& path);

nlohmann::json to_json(const GraphStats& stats);
GraphStats stats_from_json(const nlohmann::json& doc);  // throws SchemaError

// Shared file helpers. Writes land via a temporary file and rename.
std::string read_text_file(const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace tagsynth
