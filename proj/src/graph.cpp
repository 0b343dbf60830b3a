#include "tagsynth/graph.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <numeric>
#include <unordered_set>

#include "tagsynth/error.hpp"

namespace tagsynth {

namespace {

std::optional<long long> integer_token(std::string_view s) {
  if (s.empty()) return std::nullopt;
  long long value = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return value;
}

std::string join_limited(const std::vector<std::string>& items, std::size_t limit) {
  std::string out;
  for (std::size_t i = 0; i < items.size() && i < limit; ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  if (items.size() > limit) out += ", ... (" + std::to_string(items.size()) + " total)";
  return out;
}

}  // namespace

std::string_view to_string(Mask mask) {
  switch (mask) {
    case Mask::Train: return "Train";
    case Mask::Validation: return "Validation";
    case Mask::Test: return "Test";
  }
  return "Train";
}

std::optional<Mask> parse_mask(std::string_view text) {
  if (text == "Train") return Mask::Train;
  if (text == "Validation") return Mask::Validation;
  if (text == "Test") return Mask::Test;
  return std::nullopt;
}

bool id_less(std::string_view a, std::string_view b) {
  auto ia = integer_token(a);
  auto ib = integer_token(b);
  if (ia && ib) {
    if (*ia != *ib) return *ia < *ib;
    return a < b;
  }
  if (ia) return true;
  if (ib) return false;
  return a < b;
}

TextAttributedGraph TextAttributedGraph::build(std::vector<NodeRecord> nodes, int class_count,
                                               NormalizationReport* report) {
  if (class_count < 0) throw ValidationError("class_count must be nonnegative");

  TextAttributedGraph g;
  g.class_count_ = class_count;
  g.index_.reserve(nodes.size());

  std::vector<std::string> duplicates;
  std::vector<std::string> bad_labels;
  for (NodeIndex i = 0; i < nodes.size(); ++i) {
    if (!g.index_.emplace(nodes[i].id, i).second) duplicates.push_back(nodes[i].id);
    if (nodes[i].label < 0 || nodes[i].label >= class_count) bad_labels.push_back(nodes[i].id);
  }
  if (!duplicates.empty())
    throw ValidationError("duplicate node_id: " + join_limited(duplicates, 10));
  if (!bad_labels.empty())
    throw ValidationError("label outside [0, " + std::to_string(class_count) +
                          ") for node(s): " + join_limited(bad_labels, 10));

  NormalizationReport fixes;
  std::vector<std::string> dangling;
  std::vector<std::vector<NodeIndex>> listed(nodes.size());
  for (NodeIndex i = 0; i < nodes.size(); ++i) {
    std::vector<std::string> kept;
    kept.reserve(nodes[i].neighbors.size());
    std::unordered_set<NodeIndex> seen;
    for (const auto& nb : nodes[i].neighbors) {
      auto it = g.index_.find(nb);
      if (it == g.index_.end()) {
        dangling.push_back(nodes[i].id + "->" + nb);
        continue;
      }
      if (it->second == i) {
        ++fixes.self_loops_removed;
        continue;
      }
      if (!seen.insert(it->second).second) {
        ++fixes.duplicates_removed;
        continue;
      }
      kept.push_back(nb);
      listed[i].push_back(it->second);
    }
    nodes[i].neighbors = std::move(kept);
  }
  if (!dangling.empty())
    throw ValidationError("dangling neighbor id(s): " + join_limited(dangling, 10));

  // Symmetrize: every one-sided listing gets its back-edge appended.
  std::vector<std::unordered_set<NodeIndex>> present(nodes.size());
  for (NodeIndex i = 0; i < nodes.size(); ++i)
    present[i].insert(listed[i].begin(), listed[i].end());
  for (NodeIndex i = 0; i < nodes.size(); ++i) {
    for (NodeIndex j : listed[i]) {
      if (present[j].insert(i).second) {
        nodes[j].neighbors.push_back(nodes[i].id);
        ++fixes.back_edges_added;
      }
    }
  }

  g.adjacency_.resize(nodes.size());
  std::size_t endpoint_total = 0;
  for (NodeIndex i = 0; i < nodes.size(); ++i) {
    g.adjacency_[i].assign(present[i].begin(), present[i].end());
    std::sort(g.adjacency_[i].begin(), g.adjacency_[i].end());
    endpoint_total += g.adjacency_[i].size();
  }
  g.edge_count_ = endpoint_total / 2;
  g.nodes_ = std::move(nodes);
  if (report) *report = fixes;
  return g;
}

std::size_t TextAttributedGraph::max_degree() const {
  std::size_t best = 0;
  for (const auto& adj : adjacency_) best = std::max(best, adj.size());
  return best;
}

bool TextAttributedGraph::has_edge(NodeIndex a, NodeIndex b) const {
  const auto& adj = adjacency_.at(a);
  return std::binary_search(adj.begin(), adj.end(), b);
}

std::optional<NodeIndex> TextAttributedGraph::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeIndex TextAttributedGraph::index_of(std::string_view id) const {
  auto idx = find(id);
  if (!idx) throw ValidationError("unknown node id: " + std::string(id));
  return *idx;
}

std::vector<Edge> TextAttributedGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (NodeIndex i = 0; i < adjacency_.size(); ++i)
    for (NodeIndex j : adjacency_[i])
      if (i < j) out.emplace_back(i, j);
  return out;
}

std::vector<NodeIndex> TextAttributedGraph::canonical_order() const {
  std::vector<NodeIndex> order(nodes_.size());
  std::iota(order.begin(), order.end(), NodeIndex{0});
  std::sort(order.begin(), order.end(),
            [&](NodeIndex a, NodeIndex b) { return id_less(nodes_[a].id, nodes_[b].id); });
  return order;
}

TextAttributedGraph TextAttributedGraph::induced(std::span<const NodeIndex> keep) const {
  std::vector<char> in_set(nodes_.size(), 0);
  for (NodeIndex i : keep) in_set.at(i) = 1;

  std::vector<NodeRecord> records;
  records.reserve(keep.size());
  for (NodeIndex i : keep) {
    NodeRecord rec = nodes_[i];
    rec.neighbors.clear();
    for (const auto& nb : nodes_[i].neighbors)
      if (in_set[index_.at(nb)]) rec.neighbors.push_back(nb);
    records.push_back(std::move(rec));
  }
  return build(std::move(records), class_count_);
}

std::map<int, std::size_t> TextAttributedGraph::label_distribution() const {
  std::map<int, std::size_t> out;
  for (const auto& n : nodes_) ++out[n.label];
  return out;
}

Components connected_components(const TextAttributedGraph& g) {
  constexpr auto unset = static_cast<std::size_t>(-1);
  Components c;
  c.component_of.assign(g.node_count(), unset);
  std::vector<NodeIndex> stack;
  for (NodeIndex start = 0; start < g.node_count(); ++start) {
    if (c.component_of[start] != unset) continue;
    const std::size_t id = c.sizes.size();
    std::size_t size = 0;
    c.component_of[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      NodeIndex v = stack.back();
      stack.pop_back();
      ++size;
      for (NodeIndex w : g.neighbors(v)) {
        if (c.component_of[w] == unset) {
          c.component_of[w] = id;
          stack.push_back(w);
        }
      }
    }
    c.sizes.push_back(size);
    if (size > c.sizes[c.largest]) c.largest = id;
  }
  return c;
}

std::vector<double> local_clustering(const TextAttributedGraph& g) {
  std::vector<double> out(g.node_count(), 0.0);
  std::vector<char> mark(g.node_count(), 0);
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    const auto nbrs = g.neighbors(i);
    const std::size_t k = nbrs.size();
    if (k < 2) continue;
    for (NodeIndex j : nbrs) mark[j] = 1;
    std::size_t links = 0;  // each triangle edge seen twice
    for (NodeIndex j : nbrs)
      for (NodeIndex w : g.neighbors(j))
        if (mark[w]) ++links;
    for (NodeIndex j : nbrs) mark[j] = 0;
    out[i] = static_cast<double>(links) / static_cast<double>(k * (k - 1));
  }
  return out;
}

namespace {

// Sum of BFS distances from `source` to every reachable node.
std::size_t bfs_distance_sum(const TextAttributedGraph& g, NodeIndex source,
                             std::vector<std::size_t>& dist, std::deque<NodeIndex>& queue) {
  constexpr auto unset = static_cast<std::size_t>(-1);
  std::vector<NodeIndex> touched;
  std::size_t total = 0;
  dist[source] = 0;
  touched.push_back(source);
  queue.push_back(source);
  while (!queue.empty()) {
    NodeIndex v = queue.front();
    queue.pop_front();
    for (NodeIndex w : g.neighbors(v)) {
      if (dist[w] == unset) {
        dist[w] = dist[v] + 1;
        total += dist[w];
        touched.push_back(w);
        queue.push_back(w);
      }
    }
  }
  for (NodeIndex v : touched) dist[v] = unset;
  return total;
}

}  // namespace

GraphStats graph_stats(const TextAttributedGraph& g, const StatsOptions& options) {
  GraphStats s;
  const std::size_t n = g.node_count();
  s.num_nodes = n;
  s.num_edges = g.edge_count();
  s.label_distribution = g.label_distribution();
  for (NodeIndex i = 0; i < n; ++i) ++s.degree_histogram[g.degree(i)];
  if (n == 0) return s;

  const double m = static_cast<double>(s.num_edges);
  s.avg_degree = 2.0 * m / static_cast<double>(n);
  s.density = n > 1 ? 2.0 * m / (static_cast<double>(n) * static_cast<double>(n - 1)) : 0.0;

  const auto cc = local_clustering(g);
  s.clustering_coefficient = std::accumulate(cc.begin(), cc.end(), 0.0) / static_cast<double>(n);

  const Components comps = connected_components(g);
  s.connected_components = comps.count();
  s.largest_component_size = comps.largest_size();

  std::vector<NodeIndex> lcc;
  for (NodeIndex i = 0; i < n; ++i)
    if (comps.component_of[i] == comps.largest) lcc.push_back(i);
  const std::size_t L = lcc.size();
  if (L > 1) {
    std::vector<std::size_t> dist(n, static_cast<std::size_t>(-1));
    std::deque<NodeIndex> queue;
    std::vector<NodeIndex> sources = lcc;
    if (L > options.exact_path_limit && options.path_sources > 0) {
      sources.clear();
      const std::size_t k = std::min(options.path_sources, L);
      for (std::size_t t = 0; t < k; ++t) sources.push_back(lcc[t * L / k]);
      s.avg_path_length_sampled = true;
    }
    long double total = 0.0L;
    for (NodeIndex src : sources) total += static_cast<long double>(bfs_distance_sum(g, src, dist, queue));
    s.avg_path_length = static_cast<double>(
        total / (static_cast<long double>(sources.size()) * static_cast<long double>(L - 1)));
  }
  return s;
}

TextAttributedGraph merge_synthesis(const TextAttributedGraph& g, const SynthesizedDelta& delta) {
  std::unordered_set<std::string> fresh;
  for (const auto& rec : delta.new_nodes) {
    if (g.find(rec.id)) throw ValidationError("synthesized node id collides with existing node: " + rec.id);
    if (!fresh.insert(rec.id).second) throw ValidationError("duplicate synthesized node id: " + rec.id);
  }
  auto resolves = [&](const std::string& id) { return fresh.count(id) > 0 || g.find(id).has_value(); };

  std::vector<NodeRecord> records(g.nodes().begin(), g.nodes().end());
  std::unordered_map<std::string, std::size_t> position;
  for (const auto& rec : delta.new_nodes) {
    position.emplace(rec.id, records.size());
    NodeRecord copy = rec;
    copy.neighbors.clear();
    records.push_back(std::move(copy));
  }
  auto slot = [&](const std::string& id) -> NodeRecord& {
    auto it = position.find(id);
    return it != position.end() ? records[it->second] : records[g.index_of(id)];
  };
  auto link = [&](const std::string& a, const std::string& b) {
    auto& ra = slot(a).neighbors;
    if (std::find(ra.begin(), ra.end(), b) == ra.end()) ra.push_back(b);
    auto& rb = slot(b).neighbors;
    if (std::find(rb.begin(), rb.end(), a) == rb.end()) rb.push_back(a);
  };

  for (const auto& rec : delta.new_nodes) {
    for (const auto& nb : rec.neighbors) {
      if (!resolves(nb)) throw ValidationError("synthesized node " + rec.id + " lists unknown neighbor " + nb);
      if (nb != rec.id) link(rec.id, nb);
    }
  }
  for (const auto& [a, b] : delta.new_internal_edges) {
    if (!fresh.count(a) || !fresh.count(b))
      throw ValidationError("internal synthesized edge must join two new nodes: " + a + " - " + b);
    if (a != b) link(a, b);
  }
  for (const auto& [s, o] : delta.bridge_edges) {
    if (!fresh.count(s)) throw ValidationError("bridge edge source is not a synthesized node: " + s);
    if (!g.find(o)) throw ValidationError("bridge edge endpoint missing from base graph: " + o);
    link(s, o);
  }
  return TextAttributedGraph::build(std::move(records), g.class_count());
}

}  // namespace tagsynth
