#include <algorithm>
#include <cmath>
#include <numeric>

#include "tagsynth/error.hpp"
#include "tagsynth/perception.hpp"

namespace tagsynth {

using nlohmann::json;

EnvironmentReport build_report(const TextAttributedGraph& g, const Partition& partition,
                               const EmbeddingTable* embeddings, const StatsOptions& options) {
  validate_partition(g, partition);
  EnvironmentReport r;
  r.global = graph_stats(g, options);
  const std::size_t n = g.node_count();
  const double m = static_cast<double>(g.edge_count());

  r.communities.resize(partition.community_count);
  std::vector<double> degree_sum(partition.community_count, 0.0);
  for (NodeIndex i = 0; i < n; ++i) {
    const auto c = partition.community_of[i];
    ++r.communities[c].size;
    degree_sum[c] += static_cast<double>(g.degree(i));
  }
  for (auto [a, b] : g.edges())
    if (partition.community_of[a] == partition.community_of[b]) ++r.communities[partition.community_of[a]].internal_edges;
  for (std::size_t c = 0; c < r.communities.size(); ++c) {
    auto& s = r.communities[c];
    s.fraction_of_graph = static_cast<double>(s.size) / static_cast<double>(n);
    if (m > 0.0) {
      const double share = degree_sum[c] / (2.0 * m);
      s.modularity_contribution = static_cast<double>(s.internal_edges) / m - share * share;
    }
  }

  for (NodeIndex i = 0; i < n; ++i) {
    auto& cs = r.classes[g.node(i).label];
    ++cs.count;
    ++cs.community_distribution[partition.community_of[i]];
  }
  for (auto [a, b] : g.edges())
    if (g.node(a).label == g.node(b).label) ++r.classes[g.node(a).label].internal_edges;
  for (auto& [label, cs] : r.classes) {
    cs.fraction = static_cast<double>(cs.count) / static_cast<double>(n);
    cs.avg_degree = 2.0 * static_cast<double>(cs.internal_edges) / static_cast<double>(cs.count);
  }

  if (embeddings && n > 0) {
    SemanticSummary sem;
    std::map<int, std::vector<double>> centroid;
    const std::size_t d = embeddings->dimension();
    for (NodeIndex i = 0; i < n; ++i) {
      const auto& x = embeddings->at(g.node(i).id);
      auto& c = centroid[g.node(i).label];
      c.resize(d, 0.0);
      const double norm = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
      for (std::size_t k = 0; k < d; ++k) c[k] += x[k] / norm;
    }
    for (const auto& [label, _] : centroid) sem.labels.push_back(label);
    for (int a : sem.labels) {
      std::vector<double> row;
      for (int b : sem.labels) {
        const auto& x = centroid[a];
        const auto& y = centroid[b];
        const double nx = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
        const double ny = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);
        row.push_back(nx > 0.0 && ny > 0.0 ? cosine_similarity(x, y) : 0.0);
      }
      sem.centroid_similarity.push_back(std::move(row));
    }
    r.semantic = std::move(sem);
  }
  return r;
}

json to_json(const EnvironmentReport& r) {
  json graph = to_json(r.global);
  graph.erase("degree_distribution");
  graph.erase("label_distribution");

  std::vector<std::size_t> order(r.communities.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return r.communities[a].size > r.communities[b].size; });
  json indices = json::array(), sizes = json::array(), distribution = json::object(), statistics = json::object();
  for (auto c : order) {
    const auto& s = r.communities[c];
    indices.push_back(c);
    sizes.push_back(s.size);
    distribution[std::to_string(c)] = s.size;
    statistics[std::to_string(c)] = json{{"size", s.size},
                                         {"internal_edges", s.internal_edges},
                                         {"fraction_of_graph", s.fraction_of_graph},
                                         {"modularity_contribution", s.modularity_contribution}};
  }
  graph["indices"] = std::move(indices);
  graph["sizes"] = std::move(sizes);
  graph["distribution"] = std::move(distribution);
  graph["statistics"] = std::move(statistics);

  json degree = json::object();
  for (const auto& [k, count] : r.global.degree_histogram) degree[std::to_string(k)] = count;
  json labels = json::object();
  for (const auto& [label, count] : r.global.label_distribution) labels[std::to_string(label)] = count;

  json classes = json::object();
  for (const auto& [label, cs] : r.classes) {
    json dist = json::object();
    for (const auto& [c, count] : cs.community_distribution) dist[std::to_string(c)] = count;
    classes[std::to_string(label)] = json{{"count", cs.count},
                                          {"fraction", cs.fraction},
                                          {"internal_edges", cs.internal_edges},
                                          {"avg_degree", cs.avg_degree},
                                          {"community_distribution", std::move(dist)}};
  }

  json semantic;
  if (r.semantic)
    semantic = json{{"labels", r.semantic->labels}, {"centroid_similarity", r.semantic->centroid_similarity}};
  else
    semantic = json{{"placeholder", std::string(kSemanticPlaceholder)}};

  json out{{"Graph", std::move(graph)},
           {"StructuralDistribution", json{{"degree_distribution", std::move(degree)}}},
           {"SemanticDistribution", std::move(semantic)},
           {"LabelDistribution", std::move(labels)},
           {"ClassStatistics", std::move(classes)}};
  if (!r.narrative.empty()) out["Summary"] = r.narrative;
  return out;
}

EnvironmentReport report_from_json(const json& doc) {
  try {
    EnvironmentReport r;
    json graph = doc.at("Graph");
    graph["degree_distribution"] = doc.at("StructuralDistribution").at("degree_distribution");
    graph["label_distribution"] = doc.at("LabelDistribution");
    r.global = stats_from_json(graph);

    const auto& stats = graph.at("statistics");
    r.communities.resize(stats.size());
    for (const auto& [key, s] : stats.items()) {
      const auto c = std::stoul(key);
      if (c >= r.communities.size()) throw SchemaError("Graph.statistics: community index " + key + " out of range");
      r.communities[c] = CommunityStats{s.at("size").get<std::size_t>(), s.at("internal_edges").get<std::size_t>(),
                                        s.at("fraction_of_graph").get<double>(),
                                        s.at("modularity_contribution").get<double>()};
    }
    for (const auto& [key, cs] : doc.at("ClassStatistics").items()) {
      ClassStats out{cs.at("count").get<std::size_t>(), cs.at("fraction").get<double>(),
                     cs.at("internal_edges").get<std::size_t>(), cs.at("avg_degree").get<double>(), {}};
      for (const auto& [c, count] : cs.at("community_distribution").items())
        out.community_distribution[std::stoul(c)] = count.get<std::size_t>();
      r.classes[std::stoi(key)] = std::move(out);
    }
    const auto& sem = doc.at("SemanticDistribution");
    if (!sem.contains("placeholder"))
      r.semantic = SemanticSummary{sem.at("labels").get<std::vector<int>>(),
                                   sem.at("centroid_similarity").get<std::vector<std::vector<double>>>()};
    r.narrative = doc.value("Summary", std::string{});
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("environment report: ") + e.what());
  } catch (const std::logic_error& e) {
    throw SchemaError(std::string("environment report: bad numeric key: ") + e.what());
  }
}

}  // namespace tagsynth
