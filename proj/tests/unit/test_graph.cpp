#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "../oracles.hpp"
#include "tagsynth/error.hpp"
#include "tagsynth/graph.hpp"

using namespace tagsynth;
using nlohmann::json;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("tagsynth_graph_" + name);
}

void check_handshake(const TextAttributedGraph& g) {
  std::size_t total = 0;
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    total += g.degree(i);
    for (NodeIndex j : g.neighbors(i)) CHECK(g.has_edge(j, i));
    CHECK_FALSE(g.has_edge(i, i));
  }
  CHECK(total == 2 * g.edge_count());
}

}  // namespace

TEST_CASE("id order puts integers first by value") {
  CHECK(id_less("2", "10"));
  CHECK_FALSE(id_less("10", "2"));
  CHECK(id_less("999", "new_node 1"));
  CHECK(id_less("new_node 1", "new_node 2"));
  CHECK(id_less("-3", "0"));
}

TEST_CASE("load restores symmetry of one-sided neighbor lists") {
  json doc = json::parse(R"({"class_count": 7, "nodes": [
    {"node_id": 536, "label": 0, "text": "Title: DCSP", "neighbors": [639], "mask": "Train"},
    {"node_id": 639, "label": 0, "text": "Title: other", "neighbors": [], "mask": "Test"}]})");
  NormalizationReport report;
  auto g = graph_from_json(doc, &report);
  CHECK(report.back_edges_added == 1);
  CHECK(report.total() == 1);
  auto a = g.index_of("536"), b = g.index_of("639");
  CHECK(g.has_edge(a, b));
  CHECK(g.has_edge(b, a));
  auto again = graph_to_json(g);
  CHECK(again["nodes"][1]["neighbors"] == json::array({536}));
  CHECK(again["nodes"][0]["node_id"].is_number_integer());
  CHECK(g.node(b).mask == Mask::Test);
}

TEST_CASE("duplicates and self-loops are dropped and counted") {
  json doc = json::parse(R"({"class_count": 1, "nodes": [
    {"node_id": "a", "label": 0, "text": "", "neighbors": ["a", "b", "b"], "mask": "Train"},
    {"node_id": "b", "label": 0, "text": "", "neighbors": ["a"], "mask": "Train"}]})");
  NormalizationReport report;
  auto g = graph_from_json(doc, &report);
  CHECK(report.self_loops_removed == 1);
  CHECK(report.duplicates_removed == 1);
  CHECK(report.back_edges_added == 0);
  CHECK(g.edge_count() == 1);
}

TEST_CASE("empty node list loads as an empty graph") {
  auto g = graph_from_json(json::parse(R"({"class_count": 3, "nodes": []})"));
  CHECK(g.node_count() == 0);
  CHECK(g.edge_count() == 0);
  auto s = graph_stats(g);
  CHECK(s.num_nodes == 0);
  CHECK(s.avg_degree == 0.0);
  CHECK(s.connected_components == 0);
}

TEST_CASE("validation errors name the offenders") {
  auto dangling = json::parse(R"({"class_count": 1, "nodes": [
    {"node_id": "a", "label": 0, "text": "", "neighbors": ["zz"], "mask": "Train"}]})");
  try {
    graph_from_json(dangling);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("zz") != std::string::npos);
  }
  auto dup = json::parse(R"({"class_count": 1, "nodes": [
    {"node_id": "a", "label": 0, "text": "", "mask": "Train"},
    {"node_id": "a", "label": 0, "text": "", "mask": "Train"}]})");
  CHECK_THROWS_AS(graph_from_json(dup), ValidationError);
  auto label = json::parse(R"({"class_count": 2, "nodes": [{"node_id": "a", "label": 2, "text": "", "mask": "Train"}]})");
  CHECK_THROWS_AS(graph_from_json(label), ValidationError);
  auto mask = json::parse(R"({"class_count": 1, "nodes": [{"node_id": "a", "label": 0, "text": "", "mask": "Dev"}]})");
  CHECK_THROWS_AS(graph_from_json(mask), SchemaError);
}

TEST_CASE("schema errors carry a line number") {
  auto path = temp_path("broken.json");
  write_file_atomic(path, "{\n  \"class_count\": 1,\n  \"nodes\": [\n    {oops}\n  ]\n}\n");
  try {
    load_graph(path);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find(":4:") != std::string::npos);
  }
  auto field = temp_path("field.json");
  write_file_atomic(field, R"({"class_count": 1, "nodes": [{"node_id": "a", "label": "x", "text": ""}]})");
  try {
    load_graph(field);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("nodes[0].label") != std::string::npos);
  }
  CHECK_THROWS_AS(load_graph(temp_path("missing.json")), IoError);
}

TEST_CASE("stats on trivial graphs") {
  auto single = oracle::make_graph(1, {});
  auto s = graph_stats(single);
  CHECK(s.avg_degree == 0.0);
  CHECK(s.density == 0.0);
  CHECK(s.clustering_coefficient == 0.0);
  CHECK(s.connected_components == 1);
  CHECK(s.degree_histogram.at(0) == 1);

  auto k3 = oracle::make_graph(3, {{0, 1}, {1, 2}, {2, 0}});
  auto t = graph_stats(k3);
  CHECK(t.avg_degree == doctest::Approx(2.0));
  CHECK(t.clustering_coefficient == doctest::Approx(1.0));
  CHECK(t.avg_path_length == doctest::Approx(1.0));
  CHECK(t.density == doctest::Approx(1.0));
}

TEST_CASE("stats match naive oracles on random graphs") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const std::size_t n = 2 + seed % 49;
    const double p = 0.02 + 0.2 * static_cast<double>(seed % 7) / 7.0;
    auto g = oracle::random_graph(n, p, seed, 3);
    check_handshake(g);
    auto s = graph_stats(g);
    CHECK(s.clustering_coefficient == doctest::Approx(oracle::mean_clustering(g)).epsilon(1e-12));
    CHECK(s.avg_path_length == doctest::Approx(oracle::lcc_path_length(g)).epsilon(1e-12));
    CHECK(s.avg_degree == doctest::Approx(2.0 * g.edge_count() / n));
    CHECK(s.density == doctest::Approx(2.0 * g.edge_count() / (n * (n - 1.0))));
    std::size_t h = 0, l = 0;
    for (auto [_, c] : s.degree_histogram) h += c;
    for (auto [_, c] : s.label_distribution) l += c;
    CHECK(h == n);
    CHECK(l == n);
  }
}

TEST_CASE("sampled path length stays close to the exact value") {
  auto g = oracle::random_graph(120, 0.05, 99);
  auto exact = graph_stats(g);
  StatsOptions opts;
  opts.exact_path_limit = 10;
  opts.path_sources = 60;
  auto approx = graph_stats(g, opts);
  CHECK(approx.avg_path_length_sampled);
  CHECK(approx.avg_path_length == doctest::Approx(exact.avg_path_length).epsilon(0.05));
}

TEST_CASE("merge with an empty delta is the identity") {
  auto g = oracle::random_graph(5, 0.5, 3);
  auto merged = merge_synthesis(g, {});
  CHECK(graph_to_json(merged) == graph_to_json(g));
}

TEST_CASE("merge attaches bridges and leaves other records alone") {
  auto g = graph_from_json(json::parse(R"({"class_count": 2, "nodes": [
    {"node_id": "A", "label": 0, "text": "alpha", "neighbors": [], "mask": "Train"},
    {"node_id": "B", "label": 1, "text": "beta", "neighbors": [], "mask": "Test"}]})"));
  SynthesizedDelta delta;
  delta.new_nodes.push_back({"S", 1, "synthetic", {}, Mask::Train, false});
  delta.bridge_edges.emplace_back("S", "A");
  auto merged = merge_synthesis(g, delta);
  CHECK(merged.node_count() == 3);
  CHECK(merged.node(merged.index_of("A")).neighbors == std::vector<std::string>{"S"});
  CHECK(merged.node(merged.index_of("B")) == g.node(g.index_of("B")));
  CHECK(g.node_count() == 2);
  CHECK(g.node(0).neighbors.empty());
}

TEST_CASE("merge rejects collisions and dangling bridges") {
  auto g = oracle::make_graph(2, {{0, 1}});
  SynthesizedDelta clash;
  clash.new_nodes.push_back({"1", 0, "x", {}, Mask::Train, false});
  try {
    merge_synthesis(g, clash);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
  SynthesizedDelta dangling;
  dangling.new_nodes.push_back({"s", 0, "x", {}, Mask::Train, false});
  dangling.bridge_edges.emplace_back("s", "42");
  CHECK_THROWS_AS(merge_synthesis(g, dangling), ValidationError);
}

TEST_CASE("merge is monotone on random graphs") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto g = oracle::random_graph(20, 0.1, seed);
    SynthesizedDelta delta;
    for (int k = 0; k < 3; ++k) {
      NodeRecord r{"new_node " + std::to_string(k + 1), 0, "t", {}, Mask::Train, false};
      r.neighbors = {std::to_string((seed + k) % 20), std::to_string((seed * 3 + k) % 20)};
      delta.new_nodes.push_back(r);
    }
    delta.new_internal_edges.emplace_back("new_node 1", "new_node 2");
    auto merged = merge_synthesis(g, delta);
    check_handshake(merged);
    CHECK(merged.node_count() == g.node_count() + 3);
    CHECK(merged.edge_count() > g.edge_count());
    for (NodeIndex i = 0; i < g.node_count(); ++i) {
      const auto& before = g.node(i);
      const auto& after = merged.node(merged.index_of(before.id));
      CHECK(after.text == before.text);
      CHECK(std::equal(before.neighbors.begin(), before.neighbors.end(), after.neighbors.begin()));
    }
  }
}

TEST_CASE("save and load round-trip") {
  auto g = oracle::random_graph(30, 0.1, 7, 4);
  auto path = temp_path("roundtrip.json");
  save_graph(g, path);
  auto back = load_graph(path);
  CHECK(graph_stats(back) == graph_stats(g));
  CHECK(back.edges() == g.edges());
  for (NodeIndex i = 0; i < g.node_count(); ++i) CHECK(back.node(i) == g.node(i));

  auto empty = TextAttributedGraph::build({}, 2);
  save_graph(empty, path);
  CHECK(load_graph(path).node_count() == 0);

  std::vector<NodeRecord> recs{{"x", 0, "Graphe \xc3\xa9tiquet\xc3\xa9 \xe2\x9c\x93 \xf0\x9f\x93\x84", {}, Mask::Validation, false}};
  auto uni = TextAttributedGraph::build(recs, 1);
  save_graph(uni, path);
  CHECK(load_graph(path).node(0).text == recs[0].text);
  CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
}
