#include <doctest.h>

#include <set>

#include "../oracles.hpp"
#include "tagsynth/error.hpp"
#include "tagsynth/limiter.hpp"

using namespace tagsynth;

namespace {

Partition whole(const TextAttributedGraph& g) {
  Partition p;
  p.community_of.assign(g.node_count(), 0);
  p.community_count = 1;
  return p;
}

std::map<Cell, std::size_t> counts_of(const TextAttributedGraph& g, const Partition& p,
                                      const std::vector<NodeIndex>& sel) {
  std::map<Cell, std::size_t> out;
  for (auto v : sel) ++out[{g.node(v).label, p.community_of[v]}];
  return out;
}

}  // namespace

TEST_CASE("node weight examples") {
  // 0 isolated; 1-2-3 star centered at 1 in community 1; 4 bridges into it.
  auto g = oracle::make_graph(5, {{1, 2}, {1, 3}, {4, 2}});
  Partition p;
  p.community_of = {0, 1, 1, 1, 2};
  p.community_count = 3;
  std::vector<char> none(5, 0);
  LimiterParams params;
  std::vector<NodeIndex> isolated{0};
  CHECK(node_weights(g, isolated, none, p, params)[0] == doctest::Approx(1.0 / 3.0));

  std::vector<char> community_taken{0, 1, 1, 1, 0};
  std::vector<NodeIndex> hub{1};
  CHECK(node_weights(g, hub, community_taken, p, params)[0] == doctest::Approx(params.lambda1));

  LimiterParams bridge_only{.lambda1 = 0, .lambda2 = 0, .lambda3 = 1};
  std::vector<NodeIndex> bridge{4};
  CHECK(node_weights(g, bridge, none, p, bridge_only)[0] == doctest::Approx(1.0));

  for (double w : node_weights(g, std::vector<NodeIndex>{0, 1, 2, 3, 4}, none, p, params)) {
    CHECK(w >= 0.0);
    CHECK(w <= 1.0);
  }
}

TEST_CASE("cell targets use largest remainder") {
  std::vector<int> labels{0, 0, 0, 0, 0, 0, 1, 1, 1, 1};
  auto g = oracle::make_graph(10, {}, labels, 2);
  auto t = cell_targets(g, whole(g), 0.5);
  CHECK(t.at({0, 0}) == 3);
  CHECK(t.at({1, 0}) == 2);

  auto r = oracle::random_graph(101, 0.05, 4, 5);
  Partition p = detect_communities(r, nullptr, {.gamma = 1.0}, 1);
  for (double alpha : {0.1, 0.33, 0.5, 0.77}) {
    auto targets = cell_targets(r, p, alpha);
    std::size_t total = 0;
    std::map<int, std::size_t> per_label;
    for (auto [cell, k] : targets) {
      total += k;
      per_label[cell.first] += k;
    }
    CHECK(total == static_cast<std::size_t>(std::floor(alpha * 101 + 1e-9)));
    for (auto [label, count] : r.label_distribution()) {
      const double floor_target = std::floor(alpha * static_cast<double>(count));
      CHECK(std::abs(static_cast<double>(per_label[label]) - floor_target) <= 1.0);
    }
  }
}

TEST_CASE("alpha one returns the input graph") {
  auto g = oracle::random_graph(40, 0.08, 5, 3);
  auto p = detect_communities(g, nullptr, {.gamma = 1.0}, 1);
  auto r = sample_limited(g, p, {.alpha = 1.0}, 7);
  CHECK(r.repair.swaps == 0);
  CHECK(graph_to_json(r.graph) == graph_to_json(g));
}

TEST_CASE("sample size and cell counts are exact") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    auto g = oracle::random_graph(150, 0.02, seed, 4);
    auto p = detect_communities(g, nullptr, {.gamma = 1.0}, seed);
    const double alpha = 0.3 + 0.05 * static_cast<double>(seed % 5);
    LimiterParams params{.alpha = alpha};
    auto r = sample_limited(g, p, params, seed);
    CHECK(r.selected.size() == static_cast<std::size_t>(std::floor(alpha * 150 + 1e-9)));
    CHECK(r.graph.node_count() == r.selected.size());
    auto counts = counts_of(g, p, r.selected);
    for (auto [cell, k] : r.targets) CHECK(counts[cell] == k);
    for (std::size_t k = 1; k < r.repair.distortion_trace.size(); ++k)
      CHECK(r.repair.distortion_trace[k] < r.repair.distortion_trace[k - 1]);
    if (!r.repair.distortion_trace.empty()) CHECK(r.repair.distortion_trace.front() < r.repair.initial_distortion);
    for (auto v : r.selected) CHECK(r.graph.node(r.graph.index_of(g.node(v).id)).mask == g.node(v).mask);
  }
}

TEST_CASE("one swap reconnects a split sample") {
  auto g = oracle::make_graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {5, 0}});
  std::vector<NodeIndex> sel{0, 1, 3, 4};
  auto before = connectivity_profile(g.induced(sel));
  auto report = connectivity_repair(g, sel, whole(g), {});
  CHECK(report.swaps == 1);
  CHECK(report.final_distortion < report.initial_distortion);
  CHECK(std::count(sel.begin(), sel.end(), 2) == 1);
  CHECK(connectivity_profile(g.induced(sel)).first < before.first);
}

TEST_CASE("repair is a no-op within epsilon or without candidates") {
  auto g = oracle::make_graph(4, {{0, 1}, {1, 2}, {2, 3}});
  std::vector<NodeIndex> sel{0, 1, 2};
  auto report = connectivity_repair(g, sel, whole(g), {});
  CHECK(report.swaps == 0);
  CHECK(sel == std::vector<NodeIndex>{0, 1, 2});
  CHECK(report.warnings.empty());

  // Every node in its own label: no same-cell swap exists.
  auto split = oracle::make_graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}, {0, 1, 2, 3, 4, 5}, 6);
  std::vector<NodeIndex> apart{0, 2, 4};
  auto none = connectivity_repair(split, apart, whole(split), {});
  CHECK(none.swaps == 0);
  CHECK(none.warnings.size() == 1);
}

TEST_CASE("normalized Laplacian spectra") {
  auto k3 = oracle::make_graph(3, {{0, 1}, {1, 2}, {2, 0}});
  auto ev = normalized_laplacian_spectrum(k3);
  REQUIRE(ev.size() == 3);
  CHECK(ev[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ev[1] == doctest::Approx(1.5));
  CHECK(ev[2] == doctest::Approx(1.5));
  auto p2 = normalized_laplacian_spectrum(oracle::make_graph(2, {{0, 1}}));
  REQUIRE(p2.size() == 2);
  CHECK(p2[0] == doctest::Approx(0.0));
  CHECK(p2[1] == doctest::Approx(2.0));

  auto g = oracle::random_graph(500, 0.012, 21);
  auto dense = normalized_laplacian_spectrum(g);
  SpectrumOptions lanczos;
  lanczos.dense_limit = 10;
  auto approx = normalized_laplacian_spectrum(g, lanczos);
  REQUIRE(dense.size() == 10);
  REQUIRE(approx.size() == 10);
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(std::abs(dense[k] - approx[k]) < 1e-6);
    CHECK(dense[k] >= 0.0);
    CHECK(dense[k] <= 2.0);
    if (k) CHECK(dense[k] >= dense[k - 1]);
  }
}

TEST_CASE("sidecar carries both tensors") {
  auto g = oracle::random_graph(60, 0.06, 31, 2);
  auto p = detect_communities(g, nullptr, {.gamma = 1.0}, 1);
  LimiterParams params;
  auto r = sample_limited(g, p, params, 3);
  auto j = limit_sidecar(g, r, params, 3);
  CHECK(j["target_size"] == 30);
  CHECK(j["original"]["top_spectral"].size() == 10);
  CHECK(j["distortion"].get<double>() <= j["distortion_initial"].get<double>());
}

TEST_CASE("invalid limiter input") {
  auto g = oracle::random_graph(10, 0.2, 1);
  CHECK_THROWS_AS(sample_limited(g, whole(g), {.alpha = 0.05}, 1), ValidationError);
  CHECK_THROWS_AS(sample_limited(g, whole(g), {.alpha = 0.5, .lambda1 = 0.9}, 1), ValidationError);
  auto empty = TextAttributedGraph::build({}, 1);
  Partition none;
  CHECK_THROWS_AS(sample_limited(empty, none, {}, 1), ValidationError);
}
