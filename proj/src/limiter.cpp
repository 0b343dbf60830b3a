#include "tagsynth/limiter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tagsynth/error.hpp"

namespace tagsynth {

using nlohmann::json;

void LimiterParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0))
    throw ValidationError("lambda weights must be nonnegative");
  if (std::abs(lambda1 + lambda2 + lambda3 - 1.0) > 1e-9) throw ValidationError("lambda weights must sum to 1");
}

std::pair<double, double> connectivity_profile(const TextAttributedGraph& g) {
  if (g.empty()) return {0.0, 0.0};
  const auto c = connected_components(g);
  const double n = static_cast<double>(g.node_count());
  return {static_cast<double>(c.count()) / n, static_cast<double>(c.largest_size()) / n};
}

double profile_distortion(std::pair<double, double> a, std::pair<double, double> b) {
  return std::abs(a.first - b.first) + std::abs(a.second - b.second);
}

PropertyTensor property_tensor(const TextAttributedGraph& g, const SpectrumOptions& options) {
  PropertyTensor t;
  for (NodeIndex i = 0; i < g.node_count(); ++i) ++t.degree_histogram[g.degree(i)];
  t.label_distribution = g.label_distribution();
  t.top_spectral = normalized_laplacian_spectrum(g, options);
  t.component_profile = connectivity_profile(g);
  return t;
}

json to_json(const PropertyTensor& t) {
  json hist = json::object();
  for (const auto& [d, c] : t.degree_histogram) hist[std::to_string(d)] = c;
  json labels = json::object();
  for (const auto& [l, c] : t.label_distribution) labels[std::to_string(l)] = c;
  return json{{"degree_distribution", std::move(hist)},
              {"label_distribution", std::move(labels)},
              {"top_spectral", t.top_spectral},
              {"component_profile", json::array({t.component_profile.first, t.component_profile.second})}};
}

std::vector<double> node_weights(const TextAttributedGraph& g, std::span<const NodeIndex> cell,
                                 const std::vector<char>& selected, const Partition& partition,
                                 const LimiterParams& params) {
  const double max_degree = static_cast<double>(g.max_degree());
  const auto sizes = partition.sizes();
  std::vector<std::size_t> chosen(partition.community_count, 0);
  for (NodeIndex i = 0; i < g.node_count(); ++i)
    if (selected[i]) ++chosen[partition.community_of[i]];

  std::vector<double> out;
  out.reserve(cell.size());
  for (NodeIndex v : cell) {
    const auto c = partition.community_of[v];
    const double degree_term = max_degree > 0.0 ? static_cast<double>(g.degree(v)) / max_degree : 0.0;
    const double coverage = 1.0 - static_cast<double>(chosen[c]) / static_cast<double>(sizes[c]);
    double bridge = 0.0;
    if (g.degree(v) > 0) {
      std::size_t outside = 0;
      for (NodeIndex w : g.neighbors(v)) outside += partition.community_of[w] != c;
      bridge = static_cast<double>(outside) / static_cast<double>(g.degree(v));
    }
    out.push_back(params.lambda1 * degree_term + params.lambda2 * coverage + params.lambda3 * bridge);
  }
  return out;
}

namespace {

// Largest-remainder split of `total` proportionally to `sizes`; ties go to
// the earlier entry.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& sizes) {
  const std::size_t sum = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::vector<std::size_t> out(sizes.size(), 0);
  if (sum == 0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double exact = static_cast<double>(total) * static_cast<double>(sizes[i]) / static_cast<double>(sum);
    out[i] = static_cast<std::size_t>(std::floor(exact + 1e-12));
    out[i] = std::min(out[i], sizes[i]);
    assigned += out[i];
    remainders.emplace_back(exact - static_cast<double>(out[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k) {
    const auto i = remainders[k].second;
    if (out[i] < sizes[i]) {
      ++out[i];
      ++assigned;
    }
  }
  return out;
}

std::map<Cell, std::vector<NodeIndex>> cells_of(const TextAttributedGraph& g, const Partition& partition) {
  std::map<Cell, std::vector<NodeIndex>> cells;
  for (NodeIndex v : g.canonical_order()) cells[{g.node(v).label, partition.community_of[v]}].push_back(v);
  return cells;
}

// Components, articulation points and degrees of g restricted to `in`.
struct Restricted {
  std::vector<std::size_t> comp;  // per node of g; unset outside
  std::vector<std::size_t> size;
  std::vector<char> articulation;
  std::vector<std::size_t> degree;
  std::vector<std::size_t> by_size;  // component ids, size descending
};

constexpr auto kUnset = static_cast<std::size_t>(-1);

Restricted analyse(const TextAttributedGraph& g, const std::vector<char>& in) {
  const std::size_t n = g.node_count();
  Restricted r;
  r.comp.assign(n, kUnset);
  r.articulation.assign(n, 0);
  r.degree.assign(n, 0);
  std::vector<std::size_t> disc(n, 0), low(n, 0), parent(n, kUnset), next_edge(n, 0), children(n, 0);
  std::size_t timer = 0;
  for (NodeIndex v = 0; v < n; ++v) {
    if (!in[v]) continue;
    for (NodeIndex w : g.neighbors(v)) r.degree[v] += in[w] != 0;
  }
  std::vector<NodeIndex> stack;
  for (NodeIndex root = 0; root < n; ++root) {
    if (!in[root] || r.comp[root] != kUnset) continue;
    const std::size_t id = r.size.size();
    r.size.push_back(0);
    r.comp[root] = id;
    disc[root] = low[root] = ++timer;
    ++r.size[id];
    stack.push_back(root);
    while (!stack.empty()) {
      const NodeIndex v = stack.back();
      const auto nbrs = g.neighbors(v);
      if (next_edge[v] < nbrs.size()) {
        const NodeIndex w = nbrs[next_edge[v]++];
        if (!in[w]) continue;
        if (r.comp[w] == kUnset) {
          r.comp[w] = id;
          ++r.size[id];
          parent[w] = v;
          ++children[v];
          disc[w] = low[w] = ++timer;
          stack.push_back(w);
        } else if (w != parent[v]) {
          low[v] = std::min(low[v], disc[w]);
        }
        continue;
      }
      stack.pop_back();
      const NodeIndex p = parent[v];
      if (p != kUnset) {
        low[p] = std::min(low[p], low[v]);
        if (parent[p] != kUnset && low[v] >= disc[p]) r.articulation[p] = 1;
      }
    }
    if (children[root] > 1) r.articulation[root] = 1;
  }
  r.by_size.resize(r.size.size());
  std::iota(r.by_size.begin(), r.by_size.end(), std::size_t{0});
  std::stable_sort(r.by_size.begin(), r.by_size.end(), [&](auto a, auto b) { return r.size[a] > r.size[b]; });
  return r;
}

std::pair<double, double> profile_of(const Restricted& r, std::size_t n_sel) {
  if (n_sel == 0) return {0.0, 0.0};
  const double n = static_cast<double>(n_sel);
  return {static_cast<double>(r.size.size()) / n, r.by_size.empty() ? 0.0 : static_cast<double>(r.size[r.by_size[0]]) / n};
}

// Top `take` entries from both ends of `ranked`, without duplicates.
std::vector<NodeIndex> both_ends(const std::vector<NodeIndex>& ranked, std::size_t take) {
  std::vector<NodeIndex> out;
  for (std::size_t k = 0; k < ranked.size() && k < take; ++k) out.push_back(ranked[k]);
  for (std::size_t k = 0; k < ranked.size() && k < take / 2; ++k) {
    const NodeIndex v = ranked[ranked.size() - 1 - k];
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

}  // namespace

std::map<Cell, std::size_t> cell_targets(const TextAttributedGraph& g, const Partition& partition, double alpha) {
  validate_partition(g, partition);
  const auto total = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(g.node_count()) + 1e-9));
  const auto cells = cells_of(g, partition);

  std::vector<int> labels;
  std::vector<std::size_t> label_sizes;
  for (const auto& [label, count] : g.label_distribution()) {
    labels.push_back(label);
    label_sizes.push_back(count);
  }
  const auto per_label = apportion(total, label_sizes);

  std::map<Cell, std::size_t> out;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    std::vector<Cell> keys;
    std::vector<std::size_t> sizes;
    for (auto it = cells.lower_bound({labels[k], 0}); it != cells.end() && it->first.first == labels[k]; ++it) {
      keys.push_back(it->first);
      sizes.push_back(it->second.size());
    }
    const auto split = apportion(per_label[k], sizes);
    for (std::size_t c = 0; c < keys.size(); ++c) out[keys[c]] = split[c];
  }
  return out;
}

RepairReport connectivity_repair(const TextAttributedGraph& g, std::vector<NodeIndex>& selected,
                                 const Partition& partition, const LimiterParams& params) {
  params.validate();
  validate_partition(g, partition);
  const std::size_t n = g.node_count();
  const std::size_t n_sel = selected.size();
  const auto target = connectivity_profile(g);

  std::vector<char> in(n, 0);
  for (NodeIndex v : selected) in.at(v) = 1;
  const auto cells = cells_of(g, partition);
  std::vector<std::size_t> rank(n);
  {
    const auto order = g.canonical_order();
    for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = k;
  }

  RepairReport report;
  Restricted state = analyse(g, in);
  double current = profile_distortion(profile_of(state, n_sel), target);
  report.initial_distortion = current;
  const std::size_t max_swaps = params.max_repair_swaps.value_or(2 * n_sel);
  bool any_candidates = false;
  std::vector<std::pair<std::size_t, std::size_t>> bridge_key(n);

  while (current > params.epsilon && report.swaps < max_swaps) {
    double best_gain = 0.0;
    NodeIndex best_b = 0, best_r = 0;
    bool found = false;
    std::vector<std::size_t> adj;

    for (const auto& [cell, members] : cells) {
      std::vector<NodeIndex> inside, outside;
      for (NodeIndex v : members) {
        if (in[v]) {
          if (!state.articulation[v]) inside.push_back(v);
        } else {
          outside.push_back(v);
        }
      }
      if (inside.empty() || outside.empty()) continue;
      any_candidates = true;

      std::sort(inside.begin(), inside.end(), [&](NodeIndex a, NodeIndex b) {
        auto key = [&](NodeIndex v) {
          return std::make_tuple(state.degree[v] > 0, state.size[state.comp[v]], state.degree[v], rank[v]);
        };
        return key(a) < key(b);
      });
      for (NodeIndex b : outside) {
        adj.clear();
        for (NodeIndex w : g.neighbors(b))
          if (in[w] && std::find(adj.begin(), adj.end(), state.comp[w]) == adj.end()) adj.push_back(state.comp[w]);
        std::size_t total = 0;
        for (auto c : adj) total += state.size[c];
        bridge_key[b] = {adj.size(), total};
      }
      std::sort(outside.begin(), outside.end(), [&](NodeIndex a, NodeIndex b) {
        if (bridge_key[a] != bridge_key[b]) return bridge_key[a] > bridge_key[b];
        return rank[a] < rank[b];
      });

      for (NodeIndex b : both_ends(outside, params.repair_candidates)) {
        for (NodeIndex r : both_ends(inside, params.repair_candidates)) {
          adj.clear();
          for (NodeIndex w : g.neighbors(b))
            if (in[w] && w != r && std::find(adj.begin(), adj.end(), state.comp[w]) == adj.end())
              adj.push_back(state.comp[w]);
          const std::size_t rc = state.comp[r];
          const bool r_isolated = state.degree[r] == 0;
          auto after = [&](std::size_t c) { return state.size[c] - (c == rc ? 1 : 0); };
          std::size_t merged = 1;
          for (auto c : adj) merged += after(c);
          std::size_t rest = 0;
          for (auto c : state.by_size) {
            if (std::find(adj.begin(), adj.end(), c) != adj.end()) continue;
            if (c == rc) {
              rest = std::max(rest, after(c));
              continue;
            }
            rest = std::max(rest, state.size[c]);
            break;
          }
          const std::size_t count = state.size.size() - (r_isolated ? 1 : 0) - adj.size() + 1;
          const double ns = static_cast<double>(n_sel);
          const std::pair<double, double> next{static_cast<double>(count) / ns,
                                               static_cast<double>(std::max(merged, rest)) / ns};
          const double gain = current - profile_distortion(next, target);
          if (gain > best_gain + 1e-15) {
            best_gain = gain;
            best_b = b;
            best_r = r;
            found = true;
          }
        }
      }
    }
    if (!found) break;

    in[best_r] = 0;
    in[best_b] = 1;
    Restricted next = analyse(g, in);
    const double after = profile_distortion(profile_of(next, n_sel), target);
    if (!(after < current)) {
      in[best_b] = 0;
      in[best_r] = 1;
      report.warnings.push_back("swap verification failed; repair stopped");
      break;
    }
    std::replace(selected.begin(), selected.end(), best_r, best_b);
    state = std::move(next);
    current = after;
    ++report.swaps;
    report.distortion_trace.push_back(current);
  }
  if (!any_candidates && report.initial_distortion > params.epsilon)
    report.warnings.push_back("no same-cell swap candidates; connectivity left unrepaired");
  report.final_distortion = current;
  std::sort(selected.begin(), selected.end());
  return report;
}

LimitResult sample_limited(const TextAttributedGraph& g, const Partition& partition, const LimiterParams& params,
                           std::uint64_t seed) {
  params.validate();
  if (g.empty()) throw ValidationError("cannot sample an empty graph");
  validate_partition(g, partition);
  if (params.alpha * static_cast<double>(g.node_count()) + 1e-9 < 1.0)
    throw ValidationError("alpha * n must be at least 1");

  LimitResult result;
  result.targets = cell_targets(g, partition, params.alpha);
  const auto cells = cells_of(g, partition);

  // Random tie-break rank drawn once over the canonical order.
  std::vector<std::size_t> tie(g.node_count());
  {
    auto order = g.canonical_order();
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < order.size(); ++k) tie[order[k]] = k;
  }

  std::vector<char> chosen(g.node_count(), 0);
  for (const auto& [cell, members] : cells) {
    const std::size_t want = result.targets.at(cell);
    if (want >= members.size()) {
      for (NodeIndex v : members) chosen[v] = 1;
      continue;
    }
    const auto omega = node_weights(g, members, chosen, partition, params);
    std::vector<std::size_t> idx(members.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      if (omega[a] != omega[b]) return omega[a] > omega[b];
      return tie[members[a]] < tie[members[b]];
    });
    for (std::size_t k = 0; k < want; ++k) chosen[members[idx[k]]] = 1;
  }
  for (NodeIndex v = 0; v < g.node_count(); ++v)
    if (chosen[v]) result.selected.push_back(v);

  result.repair = connectivity_repair(g, result.selected, partition, params);
  result.graph = g.induced(result.selected);
  return result;
}

json limit_sidecar(const TextAttributedGraph& original, const LimitResult& result, const LimiterParams& params,
                   std::uint64_t seed, const SpectrumOptions& options) {
  const auto before = property_tensor(original, options);
  const auto after = property_tensor(result.graph, options);
  return json{{"alpha", params.alpha},
              {"epsilon", params.epsilon},
              {"seed", seed},
              {"target_size", result.selected.size()},
              {"original", to_json(before)},
              {"sample", to_json(after)},
              {"distortion_initial", result.repair.initial_distortion},
              {"distortion", result.repair.final_distortion},
              {"swaps", result.repair.swaps},
              {"warnings", result.repair.warnings}};
}

}  // namespace tagsynth
