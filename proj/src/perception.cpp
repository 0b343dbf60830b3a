#include "tagsynth/perception.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <unordered_set>

#include "tagsynth/error.hpp"

namespace tagsynth {

using nlohmann::json;

std::string_view to_string(EnhancementMode mode) {
  return mode == EnhancementMode::Semantic ? "semantic" : "topological";
}

std::optional<EnhancementMode> parse_mode(std::string_view text) {
  std::string lower;
  for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "semantic") return EnhancementMode::Semantic;
  if (lower == "topological") return EnhancementMode::Topological;
  return std::nullopt;
}

void PerceptionParams::validate() const {
  if (!(mu >= 0.0)) throw ValidationError("mu must be >= 0");
  if (!(teleport_alpha > 0.0 && teleport_alpha < 1.0)) throw ValidationError("teleport_alpha must lie in (0, 1)");
  if (!(ppr_tolerance > 0.0)) throw ValidationError("ppr_tolerance must be > 0");
  if (ppr_max_iters == 0) throw ValidationError("ppr_max_iters must be >= 1");
  if (!(top_k_percent > 0.0 && top_k_percent <= 100.0)) throw ValidationError("top_k_percent must lie in (0, 100]");
  if (!(beta > 0.0)) throw ValidationError("beta must be > 0");
  if (capsule_size == 0) throw ValidationError("capsule_size must be >= 1");
}

std::map<int, double> class_imbalance(const std::map<int, std::size_t>& counts) {
  if (counts.empty()) throw ValidationError("class_imbalance: no classes");
  std::size_t largest = 0;
  for (const auto& [label, count] : counts) {
    if (count == 0) throw ValidationError("class_imbalance: class " + std::to_string(label) + " is empty");
    largest = std::max(largest, count);
  }
  std::map<int, double> out;
  for (const auto& [label, count] : counts) out[label] = static_cast<double>(largest) / static_cast<double>(count);
  return out;
}

std::string Seed::descriptor() const {
  if (community) return "community " + std::to_string(*community);
  if (label) return "minority label " + std::to_string(*label);
  return "unspecified";
}

namespace {

void sort_by_id(const TextAttributedGraph& g, std::vector<NodeIndex>& nodes) {
  std::sort(nodes.begin(), nodes.end(), [&](NodeIndex a, NodeIndex b) { return id_less(g.node(a).id, g.node(b).id); });
}

double mean_dimension_variance(const std::vector<NodeIndex>& members, const TextAttributedGraph& g,
                               const EmbeddingTable& emb) {
  const std::size_t d = emb.dimension();
  std::vector<double> mean(d, 0.0), sq(d, 0.0);
  for (NodeIndex v : members) {
    const auto& x = emb.at(g.node(v).id);
    for (std::size_t k = 0; k < d; ++k) mean[k] += x[k];
  }
  const double n = static_cast<double>(members.size());
  for (auto& m : mean) m /= n;
  for (NodeIndex v : members) {
    const auto& x = emb.at(g.node(v).id);
    for (std::size_t k = 0; k < d; ++k) sq[k] += (x[k] - mean[k]) * (x[k] - mean[k]);
  }
  double total = 0.0;
  for (double s : sq) total += s / n;
  return d ? total / static_cast<double>(d) : 0.0;
}

}  // namespace

Seed select_seed(const TextAttributedGraph& g, const Partition& partition, const EmbeddingTable* embeddings,
                 EnhancementMode mode, const PerceptionParams& params) {
  validate_partition(g, partition);
  if (g.empty()) throw ValidationError("select_seed: empty graph");
  Seed seed;
  seed.mode = mode;

  if (mode == EnhancementMode::Semantic) {
    if (!embeddings) throw ValidationError("semantic seed selection requires embeddings");
    const auto members = partition.members();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < members.size(); ++c) {
      if (members[c].size() < params.seed_min_community_size) continue;
      const double var = mean_dimension_variance(members[c], g, *embeddings);
      const double score = static_cast<double>(members[c].size()) * (1.0 + params.mu * var);
      if (score < best) {
        best = score;
        seed.community = c;
      }
    }
    if (!seed.community)
      throw ValidationError("no community has at least " + std::to_string(params.seed_min_community_size) +
                            " members");
    seed.nodes = members[*seed.community];
    sort_by_id(g, seed.nodes);
    return seed;
  }

  std::map<int, std::vector<NodeIndex>> train_by_label;
  for (NodeIndex i = 0; i < g.node_count(); ++i)
    if (g.node(i).mask == Mask::Train) train_by_label[g.node(i).label].push_back(i);
  if (train_by_label.empty()) throw ValidationError("topological seed selection: graph has no Train nodes");

  const auto all_counts = g.label_distribution();
  std::map<int, std::size_t> counts;
  for (const auto& [label, _] : train_by_label) counts[label] = all_counts.at(label);
  const auto phi = class_imbalance(counts);
  int minority = phi.begin()->first;
  for (const auto& [label, value] : phi)
    if (value > phi.at(minority)) minority = label;
  seed.label = minority;
  seed.nodes = train_by_label[minority];
  sort_by_id(g, seed.nodes);
  return seed;
}

std::vector<double> personalized_pagerank(const TextAttributedGraph& g, std::span<const NodeIndex> seed,
                                          const PerceptionParams& params, PprDiagnostics* diagnostics) {
  params.validate();
  const std::size_t n = g.node_count();
  if (seed.empty()) throw ValidationError("personalized_pagerank: empty seed set");
  std::vector<double> v(n, 0.0);
  std::unordered_set<NodeIndex> unique;
  for (NodeIndex s : seed) {
    if (s >= n) throw ValidationError("personalized_pagerank: seed node out of range");
    unique.insert(s);
  }
  for (NodeIndex s : unique) v[s] = 1.0 / static_cast<double>(unique.size());

  const double alpha = params.teleport_alpha;
  std::vector<double> pi = v, next(n);
  double residual = 0.0;
  for (std::size_t it = 1; it <= params.ppr_max_iters; ++it) {
    double dangling = 0.0;
    for (NodeIndex i = 0; i < n; ++i)
      if (g.degree(i) == 0) dangling += pi[i];
    for (NodeIndex j = 0; j < n; ++j) {
      double inflow = 0.0;
      for (NodeIndex i : g.neighbors(j)) inflow += pi[i] / static_cast<double>(g.degree(i));
      next[j] = alpha * v[j] + (1.0 - alpha) * (inflow + dangling * v[j]);
    }
    residual = 0.0;
    for (NodeIndex j = 0; j < n; ++j) residual += std::abs(next[j] - pi[j]);
    pi.swap(next);
    if (residual < params.ppr_tolerance) {
      double total = 0.0;
      for (double p : pi) total += p;
      for (double& p : pi) p /= total;
      if (diagnostics) *diagnostics = {it, residual};
      return pi;
    }
  }
  throw ConvergenceError("personalized PageRank did not converge in " + std::to_string(params.ppr_max_iters) +
                             " iterations (L1 residual " + std::to_string(residual) + ")",
                         residual);
}

json to_json(const TextAttributedGraph& g, const KnowledgeCapsule& capsule) {
  json nodes = json::array();
  for (std::size_t k = 0; k < capsule.nodes.size(); ++k) {
    const auto& rec = g.node(capsule.nodes[k]);
    nodes.push_back(json{{"node_id", rec.id}, {"label", rec.label}, {"text", rec.text}, {"ppr", capsule.scores[k]}});
  }
  json edges = json::array();
  for (auto [a, b] : capsule.induced_edges) edges.push_back(json::array({g.node(a).id, g.node(b).id}));
  return json{{"seed", capsule.seed_descriptor}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

KnowledgeCapsule sample_knowledge(const TextAttributedGraph& g, std::span<const double> pi,
                                  const Partition* partition, const PerceptionParams& params, std::uint64_t seed,
                                  SampleDiagnostics* diagnostics) {
  params.validate();
  const std::size_t n = g.node_count();
  if (pi.empty()) throw ValidationError("sample_knowledge: empty score vector");
  if (pi.size() != n) throw ValidationError("sample_knowledge: score vector does not cover the graph");
  if (partition) validate_partition(g, *partition);

  auto before = [&](NodeIndex a, NodeIndex b) {
    if (pi[a] != pi[b]) return pi[a] > pi[b];
    return id_less(g.node(a).id, g.node(b).id);
  };
  std::vector<NodeIndex> ranked(n);
  for (NodeIndex i = 0; i < n; ++i) ranked[i] = i;
  std::sort(ranked.begin(), ranked.end(), before);

  SampleDiagnostics diag;
  const auto k = static_cast<std::size_t>(std::ceil(params.top_k_percent / 100.0 * static_cast<double>(n) - 1e-9));
  diag.top_k.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(k, 1, n)));

  const double max_pi = pi[ranked.front()];
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (NodeIndex v : diag.top_k) {
    const double r = uniform(rng);  // one draw per candidate, in rank order
    const double keep = max_pi > 0.0 ? std::min(1.0, params.beta * pi[v] / max_pi) : 1.0;
    if (r < keep) diag.retained.push_back(v);
  }
  diag.fallback = diag.retained.empty();

  if (partition && partition->community_count > 0) {
    const auto members = partition->members();
    std::vector<std::size_t> order(members.size());
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return members[a].size() > members[b].size(); });
    const std::size_t want = std::min<std::size_t>(
        members.size(), (params.capsule_size + 4) / 5);
    for (std::size_t t = 0; t < want; ++t) {
      const auto& m = members[order[t]];
      diag.diverse.push_back(*std::min_element(m.begin(), m.end(), before));
    }
    std::sort(diag.diverse.begin(), diag.diverse.end(), before);
  }

  std::unordered_set<NodeIndex> candidates(diag.top_k.begin(), diag.top_k.end());
  candidates.insert(diag.diverse.begin(), diag.diverse.end());
  const std::size_t target = std::min(params.capsule_size, candidates.size());

  std::vector<NodeIndex> chosen;
  std::unordered_set<NodeIndex> taken;
  auto take = [&](const std::vector<NodeIndex>& pool) {
    for (NodeIndex v : pool) {
      if (chosen.size() >= target) return;
      if (taken.insert(v).second) chosen.push_back(v);
    }
  };
  take(diag.diverse);
  take(diag.retained);
  take(diag.top_k);
  std::sort(chosen.begin(), chosen.end(), before);

  KnowledgeCapsule capsule;
  capsule.nodes = chosen;
  for (NodeIndex v : chosen) capsule.scores.push_back(pi[v]);
  for (std::size_t a = 0; a < chosen.size(); ++a)
    for (std::size_t b = a + 1; b < chosen.size(); ++b)
      if (g.has_edge(chosen[a], chosen[b])) capsule.induced_edges.emplace_back(chosen[a], chosen[b]);
  if (diagnostics) *diagnostics = std::move(diag);
  return capsule;
}

}  // namespace tagsynth
