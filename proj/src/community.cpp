#include "tagsynth/community.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "tagsynth/error.hpp"

namespace tagsynth {

using nlohmann::json;

void EmbeddingTable::insert(std::string id, std::vector<double> vector) {
  if (vector.empty()) throw ValidationError("empty embedding for node " + id);
  if (dimension_ == 0) dimension_ = vector.size();
  if (vector.size() != dimension_)
    throw ValidationError("embedding for node " + id + " has dimension " + std::to_string(vector.size()) +
                          ", expected " + std::to_string(dimension_));
  double norm2 = 0.0;
  for (double v : vector) {
    if (!std::isfinite(v)) throw ValidationError("non-finite embedding value for node " + id);
    norm2 += v * v;
  }
  if (norm2 <= 0.0) throw ValidationError("zero-norm embedding for node " + id);
  rows_.insert_or_assign(std::move(id), std::move(vector));
}

const std::vector<double>* EmbeddingTable::find(std::string_view id) const {
  auto it = rows_.find(std::string(id));
  return it == rows_.end() ? nullptr : &it->second;
}

const std::vector<double>& EmbeddingTable::at(std::string_view id) const {
  const auto* row = find(id);
  if (!row) throw ValidationError("missing embedding for node " + std::string(id));
  return *row;
}

EmbeddingTable embeddings_from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaError("embeddings: expected object mapping node_id to vector");
  EmbeddingTable table;
  for (const auto& [id, row] : doc.items()) {
    if (!row.is_array()) throw SchemaError("embeddings." + id + ": expected array of numbers");
    std::vector<double> v;
    v.reserve(row.size());
    for (const auto& x : row) {
      if (!x.is_number()) throw SchemaError("embeddings." + id + ": expected array of numbers");
      v.push_back(x.get<double>());
    }
    table.insert(id, std::move(v));
  }
  return table;
}

json to_json(const EmbeddingTable& table) {
  std::vector<std::string> ids;
  for (const auto& [id, _] : table) ids.push_back(id);
  std::sort(ids.begin(), ids.end(), [](const auto& a, const auto& b) { return id_less(a, b); });
  json out = json::object();
  for (const auto& id : ids) out[id] = table.at(id);
  return out;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  try {
    return embeddings_from_json(read_json_file(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ValidationError("cosine_similarity: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) throw ValidationError("cosine_similarity: zero-norm vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<std::vector<NodeIndex>> Partition::members() const {
  std::vector<std::vector<NodeIndex>> out(community_count);
  for (NodeIndex i = 0; i < community_of.size(); ++i) out.at(community_of[i]).push_back(i);
  return out;
}

std::vector<std::size_t> Partition::sizes() const {
  std::vector<std::size_t> out(community_count, 0);
  for (auto c : community_of) ++out.at(c);
  return out;
}

void validate_partition(const TextAttributedGraph& g, const Partition& p) {
  if (p.community_of.size() != g.node_count())
    throw ValidationError("partition covers " + std::to_string(p.community_of.size()) + " nodes, graph has " +
                          std::to_string(g.node_count()));
  std::vector<char> used(p.community_count, 0);
  for (auto c : p.community_of) {
    if (c >= p.community_count) throw ValidationError("partition community index out of range");
    used[c] = 1;
  }
  if (std::find(used.begin(), used.end(), 0) != used.end())
    throw ValidationError("partition community indices are not contiguous");
}

Partition canonicalize(const TextAttributedGraph& g, const Partition& p) {
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> relabel(p.community_count, unset);
  Partition out;
  out.community_of.resize(p.community_of.size());
  for (NodeIndex i : g.canonical_order()) {
    auto& r = relabel.at(p.community_of[i]);
    if (r == unset) r = out.community_count++;
  }
  for (NodeIndex i = 0; i < p.community_of.size(); ++i) out.community_of[i] = relabel[p.community_of[i]];
  return out;
}

Partition singleton_partition(const TextAttributedGraph& g) {
  Partition p;
  p.community_of.resize(g.node_count());
  std::iota(p.community_of.begin(), p.community_of.end(), std::size_t{0});
  p.community_count = g.node_count();
  return canonicalize(g, p);
}

namespace {

double dot(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += a[k] * b[k];
  return s;
}

// Unit-normalized embeddings in node-index order plus the pairwise semantic
// kernel d(i, j) and its all-pairs normalizer.
class SemanticModel {
 public:
  SemanticModel(const TextAttributedGraph& g, const EmbeddingTable& emb, const ModularityParams& params,
                bool allow_sampling, std::uint64_t seed)
      : n_(g.node_count()), dim_(emb.dimension()), term_(params.semantic_term) {
    unit_.resize(n_ * dim_);
    bool nonnegative = true;
    for (NodeIndex i = 0; i < n_; ++i) {
      const auto& row = emb.at(g.node(i).id);
      double norm = std::sqrt(dot(row.data(), row.data(), dim_));
      for (std::size_t k = 0; k < dim_; ++k) {
        unit_[i * dim_ + k] = row[k] / norm;
        if (row[k] < 0.0) nonnegative = false;
      }
    }
    // With nonnegative coordinates every cosine is >= 0 and the clamp is inert.
    linear_ = term_ == SemanticTerm::Distance || nonnegative;

    if (linear_) {
      std::vector<double> total(dim_, 0.0);
      for (NodeIndex i = 0; i < n_; ++i)
        for (std::size_t k = 0; k < dim_; ++k) total[k] += unit_[i * dim_ + k];
      const double s2 = dot(total.data(), total.data(), dim_);
      normalizer_ = term_ == SemanticTerm::Similarity ? s2 : static_cast<double>(n_) * static_cast<double>(n_) - s2;
    } else if (!allow_sampling || n_ <= params.exact_normalizer_limit) {
      double off = 0.0;
      for (NodeIndex i = 0; i < n_; ++i)
        for (NodeIndex j = i + 1; j < n_; ++j) off += pair(i, j);
      normalizer_ = 2.0 * off + static_cast<double>(n_) * pair(0, 0);
    } else {
      std::mt19937_64 rng(seed ^ 0x5eedc0ffee123457ULL);
      std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
      double total = 0.0;
      const std::size_t samples = std::max<std::size_t>(1, params.normalizer_sample_pairs);
      for (std::size_t s = 0; s < samples; ++s) total += pair(pick(rng), pick(rng));
      normalizer_ = static_cast<double>(n_) * static_cast<double>(n_) * total / static_cast<double>(samples);
      sampled_ = true;
      sampled_pairs_ = samples;
    }
  }

  double pair(NodeIndex i, NodeIndex j) const {
    const double c = std::clamp(dot(&unit_[i * dim_], &unit_[j * dim_], dim_), -1.0, 1.0);
    return term_ == SemanticTerm::Similarity ? std::max(0.0, c) : 1.0 - c;
  }

  // Sum over ordered member pairs given per-group unit-vector sums.
  double linear_pair_sum(const double* sum_a, double count_a, const double* sum_b, double count_b) const {
    const double s = dot(sum_a, sum_b, dim_);
    return term_ == SemanticTerm::Similarity ? s : count_a * count_b - s;
  }

  const double* unit(NodeIndex i) const { return &unit_[i * dim_]; }
  std::size_t dim() const { return dim_; }
  bool linear() const { return linear_; }
  double normalizer() const { return normalizer_; }
  bool sampled() const { return sampled_; }

 private:
  std::size_t n_;
  std::size_t dim_;
  SemanticTerm term_;
  std::vector<double> unit_;
  bool linear_ = false;
  double normalizer_ = 0.0;
  bool sampled_ = false;
  std::size_t sampled_pairs_ = 0;
};

double community_semantic_sum(const SemanticModel& sem, const std::vector<NodeIndex>& members) {
  if (sem.linear()) {
    std::vector<double> s(sem.dim(), 0.0);
    for (NodeIndex i : members)
      for (std::size_t k = 0; k < sem.dim(); ++k) s[k] += sem.unit(i)[k];
    const double c = static_cast<double>(members.size());
    return sem.linear_pair_sum(s.data(), c, s.data(), c);
  }
  double total = 0.0;
  for (std::size_t a = 0; a < members.size(); ++a) {
    total += sem.pair(members[a], members[a]);
    for (std::size_t b = a + 1; b < members.size(); ++b) total += 2.0 * sem.pair(members[a], members[b]);
  }
  return total;
}

void check_params(const ModularityParams& params) {
  if (!(params.gamma >= 0.0 && params.gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
}

struct Level {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj;  // no self-loops
  std::vector<double> degree;
  std::vector<std::vector<NodeIndex>> members;
  std::vector<std::vector<double>> sum;  // linear semantic model only
};

class Louvain {
 public:
  Louvain(const TextAttributedGraph& g, const SemanticModel* sem, const ModularityParams& params,
          std::uint64_t seed)
      : g_(g), sem_(sem), gamma_(params.gamma), rng_(seed) {
    two_m_ = 2.0 * static_cast<double>(g.edge_count());
    use_sem_ = sem_ && gamma_ < 1.0 && sem_->normalizer() > 0.0;
    rank_.resize(g.node_count());
    order_ = g.canonical_order();
    for (std::size_t r = 0; r < order_.size(); ++r) rank_[order_[r]] = r;
  }

  std::vector<std::size_t> run(DetectionDiagnostics& diag) {
    Level level = initial_level();
    // Level node k always maps to a set of original nodes.
    for (std::size_t depth = 0; depth < 64; ++depth) {
      std::vector<std::size_t> comm = local_moving(level, diag.moves);
      diag.levels = depth + 1;
      bool merged = false;
      for (std::size_t k = 0; k < comm.size() && !merged; ++k) merged = comm[k] != k;
      if (!merged) break;
      level = aggregate(level, comm);
    }
    std::vector<std::size_t> out(g_.node_count());
    for (std::size_t c = 0; c < level.members.size(); ++c)
      for (NodeIndex v : level.members[c]) out[v] = c;
    return out;
  }

 private:
  Level initial_level() {
    Level L;
    const std::size_t n = g_.node_count();
    L.adj.resize(n);
    L.degree.resize(n);
    L.members.resize(n);
    if (use_sem_ && sem_->linear()) L.sum.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const NodeIndex v = order_[k];
      L.members[k] = {v};
      L.degree[k] = static_cast<double>(g_.degree(v));
      for (NodeIndex w : g_.neighbors(v)) L.adj[k].emplace_back(rank_[w], 1.0);
      if (!L.sum.empty()) L.sum[k].assign(sem_->unit(v), sem_->unit(v) + sem_->dim());
    }
    return L;
  }

  double pair_sum(const Level& L, std::size_t a, std::size_t b) const {
    double total = 0.0;
    for (NodeIndex u : L.members[a])
      for (NodeIndex v : L.members[b]) total += sem_->pair(u, v);
    return total;
  }

  std::vector<std::size_t> local_moving(const Level& L, std::size_t& moves_total) {
    const std::size_t n = L.adj.size();
    const bool linear = use_sem_ && sem_->linear();
    const std::size_t dim = linear ? sem_->dim() : 0;

    std::vector<std::size_t> comm(n);
    std::iota(comm.begin(), comm.end(), std::size_t{0});
    std::vector<double> total_degree = L.degree;
    std::vector<double> count(n);
    for (std::size_t k = 0; k < n; ++k) count[k] = static_cast<double>(L.members[k].size());
    std::vector<std::vector<double>> sums;
    if (linear) sums = L.sum;
    // Nonlinear kernel: explicit community membership with O(1) removal.
    std::vector<std::vector<std::size_t>> nodes_in;
    std::vector<std::size_t> slot;
    if (use_sem_ && !linear) {
      nodes_in.resize(n);
      slot.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        nodes_in[k] = {k};
        slot[k] = 0;
      }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);

    std::vector<double> link(n, 0.0);
    std::vector<char> touched(n, 0);
    std::vector<std::size_t> candidates;
    const double D = use_sem_ ? sem_->normalizer() : 1.0;
    constexpr double eps = 1e-10;

    auto detach = [&](std::size_t i, std::size_t c, int sign) {
      total_degree[c] += sign * L.degree[i];
      count[c] += sign * static_cast<double>(L.members[i].size());
      if (linear)
        for (std::size_t k = 0; k < dim; ++k) sums[c][k] += sign * L.sum[i][k];
      if (!nodes_in.empty()) {
        if (sign < 0) {
          auto& list = nodes_in[c];
          const std::size_t pos = slot[i];
          list[pos] = list.back();
          slot[list[pos]] = pos;
          list.pop_back();
        } else {
          slot[i] = nodes_in[c].size();
          nodes_in[c].push_back(i);
        }
      }
    };

    auto gain = [&](std::size_t i, std::size_t c) {
      double value = link[c] - gamma_ * L.degree[i] * total_degree[c] / two_m_;
      if (use_sem_) {
        double s = 0.0;
        if (linear) {
          s = sem_->linear_pair_sum(L.sum[i].data(), static_cast<double>(L.members[i].size()), sums[c].data(),
                                    count[c]);
        } else {
          for (std::size_t j : nodes_in[c]) s += pair_sum(L, i, j);
        }
        value -= (1.0 - gamma_) * s / D;
      }
      return value;
    };

    for (std::size_t pass = 0; pass < 1000; ++pass) {
      std::size_t moved = 0;
      for (std::size_t i : order) {
        const std::size_t home = comm[i];
        detach(i, home, -1);

        candidates.clear();
        for (const auto& [j, w] : L.adj[i]) {
          const std::size_t c = comm[j];
          if (!touched[c]) {
            touched[c] = 1;
            candidates.push_back(c);
          }
          link[c] += w;
        }
        std::sort(candidates.begin(), candidates.end());

        std::size_t best = home;
        double best_gain = gain(i, home);
        for (std::size_t c : candidates) {
          if (c == home) continue;
          const double value = gain(i, c);
          if (value > best_gain + eps) {
            best = c;
            best_gain = value;
          }
        }
        for (std::size_t c : candidates) {
          link[c] = 0.0;
          touched[c] = 0;
        }
        link[home] = 0.0;

        detach(i, best, +1);
        comm[i] = best;
        if (best != home) ++moved;
      }
      moves_total += moved;
      if (moved == 0) break;
    }
    return comm;
  }

  Level aggregate(const Level& L, const std::vector<std::size_t>& comm) {
    const std::size_t n = L.adj.size();
    // New super-nodes ordered by their smallest canonical member rank.
    std::vector<std::size_t> first_rank(n, std::numeric_limits<std::size_t>::max());
    for (std::size_t k = 0; k < n; ++k)
      for (NodeIndex v : L.members[k]) first_rank[comm[k]] = std::min(first_rank[comm[k]], rank_[v]);
    std::vector<std::size_t> live;
    for (std::size_t c = 0; c < n; ++c)
      if (first_rank[c] != std::numeric_limits<std::size_t>::max()) live.push_back(c);
    std::sort(live.begin(), live.end(), [&](auto a, auto b) { return first_rank[a] < first_rank[b]; });
    std::vector<std::size_t> renumber(n, 0);
    for (std::size_t r = 0; r < live.size(); ++r) renumber[live[r]] = r;

    Level next;
    const std::size_t m = live.size();
    next.adj.resize(m);
    next.degree.assign(m, 0.0);
    next.members.resize(m);
    const bool linear = !L.sum.empty();
    if (linear) next.sum.assign(m, std::vector<double>(sem_->dim(), 0.0));

    std::vector<std::vector<std::pair<std::size_t, double>>> raw(m);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t c = renumber[comm[k]];
      next.degree[c] += L.degree[k];
      next.members[c].insert(next.members[c].end(), L.members[k].begin(), L.members[k].end());
      if (linear)
        for (std::size_t d = 0; d < sem_->dim(); ++d) next.sum[c][d] += L.sum[k][d];
      for (const auto& [j, w] : L.adj[k]) {
        const std::size_t cj = renumber[comm[j]];
        if (cj != c) raw[c].emplace_back(cj, w);
      }
    }
    for (std::size_t c = 0; c < m; ++c) {
      auto& edges = raw[c];
      std::sort(edges.begin(), edges.end());
      for (const auto& [j, w] : edges) {
        if (!next.adj[c].empty() && next.adj[c].back().first == j)
          next.adj[c].back().second += w;
        else
          next.adj[c].emplace_back(j, w);
      }
    }
    return next;
  }

  const TextAttributedGraph& g_;
  const SemanticModel* sem_;
  double gamma_;
  std::mt19937_64 rng_;
  double two_m_ = 0.0;
  bool use_sem_ = false;
  std::vector<NodeIndex> order_;
  std::vector<std::size_t> rank_;
};

}  // namespace

double semantic_modularity(const TextAttributedGraph& g, const Partition& p, const EmbeddingTable* embeddings,
                           const ModularityParams& params) {
  check_params(params);
  validate_partition(g, p);
  if (g.edge_count() == 0) throw ValidationError("modularity is undefined for a graph without edges");
  const double two_m = 2.0 * static_cast<double>(g.edge_count());

  std::vector<double> internal(p.community_count, 0.0);  // ordered pair count
  std::vector<double> degree_sum(p.community_count, 0.0);
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    degree_sum[p.community_of[i]] += static_cast<double>(g.degree(i));
    for (NodeIndex j : g.neighbors(i))
      if (p.community_of[i] == p.community_of[j]) internal[p.community_of[i]] += 1.0;
  }

  std::vector<double> semantic(p.community_count, 0.0);
  double normalizer = 0.0;
  if (params.gamma < 1.0) {
    if (!embeddings) throw ValidationError("embeddings are required when gamma < 1");
    SemanticModel sem(g, *embeddings, params, /*allow_sampling=*/false, 0);
    normalizer = sem.normalizer();
    if (normalizer > 0.0) {
      const auto members = p.members();
      for (std::size_t c = 0; c < p.community_count; ++c) semantic[c] = community_semantic_sum(sem, members[c]);
    }
  }

  double q = 0.0;
  for (std::size_t c = 0; c < p.community_count; ++c) {
    q += internal[c] - params.gamma * degree_sum[c] * degree_sum[c] / two_m;
    if (normalizer > 0.0) q -= (1.0 - params.gamma) * semantic[c] / normalizer;
  }
  return q / two_m;
}

Partition detect_communities(const TextAttributedGraph& g, const EmbeddingTable* embeddings,
                             const ModularityParams& params, std::uint64_t seed, DetectionDiagnostics* diagnostics) {
  check_params(params);
  DetectionDiagnostics diag;
  if (g.edge_count() == 0) {
    if (diagnostics) *diagnostics = diag;
    return singleton_partition(g);
  }

  std::optional<SemanticModel> sem;
  if (params.gamma < 1.0) {
    if (!embeddings) throw ValidationError("embeddings are required when gamma < 1");
    sem.emplace(g, *embeddings, params, /*allow_sampling=*/true, seed);
    diag.normalizer = sem->normalizer();
    diag.normalizer_sampled = sem->sampled();
  }

  Louvain louvain(g, sem ? &*sem : nullptr, params, seed);
  Partition p;
  p.community_of = louvain.run(diag);
  p.community_count = 0;
  for (auto c : p.community_of) p.community_count = std::max(p.community_count, c + 1);
  if (diagnostics) *diagnostics = diag;
  return canonicalize(g, p);
}

}  // namespace tagsynth
