#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "tagsynth/limiter.hpp"

namespace tagsynth {

namespace {

// y = D^{-1/2} A D^{-1/2} x over the component's local indexing.
void apply_normalized_adjacency(const std::vector<std::vector<std::size_t>>& adj, const Eigen::VectorXd& inv_sqrt,
                                const Eigen::VectorXd& x, Eigen::VectorXd& y) {
  for (std::size_t i = 0; i < adj.size(); ++i) {
    double s = 0.0;
    for (auto j : adj[i]) s += inv_sqrt(static_cast<Eigen::Index>(j)) * x(static_cast<Eigen::Index>(j));
    y(static_cast<Eigen::Index>(i)) = inv_sqrt(static_cast<Eigen::Index>(i)) * s;
  }
}

}  // namespace

std::vector<double> normalized_laplacian_spectrum(const TextAttributedGraph& g, const SpectrumOptions& options) {
  if (g.empty() || options.count == 0) return {};
  const auto comps = connected_components(g);
  std::vector<std::size_t> local(g.node_count(), static_cast<std::size_t>(-1));
  std::vector<NodeIndex> nodes;
  for (NodeIndex v = 0; v < g.node_count(); ++v)
    if (comps.component_of[v] == comps.largest) {
      local[v] = nodes.size();
      nodes.push_back(v);
    }
  const auto n = static_cast<Eigen::Index>(nodes.size());
  if (n == 1) return {0.0};

  std::vector<std::vector<std::size_t>> adj(nodes.size());
  Eigen::VectorXd inv_sqrt(n);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (NodeIndex w : g.neighbors(nodes[i])) adj[i].push_back(local[w]);
    inv_sqrt(static_cast<Eigen::Index>(i)) = 1.0 / std::sqrt(static_cast<double>(adj[i].size()));
  }

  std::vector<double> values;
  if (nodes.size() <= options.dense_limit) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Identity(n, n);
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (auto j : adj[i])
        L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -=
            inv_sqrt(static_cast<Eigen::Index>(i)) * inv_sqrt(static_cast<Eigen::Index>(j));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(L, Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    values.assign(ev.data(), ev.data() + n);
  } else {
    // Lanczos with full reorthogonalization on M = I + D^-1/2 A D^-1/2 = 2I - L,
    // whose largest Ritz values converge first.
    const auto steps = static_cast<Eigen::Index>(std::min<std::size_t>(options.lanczos_steps, nodes.size()));
    Eigen::MatrixXd Q(n, steps);
    Eigen::VectorXd alpha(steps), beta(steps);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z;
    Eigen::VectorXd q(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) q(i) = z(rng);
    q.normalize();
    Eigen::Index m = 0;
    for (; m < steps; ++m) {
      Q.col(m) = q;
      apply_normalized_adjacency(adj, inv_sqrt, q, w);
      w += q;
      alpha(m) = q.dot(w);
      for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(m + 1) * (Q.leftCols(m + 1).transpose() * w);
      beta(m) = w.norm();
      if (beta(m) < 1e-12) {
        ++m;
        break;
      }
      q = w / beta(m);
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      T(i, i) = alpha(i);
      if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta(i);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(T, Eigen::EigenvaluesOnly);
    for (Eigen::Index i = 0; i < m; ++i) values.push_back(2.0 - solver.eigenvalues()(i));
  }
  for (double& v : values) v = std::clamp(v, 0.0, 2.0);
  std::sort(values.begin(), values.end());
  if (values.size() > options.count) values.resize(options.count);
  return values;
}

}  // namespace tagsynth
