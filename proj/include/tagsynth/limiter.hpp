#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tagsynth/community.hpp"
#include "tagsynth/graph.hpp"

namespace tagsynth {

struct LimiterParams {
  double alpha = 0.5;
  double epsilon = 0.05;
  double lambda1 = 1.0 / 3.0;  // degree
  double lambda2 = 1.0 / 3.0;  // community coverage
  double lambda3 = 1.0 / 3.0;  // bridging
  std::optional<std::size_t> max_repair_swaps;  // default 2 * floor(alpha n)
  std::size_t repair_candidates = 8;             // per cell and side

  void validate() const;  // throws ValidationError
};

using Cell = std::pair<int, std::size_t>;  // (label, community)

/// (component count / n, largest component / n); (0, 0) for n = 0.
std::pair<double, double> connectivity_profile(const TextAttributedGraph& g);
double profile_distortion(std::pair<double, double> a, std::pair<double, double> b);  // L1

struct PropertyTensor {
  std::map<std::size_t, std::size_t> degree_histogram;
  std::map<int, std::size_t> label_distribution;
  std::vector<double> top_spectral;
  std::pair<double, double> component_profile{0.0, 0.0};
};

struct SpectrumOptions {
  std::size_t count = 10;
  std::size_t dense_limit = 2000;  // Lanczos above this
  std::size_t lanczos_steps = 300;
};

/// Smallest normalized-Laplacian eigenvalues of the largest component,
/// ascending and clamped to [0, 2].
std::vector<double> normalized_laplacian_spectrum(const TextAttributedGraph& g, const SpectrumOptions& options = {});

PropertyTensor property_tensor(const TextAttributedGraph& g, const SpectrumOptions& options = {});
nlohmann::json to_json(const PropertyTensor& t);

/// Omega(v) for every node of `cell`, in cell order. `selected` is a per-node
/// flag over g.
std::vector<double> node_weights(const TextAttributedGraph& g, std::span<const NodeIndex> cell,
                                  const std::vector<char>& selected, const Partition& partition,
                                  const LimiterParams& params);

/// Per-cell sample sizes: floor(alpha n) apportioned to labels, then to the
/// label's cells, by largest remainder.
std::map<Cell, std::size_t> cell_targets(const TextAttributedGraph& g, const Partition& partition, double alpha);

struct RepairReport {
  std::size_t swaps = 0;
  double initial_distortion = 0.0;
  double final_distortion = 0.0;
  std::vector<double> distortion_trace;  // after each swap
  std::vector<std::string> warnings;
};

/// Greedy same-cell swaps reducing the connectivity-profile distortion of
/// g[selected] against g. `selected` holds node indices of g and is updated
/// in place; its size and per-cell counts never change.
RepairReport connectivity_repair(const TextAttributedGraph& g, std::vector<NodeIndex>& selected,
                                 const Partition& partition, const LimiterParams& params);

struct LimitResult {
  TextAttributedGraph graph;
  std::vector<NodeIndex> selected;  // ascending node index of the input graph
  std::map<Cell, std::size_t> targets;
  RepairReport repair;
};

LimitResult sample_limited(const TextAttributedGraph& g, const Partition& partition, const LimiterParams& params,
                           std::uint64_t seed);

nlohmann::json limit_sidecar(const TextAttributedGraph& original, const LimitResult& result,
                             const LimiterParams& params, std::uint64_t seed, const SpectrumOptions& options = {});

}  // namespace tagsynth
