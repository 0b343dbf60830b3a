#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "tagsynth/graph.hpp"

namespace tagsynth {

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t m = 0;
  bool small_sample = false;  // min(n, m) < 25: asymptotic p is rough
};

/// Two-sample Kolmogorov-Smirnov statistic with the asymptotic p-value.
/// Throws ValidationError on an empty sample or a non-finite value.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2), clamped to [0, 1].
double kolmogorov_survival(double lambda);

std::vector<double> degree_sequence(const TextAttributedGraph& g);

/// 1 - sum_b w_b |c1(b) - c2(b)| over log2 degree bins (bin 0 holds degree 0,
/// bin k >= 1 holds degrees [2^(k-1), 2^k)); c(b) is the mean local
/// clustering in the bin (0 when the bin is empty in that graph) and w_b the
/// pooled fraction of nodes in the bin.
double clustering_similarity(const TextAttributedGraph& g1, const TextAttributedGraph& g2);

/// C x C label mixing matrix: fraction of edges per label pair, symmetric,
/// off-diagonal pairs split evenly between (a, b) and (b, a).
/// Throws ValidationError on a graph without edges.
Eigen::MatrixXd label_mixing(const TextAttributedGraph& g);

struct HomogeneityResult {
  Eigen::MatrixXd first;
  Eigen::MatrixXd second;
  double similarity = 0.0;  // 1 - total variation distance
};

HomogeneityResult label_homogeneity(const TextAttributedGraph& g1, const TextAttributedGraph& g2);

struct FeatureSimilarityReport {
  KsResult degree_ks;
  double clustering_similarity = 0.0;
  HomogeneityResult homogeneity;
};

FeatureSimilarityReport compare_graphs(const TextAttributedGraph& original, const TextAttributedGraph& other);
nlohmann::json to_json(const FeatureSimilarityReport& report);

struct DirectionOptions {
  double tolerance = 1e-8;  // radians between successive iterates
  std::size_t max_iterations = 100;
  double power_tolerance = 1e-10;
  std::size_t power_max_iterations = 2000;
  std::size_t point_starts = 16;   // data points used as extra starts
  std::size_t random_starts = 16;
  std::uint64_t seed = 0;
};

struct PrincipalDirection {
  Eigen::VectorXd u;
  std::size_t iterations = 0;      // of the winning start
  double final_residual = 0.0;     // last step angle
  double objective = 0.0;          // sum of squared angles
  std::size_t starts = 0;
  // Angle between u and the dominant eigenvector of sum_j w_j x_j x_j^T
  // rebuilt at u. Zero only when the reweighted fixed point is stationary.
  double reweighted_gap = 0.0;
};

/// f(u) = sum_j arccos(|u.x_j|)^2 over the rows of X (normalized internally).
double angular_objective(const Eigen::MatrixXd& rows, const Eigen::VectorXd& u);

/// Minimizes the angular objective over the unit sphere (sign-invariant).
/// Multistart descent in the span of the data: Newton steps on the sphere
/// when the Riemannian Hessian is positive definite, otherwise a
/// backtracking gradient step; every accepted step lowers the objective.
/// Sign is canonicalized so the first nonzero coordinate is positive.
/// Throws ValidationError on empty or zero rows, ConvergenceError when the
/// best start exhausts max_iterations.
PrincipalDirection principal_direction(const Eigen::MatrixXd& rows, const DirectionOptions& options = {});

/// Dominant eigenvector by power iteration from `start`. Returns the vector
/// and whether the tolerance was met.
std::pair<Eigen::VectorXd, bool> dominant_eigenvector(const Eigen::MatrixXd& m, Eigen::VectorXd start,
                                                      double tolerance, std::size_t max_iterations);

/// 1 - (2/pi) arccos(|x.u| / (|x||u|)). Throws ValidationError on a
/// dimension mismatch or a zero vector.
double coherence_score(std::span<const double> x, std::span<const double> u);

struct CoherenceStatistics {
  double mean = 0.0;
  double stddev = 0.0;            // sample (M - 1 denominator)
  std::optional<double> t_statistic;  // nullopt when stddev == 0
  std::size_t count = 0;
};

/// One-sample t against 0.5. Throws ValidationError when fewer than 2 scores.
CoherenceStatistics coherence_statistics(std::span<const double> scores);

struct CoherenceReport {
  PrincipalDirection direction;
  std::vector<double> scores;
  CoherenceStatistics statistics;
};

CoherenceReport coherence_report(const Eigen::MatrixXd& background, const Eigen::MatrixXd& candidates,
                                 const DirectionOptions& options = {});
nlohmann::json to_json(const CoherenceReport& report, std::span<const std::string> candidate_ids = {});

/// Reviewer x instance ratings in [0, 1].
struct RatingsTable {
  std::vector<std::vector<double>> ratings;
  std::size_t reviewers() const { return ratings.size(); }
  std::size_t instances() const { return ratings.empty() ? 0 : ratings[0].size(); }
};

/// CSV, one row per reviewer, one column per instance. A cell is a number
/// or three sub-ratings separated by ';' or '|' (averaged). A non-numeric
/// first row is a header; a non-numeric first column holds reviewer names.
RatingsTable parse_ratings_csv(std::string_view text);

struct Agreement {
  double traceability = 0.0;
  std::optional<double> pearson;  // nullopt when either side has zero variance
};

/// Mean rating over all cells, and Pearson correlation between per-instance
/// mean ratings and `scores` (which must have one entry per instance).
Agreement human_algorithm_agreement(const RatingsTable& table, std::span<const double> scores);

std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

}  // namespace tagsynth
