#include "tagsynth/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "tagsynth/error.hpp"

namespace tagsynth {

using nlohmann::json;

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Same function via the theta-function dual, which converges fast here.
    constexpr double pi = std::numbers::pi;
    double sum = 0.0;
    for (int k = 1; k < 100; ++k) {
      const double t = std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * pi * pi / (8.0 * lambda * lambda));
      sum += t;
      if (t < 1e-12) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double t = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? t : -t);
    if (t < 1e-12) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("KS test needs two nonempty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  for (double v : x)
    if (!std::isfinite(v)) throw ValidationError("KS sample contains a non-finite value");
  for (double v : y)
    if (!std::isfinite(v)) throw ValidationError("KS sample contains a non-finite value");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j == y.size() || (i < x.size() && x[i] <= y[j]))
      v = x[i];
    else
      v = y[j];
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsResult r;
  r.statistic = d;
  r.n = x.size();
  r.m = y.size();
  r.p_value = kolmogorov_survival(d * std::sqrt(n * m / (n + m)));
  r.small_sample = std::min(r.n, r.m) < 25;
  return r;
}

std::vector<double> degree_sequence(const TextAttributedGraph& g) {
  std::vector<double> out(g.node_count());
  for (NodeIndex i = 0; i < g.node_count(); ++i) out[i] = static_cast<double>(g.degree(i));
  return out;
}

namespace {

std::size_t degree_bin(std::size_t d) {
  std::size_t b = 0;
  while (d > 0) {
    d >>= 1;
    ++b;
  }
  return b;
}

struct BinMeans {
  std::vector<double> sum;
  std::vector<std::size_t> count;
};

BinMeans bin_clustering(const TextAttributedGraph& g) {
  BinMeans out;
  const auto c = local_clustering(g);
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    const std::size_t b = degree_bin(g.degree(i));
    if (b >= out.sum.size()) {
      out.sum.resize(b + 1, 0.0);
      out.count.resize(b + 1, 0);
    }
    out.sum[b] += c[i];
    ++out.count[b];
  }
  return out;
}

}  // namespace

double clustering_similarity(const TextAttributedGraph& g1, const TextAttributedGraph& g2) {
  if (g1.empty() || g2.empty()) throw ValidationError("clustering similarity needs nonempty graphs");
  auto a = bin_clustering(g1), b = bin_clustering(g2);
  const std::size_t bins = std::max(a.sum.size(), b.sum.size());
  a.sum.resize(bins, 0.0);
  a.count.resize(bins, 0);
  b.sum.resize(bins, 0.0);
  b.count.resize(bins, 0);
  const double total = static_cast<double>(g1.node_count() + g2.node_count());
  double gap = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    if (a.count[k] + b.count[k] == 0) continue;
    const double ca = a.count[k] ? a.sum[k] / static_cast<double>(a.count[k]) : 0.0;
    const double cb = b.count[k] ? b.sum[k] / static_cast<double>(b.count[k]) : 0.0;
    gap += static_cast<double>(a.count[k] + b.count[k]) / total * std::abs(ca - cb);
  }
  return std::clamp(1.0 - gap, 0.0, 1.0);
}

Eigen::MatrixXd label_mixing(const TextAttributedGraph& g) {
  if (g.edge_count() == 0) throw ValidationError("label mixing is undefined for a graph without edges");
  const auto c = static_cast<Eigen::Index>(g.class_count());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(c, c);
  for (const auto& [u, v] : g.edges()) {
    const int a = g.node(u).label, b = g.node(v).label;
    if (a == b) {
      h(a, a) += 1.0;
    } else {
      h(a, b) += 0.5;
      h(b, a) += 0.5;
    }
  }
  return h / static_cast<double>(g.edge_count());
}

HomogeneityResult label_homogeneity(const TextAttributedGraph& g1, const TextAttributedGraph& g2) {
  if (g1.class_count() != g2.class_count())
    throw ValidationError("label homogeneity needs equal class counts (" + std::to_string(g1.class_count()) +
                          " vs " + std::to_string(g2.class_count()) + ")");
  HomogeneityResult r;
  r.first = label_mixing(g1);
  r.second = label_mixing(g2);
  r.similarity = std::clamp(1.0 - 0.5 * (r.first - r.second).cwiseAbs().sum(), 0.0, 1.0);
  return r;
}

FeatureSimilarityReport compare_graphs(const TextAttributedGraph& original, const TextAttributedGraph& other) {
  FeatureSimilarityReport r;
  const auto d1 = degree_sequence(original), d2 = degree_sequence(other);
  r.degree_ks = ks_two_sample(d1, d2);
  r.clustering_similarity = clustering_similarity(original, other);
  r.homogeneity = label_homogeneity(original, other);
  return r;
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

json ks_json(const KsResult& r) {
  return json{{"statistic", r.statistic}, {"p_value", r.p_value}, {"n", r.n}, {"m", r.m},
              {"small_sample", r.small_sample}};
}

}  // namespace

json to_json(const FeatureSimilarityReport& report) {
  return json{
      {"degree_ks", ks_json(report.degree_ks)},
      {"clustering_similarity", report.clustering_similarity},
      {"label_homogeneity",
       json{{"similarity", report.homogeneity.similarity},
            {"original", matrix_json(report.homogeneity.first)},
            {"other", matrix_json(report.homogeneity.second)}}},
      {"definitions",
       json{{"degree_ks", "two-sample KS on degree sequences, asymptotic p-value"},
            {"clustering_similarity",
             "1 - sum_b w_b |c1(b) - c2(b)|, log2 degree bins, w_b pooled node fraction, c(b) mean local clustering"},
            {"label_homogeneity", "1 - total variation distance between label-pair edge fraction matrices"}}}};
}

// ---------------------------------------------------------------------------
// Principal direction on the sphere

namespace {

constexpr double kPi = std::numbers::pi;

// h(c) = arccos(c)^2 on [0, 1] with first and second derivatives.
struct AngleTerm {
  double value, d1, d2;
};

AngleTerm angle_term(double c) {
  c = std::clamp(c, 0.0, 1.0);
  const double t = 1.0 - c;
  if (t < 1e-4) return {2.0 * t + t * t / 3.0, -(2.0 + 2.0 * t / 3.0), 2.0 / 3.0 + 8.0 * t / 15.0};
  const double theta = std::acos(c);
  const double s2 = 1.0 - c * c, s = std::sqrt(s2);
  return {theta * theta, -2.0 * theta / s, 2.0 / s2 - 2.0 * theta * c / (s2 * s)};
}

Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0 || rows.cols() == 0) throw ValidationError("need at least one nonempty vector");
  Eigen::MatrixXd out = rows;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("vector " + std::to_string(i) + " has zero or non-finite norm");
    out.row(i) /= n;
  }
  return out;
}

double objective_normalized(const Eigen::MatrixXd& x, const Eigen::VectorXd& u) {
  const Eigen::VectorXd c = x * u;
  double f = 0.0;
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    const double th = std::acos(std::min(1.0, std::abs(c(j))));
    f += th * th;
  }
  return f;
}

Eigen::VectorXd sphere_exp(const Eigen::VectorXd& u, const Eigen::VectorXd& eta) {
  const double n = eta.norm();
  if (n == 0.0) return u;
  Eigen::VectorXd v = std::cos(n) * u + std::sin(n) / n * eta;
  return v / v.norm();
}

struct Run {
  Eigen::VectorXd u;
  double f = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

Run descend(const Eigen::MatrixXd& y, Eigen::VectorXd u, const DirectionOptions& opt) {
  const auto r = y.cols();
  const double k = static_cast<double>(y.rows());
  Run run;
  u.normalize();
  double f = objective_normalized(y, u);
  for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
    run.iterations = it;
    const Eigen::VectorXd c = y * u;
    Eigen::VectorXd egrad = Eigen::VectorXd::Zero(r);
    Eigen::MatrixXd ehess = Eigen::MatrixXd::Zero(r, r);
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      const double sign = c(j) > 0 ? 1.0 : (c(j) < 0 ? -1.0 : 0.0);
      const auto term = angle_term(std::abs(c(j)));
      egrad += sign * term.d1 * y.row(j).transpose();
      ehess.noalias() += term.d2 * y.row(j).transpose() * y.row(j);
    }
    const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(r, r) - u * u.transpose();
    const Eigen::VectorXd grad = proj * egrad;
    if (grad.norm() < 1e-14 * std::max(1.0, k)) {
      run.residual = 0.0;
      run.converged = true;
      break;
    }

    // Newton direction in the tangent space; the u u^T block keeps it regular.
    Eigen::VectorXd step;
    const Eigen::MatrixXd rhess = proj * ehess * proj - u.dot(egrad) * proj + u * u.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(rhess);
    if (llt.info() == Eigen::Success) {
      step = proj * llt.solve(-grad);
      if (!(step.dot(grad) < 0.0) || !step.allFinite()) step.resize(0);
    }

    auto try_step = [&](Eigen::VectorXd eta, int halvings) -> bool {
      for (int h = 0; h <= halvings; ++h, eta *= 0.5) {
        Eigen::VectorXd cand = sphere_exp(u, eta);
        const double fc = objective_normalized(y, cand);
        if (fc <= f) {
          const double moved = std::acos(std::min(1.0, std::abs(cand.dot(u))));
          u = std::move(cand);
          const double drop = f - fc;
          f = fc;
          run.residual = moved;
          if (moved < opt.tolerance || drop == 0.0) run.converged = true;
          return true;
        }
      }
      return false;
    };

    // Newton first; the gradient step is the Karcher-mean step size.
    if (step.size() > 0 && step.norm() < kPi / 2 && try_step(step, 30)) {
      if (run.converged) break;
      continue;
    }
    if (try_step(-grad / (2.0 * k), 60)) {
      if (run.converged) break;
      continue;
    }
    // No representable descent: already at the floating-point minimum.
    run.residual = 0.0;
    run.converged = true;
    break;
  }
  run.u = u;
  run.f = f;
  return run;
}

}  // namespace

double angular_objective(const Eigen::MatrixXd& rows, const Eigen::VectorXd& u) {
  if (u.size() != rows.cols()) throw ValidationError("direction dimension does not match the data");
  const double n = u.norm();
  if (!(n > 0.0)) throw ValidationError("direction must be nonzero");
  return objective_normalized(normalized_rows(rows), u / n);
}

std::pair<Eigen::VectorXd, bool> dominant_eigenvector(const Eigen::MatrixXd& m, Eigen::VectorXd start,
                                                      double tolerance, std::size_t max_iterations) {
  Eigen::VectorXd v = start;
  if (!(v.norm() > 0.0)) v = Eigen::VectorXd::Unit(m.rows(), 0);
  v.normalize();
  for (std::size_t it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd w = m * v;
    const double n = w.norm();
    if (n == 0.0) return {v, true};
    w /= n;
    if (w.dot(v) < 0) w = -w;
    const double change = (w - v).norm();
    v = std::move(w);
    if (change < tolerance) return {v, true};
  }
  return {v, false};
}

PrincipalDirection principal_direction(const Eigen::MatrixXd& rows, const DirectionOptions& opt) {
  const Eigen::MatrixXd x = normalized_rows(rows);
  const auto d = x.cols();

  // Orthonormal basis of the row span; the minimizer lies in it.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const double cutoff = 1e-10 * svd.singularValues()(0);
  Eigen::Index rank = 0;
  while (rank < svd.singularValues().size() && svd.singularValues()(rank) > cutoff) ++rank;
  const Eigen::MatrixXd basis = svd.matrixV().leftCols(rank);  // d x r
  const Eigen::MatrixXd y = x * basis;                           // K x r

  std::vector<Eigen::VectorXd> starts;
  Eigen::VectorXd mean = y.colwise().sum().transpose();
  if (mean.norm() > 1e-12 * static_cast<double>(y.rows()))
    starts.push_back(mean.normalized());
  else
    starts.push_back(basis.transpose() * Eigen::VectorXd::Unit(d, 0));
  if (starts.back().norm() < 1e-12) starts.back() = Eigen::VectorXd::Unit(rank, 0);
  starts.push_back(Eigen::VectorXd::Unit(rank, 0));  // top singular direction
  const auto k = static_cast<std::size_t>(y.rows());
  const std::size_t point_starts = std::min(opt.point_starts, k);
  for (std::size_t s = 0; s < point_starts; ++s) starts.push_back(y.row(static_cast<Eigen::Index>(s * k / point_starts)).transpose());
  std::mt19937_64 rng(opt.seed ^ 0x5deece66dULL);
  std::normal_distribution<double> normal;
  for (std::size_t s = 0; s < opt.random_starts; ++s) {
    Eigen::VectorXd v(rank);
    for (Eigen::Index i = 0; i < rank; ++i) v(i) = normal(rng);
    if (v.norm() > 0) starts.push_back(v);
  }

  Run best;
  bool have = false;
  for (const auto& s : starts) {
    Run r = descend(y, s, opt);
    if (!have || r.f < best.f - 1e-12 * std::max(1.0, best.f)) {
      best = std::move(r);
      have = true;
    }
  }
  if (!best.converged)
    throw ConvergenceError("principal direction did not converge in " + std::to_string(opt.max_iterations) +
                               " iterations",
                           best.residual);

  PrincipalDirection out;
  out.u = basis * best.u;
  out.u.normalize();
  for (Eigen::Index i = 0; i < out.u.size(); ++i) {
    if (std::abs(out.u(i)) > 1e-12) {
      if (out.u(i) < 0) out.u = -out.u;
      break;
    }
  }
  out.iterations = best.iterations;
  out.final_residual = best.residual;
  out.objective = objective_normalized(x, out.u);
  out.starts = starts.size();

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rank, rank);
  const Eigen::VectorXd c = y * best.u;
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    const double a = std::min(1.0, std::abs(c(j)));
    const double w = a > 1.0 - 1e-12 ? 1.0 : std::acos(a) / std::sqrt(1.0 - a * a);
    m.noalias() += w * y.row(j).transpose() * y.row(j);
  }
  auto [v, ok] = dominant_eigenvector(m, best.u, opt.power_tolerance, opt.power_max_iterations);
  (void)ok;
  out.reweighted_gap = std::acos(std::min(1.0, std::abs(v.dot(best.u))));
  return out;
}

double coherence_score(std::span<const double> x, std::span<const double> u) {
  if (x.size() != u.size()) throw ValidationError("coherence: dimension mismatch");
  double dot = 0.0, nx = 0.0, nu = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * u[i];
    nx += x[i] * x[i];
    nu += u[i] * u[i];
  }
  if (!(nx > 0.0) || !(nu > 0.0)) throw ValidationError("coherence: zero vector");
  const double c = std::min(1.0, std::abs(dot) / std::sqrt(nx * nu));
  return std::clamp(1.0 - 2.0 / kPi * std::acos(c), 0.0, 1.0);
}

CoherenceStatistics coherence_statistics(std::span<const double> scores) {
  if (scores.size() < 2) throw ValidationError("coherence statistics need at least 2 scores");
  CoherenceStatistics s;
  s.count = scores.size();
  double sum = 0.0;
  for (double v : scores) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  double ss = 0.0;
  for (double v : scores) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(s.count - 1));
  if (s.stddev > 0.0) s.t_statistic = (s.mean - 0.5) / (s.stddev / std::sqrt(static_cast<double>(s.count)));
  return s;
}

CoherenceReport coherence_report(const Eigen::MatrixXd& background, const Eigen::MatrixXd& candidates,
                                 const DirectionOptions& options) {
  if (candidates.cols() != background.cols()) throw ValidationError("coherence: candidate dimension mismatch");
  CoherenceReport r;
  r.direction = principal_direction(background, options);
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    const Eigen::VectorXd row = candidates.row(i).transpose();
    r.scores.push_back(coherence_score(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                                       std::span<const double>(r.direction.u.data(), static_cast<std::size_t>(r.direction.u.size()))));
  }
  r.statistics = coherence_statistics(r.scores);
  return r;
}

json to_json(const CoherenceReport& report, std::span<const std::string> candidate_ids) {
  json scores = json::array();
  for (std::size_t i = 0; i < report.scores.size(); ++i) {
    if (i < candidate_ids.size())
      scores.push_back(json{{"node_id", candidate_ids[i]}, {"score", report.scores[i]}});
    else
      scores.push_back(report.scores[i]);
  }
  const auto& d = report.direction;
  return json{{"scores", std::move(scores)},
              {"mean", report.statistics.mean},
              {"stddev", report.statistics.stddev},
              {"t_statistic", report.statistics.t_statistic ? json(*report.statistics.t_statistic) : json(nullptr)},
              {"sample_size", report.statistics.count},
              {"direction",
               json{{"u", std::vector<double>(d.u.data(), d.u.data() + d.u.size())},
                    {"objective", d.objective},
                    {"iterations", d.iterations},
                    {"final_residual", d.final_residual},
                    {"starts", d.starts},
                    {"reweighted_gap", d.reweighted_gap}}}};
}

// ---------------------------------------------------------------------------
// Ratings

namespace {

std::string strip(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  const auto e = s.find_last_not_of(" \t\r\"");
  return b == std::string_view::npos ? std::string{} : std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<double> parse_cell(const std::string& cell) {
  if (cell.find_first_of(";|") == std::string::npos) return parse_number(cell);
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const auto end = cell.find_first_of(";|", start);
    auto v = parse_number(strip(cell.substr(start, end == std::string::npos ? std::string::npos : end - start)));
    if (!v) return std::nullopt;
    parts.push_back(*v);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  if (parts.size() != 3) return std::nullopt;
  for (double p : parts)
    if (p < 0.0 || p > 1.0) throw ValidationError("sub-rating outside [0, 1]: " + cell);
  return (parts[0] + parts[1] + parts[2]) / 3.0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto end = line.find(',', start);
    out.push_back(strip(line.substr(start, end == std::string::npos ? std::string::npos : end - start)));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

RatingsTable parse_ratings_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (strip(line).empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw SchemaError("ratings CSV is empty");

  auto numeric_from = [](const std::vector<std::string>& row, std::size_t first) {
    for (std::size_t i = first; i < row.size(); ++i)
      if (!parse_cell(row[i])) return false;
    return true;
  };
  bool named = true;
  for (const auto& r : rows)
    if (parse_cell(r[0])) named = false;
  const std::size_t first_col = named ? 1 : 0;
  std::size_t first_row = 0;
  if (!numeric_from(rows[0], first_col)) first_row = 1;

  RatingsTable t;
  for (std::size_t r = first_row; r < rows.size(); ++r) {
    if (rows[r].size() <= first_col) throw SchemaError("ratings row " + std::to_string(r + 1) + " has no ratings");
    std::vector<double> values;
    for (std::size_t c = first_col; c < rows[r].size(); ++c) {
      auto v = parse_cell(rows[r][c]);
      if (!v) throw SchemaError("ratings row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                                ": not a rating: '" + rows[r][c] + "'");
      if (*v < 0.0 || *v > 1.0)
        throw ValidationError("rating outside [0, 1] at row " + std::to_string(r + 1) + ", column " +
                              std::to_string(c + 1));
      values.push_back(*v);
    }
    if (!t.ratings.empty() && values.size() != t.ratings[0].size())
      throw SchemaError("ratings row " + std::to_string(r + 1) + " has " + std::to_string(values.size()) +
                        " instances, expected " + std::to_string(t.ratings[0].size()));
    t.ratings.push_back(std::move(values));
  }
  if (t.ratings.empty()) throw SchemaError("ratings CSV has a header but no ratings");
  return t;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("pearson: length mismatch");
  if (a.size() < 2) return std::nullopt;
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

Agreement human_algorithm_agreement(const RatingsTable& table, std::span<const double> scores) {
  if (table.reviewers() == 0 || table.instances() == 0) throw ValidationError("ratings table is empty");
  Agreement a;
  std::vector<double> per_instance(table.instances(), 0.0);
  double total = 0.0;
  for (const auto& row : table.ratings) {
    if (row.size() != table.instances()) throw ValidationError("ratings table is ragged");
    for (std::size_t i = 0; i < row.size(); ++i) {
      total += row[i];
      per_instance[i] += row[i];
    }
  }
  a.traceability = total / static_cast<double>(table.reviewers() * table.instances());
  if (!scores.empty()) {
    if (scores.size() != table.instances())
      throw ValidationError("got " + std::to_string(scores.size()) + " scores for " +
                            std::to_string(table.instances()) + " rated instances");
    for (double& v : per_instance) v /= static_cast<double>(table.reviewers());
    a.pearson = pearson(per_instance, scores);
  }
  return a;
}

}  // namespace tagsynth
