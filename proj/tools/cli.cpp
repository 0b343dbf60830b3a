#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tagsynth/analysis.hpp"
#include "tagsynth/config.hpp"
#include "tagsynth/error.hpp"
#include "tagsynth/limiter.hpp"
#include "tagsynth/synthesis.hpp"

namespace tagsynth::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string log_level;
  std::string report;
};

void add_common(CLI::App& cmd, Common& c) {
  cmd.add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd.add_option("--seed", c.seed, "RNG seed (overrides the config file)");
  cmd.add_option("--log-level", c.log_level, "trace|debug|info|warn|error|off");
}

// flag > file > default
RunConfig effective_config(const Common& c) {
  RunConfig config = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  if (c.seed) config.seed = *c.seed;
  if (!c.log_level.empty()) config.log_level = c.log_level;
  return config;
}

void apply_log_level(const RunConfig& config) {
  spdlog::set_level(spdlog::level::from_str(config.log_level));
}

void install_stderr_logger() {
  if (spdlog::default_logger() && spdlog::default_logger()->name() == "tagsynth") return;
  auto logger = spdlog::get("tagsynth");
  if (!logger) logger = spdlog::stderr_color_mt("tagsynth");
  spdlog::set_default_logger(logger);
}

void emit(const json& doc, const std::string& path, std::ostream& out) {
  if (path.empty())
    out << doc.dump(2) << "\n";
  else
    write_file_atomic(path, doc.dump(2) + "\n");
}

TextAttributedGraph read_graph(const std::string& path) {
  NormalizationReport norm;
  auto g = load_graph(path, &norm);
  if (norm.back_edges_added || norm.duplicates_removed || norm.self_loops_removed)
    spdlog::warn("{}: added {} back edges, removed {} duplicates and {} self-loops", path, norm.back_edges_added,
                 norm.duplicates_removed, norm.self_loops_removed);
  return g;
}

// Node ids from a JSON array, {"ids": [...]}, or a graph document.
std::vector<std::string> read_id_list(const std::string& path) {
  const json doc = read_json_file(path);
  const json* list = &doc;
  if (doc.is_object() && doc.contains("ids")) list = &doc["ids"];
  std::vector<std::string> ids;
  if (doc.is_object() && doc.contains("nodes")) {
    for (const auto& r : read_graph(path).nodes()) ids.push_back(r.id);
    return ids;
  }
  if (!list->is_array()) throw SchemaError(path + ": expected an array of node ids, {\"ids\": [...]} or a graph");
  for (const auto& v : *list) {
    if (v.is_string())
      ids.push_back(v.get<std::string>());
    else if (v.is_number_integer())
      ids.push_back(std::to_string(v.get<long long>()));
    else
      throw SchemaError(path + ": node ids must be strings or integers");
  }
  return ids;
}

Eigen::MatrixXd rows_for(const std::vector<std::string>& ids, const EmbeddingTable& table, const std::string& what) {
  if (ids.empty()) throw ValidationError(what + ": no node ids");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(table.dimension()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto* v = table.find(ids[i]);
    if (!v) throw ValidationError(what + ": no embedding for node " + ids[i]);
    for (std::size_t k = 0; k < v->size(); ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (*v)[k];
  }
  return m;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- subcommands

int run_stats(const Common& c, const std::string& input, std::ostream& out) {
  const auto config = effective_config(c);
  config.validate();
  apply_log_level(config);
  emit(to_json(graph_stats(read_graph(input))), c.report, out);
  return kOk;
}

int run_limit(const Common& c, std::optional<double> alpha, const std::string& input, const std::string& output) {
  auto config = effective_config(c);
  if (alpha) config.limiter.alpha = *alpha;
  config.validate();
  apply_log_level(config);
  const auto g = read_graph(input);
  ModularityParams communities;
  communities.gamma = 1.0;
  const auto partition = detect_communities(g, nullptr, communities, config.seed);
  const auto result = sample_limited(g, partition, config.limiter, config.seed);
  json sidecar = limit_sidecar(g, result, config.limiter, config.seed);
  sidecar["config"] = to_json(config);
  sidecar["communities"] = partition.community_count;
  save_graph(result.graph, output);
  write_file_atomic(c.report.empty() ? output + ".sidecar.json" : c.report, sidecar.dump(2) + "\n");
  spdlog::info("kept {} of {} nodes, {} repair swaps, distortion {:.6f}", result.graph.node_count(), g.node_count(),
               result.repair.swaps, result.repair.final_distortion);
  return kOk;
}

struct SynthesizeArgs {
  std::string provider = "live";
  std::string embeddings;
  std::string audit;
  bool require_convergence = false;
  bool dry_run = false;
};

std::unique_ptr<Provider> make_provider(const std::string& choice, const RunConfig& config) {
  if (choice == "live") return std::make_unique<HttpProvider>(config.provider, config.seed);
  if (choice.rfind("mock:", 0) == 0 && choice.size() > 5)
    return std::make_unique<MockProvider>(
        MockProvider::from_file(choice.substr(5), config.seed, config.synthesis.embedding_dimension));
  throw ValidationError("--provider must be \"live\" or \"mock:PATH\", got \"" + choice + "\"");
}

int run_synthesize(const Common& c, const SynthesizeArgs& a, const std::string& input, const std::string& output,
                   std::ostream& out) {
  const auto config = effective_config(c);
  config.validate();
  apply_log_level(config);
  const auto g = read_graph(input);

  if (a.dry_run) {
    const auto d = dry_run_prompts(g, config.synthesis, config.seed);
    out << "=== Manager (mode assumed: " << to_string(d.assumed_mode) << ") ===\n"
        << d.manager_prompt << "\n\n=== Enhancement ===\n"
        << d.enhancement_prompt << "\n";
    return kOk;
  }
  if (output.empty()) throw ValidationError("synthesize: output path required (or use --dry-run)");

  std::optional<EmbeddingTable> embeddings;
  if (!a.embeddings.empty()) embeddings = load_embeddings(a.embeddings);
  auto provider = make_provider(a.provider, config);

  AuditLog audit;
  audit.record(json{{"event", "run"},
                    {"input", input},
                    {"provider", a.provider},
                    {"config", to_json(config)}});
  const auto result =
      run_synthesis(g, config.synthesis, *provider, config.seed, audit, embeddings ? &*embeddings : nullptr);

  json history = json::array();
  for (const auto& q : result.state.quality_history) history.push_back(q ? json(*q) : json(nullptr));
  const json summary{{"converged", result.converged},
                     {"iterations", result.iterations},
                     {"nodes_added", result.nodes_added},
                     {"num_nodes", result.graph.node_count()},
                     {"num_edges", result.graph.edge_count()},
                     {"lambda", result.state.lambda},
                     {"tau", result.state.tau},
                     {"quality_history", history},
                     {"failure", result.failure ? json(*result.failure) : json(nullptr)}};

  save_graph(result.graph, output);
  audit.write(a.audit.empty() ? output + ".audit.jsonl" : a.audit);
  if (!c.report.empty()) write_file_atomic(c.report, summary.dump(2) + "\n");

  if (result.failure) {
    spdlog::error("provider failure after {} iterations; partial graph written", result.iterations);
    return kProvider;
  }
  spdlog::info("{} nodes added over {} iterations, {}", result.nodes_added, result.iterations,
               result.converged ? "converged" : "not converged");
  if (a.require_convergence && !result.converged) {
    spdlog::error("did not converge within {} iterations", config.synthesis.max_iterations);
    return kNotConverged;
  }
  return kOk;
}

int run_analyze(const Common& c, const std::string& original, const std::string& other, std::ostream& out) {
  const auto config = effective_config(c);
  config.validate();
  apply_log_level(config);
  emit(to_json(compare_graphs(read_graph(original), read_graph(other))), c.report, out);
  return kOk;
}

struct CoherenceArgs {
  std::string background, candidates, embeddings, ratings;
};

int run_coherence(const Common& c, const CoherenceArgs& a, std::ostream& out) {
  const auto config = effective_config(c);
  config.validate();
  apply_log_level(config);
  const auto table = load_embeddings(a.embeddings);
  const auto bg_ids = read_id_list(a.background);
  const auto cand_ids = read_id_list(a.candidates);
  DirectionOptions options;
  options.seed = config.seed;
  const auto report =
      coherence_report(rows_for(bg_ids, table, a.background), rows_for(cand_ids, table, a.candidates), options);
  json doc = to_json(report, cand_ids);
  if (!a.ratings.empty()) {
    const auto ratings = parse_ratings_csv(read_text(a.ratings));
    const auto agreement = human_algorithm_agreement(ratings, report.scores);
    doc["agreement"] = json{{"traceability", agreement.traceability},
                            {"pearson", agreement.pearson ? json(*agreement.pearson) : json(nullptr)},
                            {"reviewers", ratings.reviewers()}};
  }
  emit(doc, c.report, out);
  return kOk;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out) {
  install_stderr_logger();
  spdlog::set_level(spdlog::level::info);

  CLI::App app{"Text-attributed graph synthesis and analysis", "tagsynth"};
  app.require_subcommand(1);

  Common common;
  std::string in1, in2;

  auto* stats = app.add_subcommand("stats", "Print graph statistics as JSON");
  add_common(*stats, common);
  stats->add_option("graph", in1, "input graph")->required();
  stats->add_option("--report", common.report, "write JSON here instead of stdout");

  std::optional<double> alpha;
  auto* limit = app.add_subcommand("limit", "Distribution-preserving subgraph sample");
  add_common(*limit, common);
  limit->add_option("--alpha", alpha, "sampling ratio in (0, 1]");
  limit->add_option("--report", common.report, "sidecar path (default <output>.sidecar.json)");
  limit->add_option("input", in1)->required();
  limit->add_option("output", in2)->required();

  SynthesizeArgs synth;
  auto* synthesize = app.add_subcommand("synthesize", "Grow a graph with generated nodes");
  add_common(*synthesize, common);
  synthesize->add_option("--provider", synth.provider, "live or mock:PATH")->capture_default_str();
  synthesize->add_option("--embeddings", synth.embeddings, "precomputed node embeddings (JSON)");
  synthesize->add_option("--audit", synth.audit, "audit log path (default <output>.audit.jsonl)");
  synthesize->add_option("--report", common.report, "run summary JSON");
  synthesize->add_flag("--require-convergence", synth.require_convergence, "exit 4 when not converged");
  synthesize->add_flag("--dry-run", synth.dry_run, "print the first iteration's prompts and exit");
  synthesize->add_option("input", in1)->required();
  synthesize->add_option("output", in2);

  auto* analyze = app.add_subcommand("analyze", "Feature similarity of two graphs");
  add_common(*analyze, common);
  analyze->add_option("--report", common.report, "write JSON here instead of stdout");
  analyze->add_option("original", in1)->required();
  analyze->add_option("other", in2)->required();

  CoherenceArgs coh;
  auto* coherence = app.add_subcommand("coherence", "Semantic coherence of candidates against a background");
  add_common(*coherence, common);
  coherence->add_option("--background", coh.background, "background node ids")->required();
  coherence->add_option("--candidates", coh.candidates, "candidate node ids")->required();
  coherence->add_option("--embeddings", coh.embeddings, "node embeddings (JSON)")->required();
  coherence->add_option("--ratings", coh.ratings, "reviewer x instance ratings CSV");
  coherence->add_option("--report", common.report, "write JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kInput;
  }

  try {
    if (*stats) return run_stats(common, in1, out);
    if (*limit) return run_limit(common, alpha, in1, in2);
    if (*synthesize) return run_synthesize(common, synth, in1, in2, out);
    if (*analyze) return run_analyze(common, in1, in2, out);
    if (*coherence) return run_coherence(common, coh, out);
  } catch (const ProviderError& e) {
    spdlog::error("{}", e.what());
    return kProvider;
  } catch (const SchemaError& e) {
    spdlog::error("{}", e.what());
    return kInput;
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kInput;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kInput;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
  return kInput;
}

}  // namespace tagsynth::cli
