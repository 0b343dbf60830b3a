#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "cli.hpp"
#include "tagsynth/graph.hpp"
#include "tagsynth/llm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using tagsynth::cli::dispatch;

namespace {

const std::string kData = TAGSYNTH_TEST_DATA;
const std::string kGraph = kData + "/case_study_graph.json";
const std::string kScript = "mock:" + kData + "/case_study_script.json";

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("tagsynth_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int run(std::vector<std::string> args, std::string* captured = nullptr) {
  args.insert(args.begin(), "tagsynth");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  const int code = dispatch(static_cast<int>(argv.size()), argv.data(), out);
  if (captured) *captured = out.str();
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run({}) == 2);
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({"stats"}) == 2);
  CHECK(run({"stats", kGraph, "--bogus"}) == 2);
  CHECK(run({"limit", "--alpha", "x", kGraph, "o.json"}) == 2);
  std::string text;
  CHECK(run({"--help"}, &text) == 0);
  CHECK(text.find("synthesize") != std::string::npos);
}

TEST_CASE("missing input exits 2") {
  TempDir dir;
  CHECK(run({"stats", dir / "absent.json"}) == 2);
  CHECK(run({"synthesize", "--provider", kScript, dir / "absent.json", dir / "out.json"}) == 2);
  CHECK_FALSE(fs::exists(dir / "out.json"));
}

TEST_CASE("stats prints graph statistics") {
  std::string text;
  REQUIRE(run({"stats", kGraph}, &text) == 0);
  const auto j = json::parse(text);
  CHECK(j["num_nodes"] == 180);
  CHECK(j["num_edges"] == 333);
}

TEST_CASE("synthesize is reproducible and echoes the effective config") {
  TempDir dir;
  write(dir / "cfg.json", R"({"seed": 5, "synthesis": {"max_iterations": 1}})");
  for (const char* name : {"a.json", "b.json"})
    REQUIRE(run({"synthesize", "--config", dir / "cfg.json", "--seed", "1", "--provider", kScript, kGraph,
                 dir / name}) == 0);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(slurp(dir / "a.json.audit.jsonl") == slurp(dir / "b.json.audit.jsonl"));

  std::istringstream audit(slurp(dir / "a.json.audit.jsonl"));
  std::string first;
  std::getline(audit, first);
  const auto run_entry = json::parse(first);
  CHECK(run_entry["event"] == "run");
  CHECK(run_entry["config"]["seed"] == 1);  // flag beats file
  CHECK(run_entry["config"]["synthesis"]["max_iterations"] == 1);  // file beats default
  CHECK(run_entry["config"]["synthesis"]["tau0"] == 7.0);

  const auto g = tagsynth::load_graph(dir / "a.json");
  CHECK(g.node_count() == 184);
  CHECK(g.find("new_node 4"));
}

TEST_CASE("synthesize exit codes") {
  TempDir dir;
  write(dir / "cfg.json", R"({"synthesis": {"max_iterations": 1}})");
  CHECK(run({"synthesize", "--config", dir / "cfg.json", "--provider", kScript, "--require-convergence", kGraph,
             dir / "o.json", "--report", dir / "summary.json"}) == 4);
  const auto summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary["converged"] == false);
  CHECK(summary["nodes_added"] == 4);

  write(dir / "thin.json", R"({"Manager": "semantic"})");
  CHECK(run({"synthesize", "--config", dir / "cfg.json", "--provider", "mock:" + (dir / "thin.json"), kGraph,
             dir / "p.json"}) == 3);
  CHECK(fs::exists(dir / "p.json"));  // graph so far
  CHECK(slurp(dir / "p.json.audit.jsonl").find("\"failure\"") != std::string::npos);

  write(dir / "bad.json", R"({"synthesis": {"tau": 7}})");
  CHECK(run({"synthesize", "--config", dir / "bad.json", "--provider", kScript, kGraph, dir / "q.json"}) == 2);
  CHECK_FALSE(fs::exists(dir / "q.json"));
  CHECK(run({"synthesize", "--provider", "remote", kGraph, dir / "r.json"}) == 2);
  CHECK(run({"synthesize", "--provider", kScript, kGraph}) == 2);
}

TEST_CASE("dry run prints prompts and writes nothing") {
  TempDir dir;
  std::string text;
  REQUIRE(run({"synthesize", "--dry-run", kGraph, dir / "o.json"}, &text) == 0);
  CHECK(text.find("=== Manager") != std::string::npos);
  CHECK(text.find("new_node 1") != std::string::npos);
  CHECK(fs::is_empty(dir.path));
}

TEST_CASE("limit writes the sample and a sidecar") {
  TempDir dir;
  REQUIRE(run({"limit", "--alpha", "0.25", "--seed", "2", kGraph, dir / "s.json"}) == 0);
  CHECK(tagsynth::load_graph(dir / "s.json").node_count() == 45);
  const auto sidecar = json::parse(slurp(dir / "s.json.sidecar.json"));
  CHECK(sidecar["alpha"] == 0.25);
  CHECK(sidecar["config"]["limiter"]["alpha"] == 0.25);
  CHECK(sidecar.contains("original"));
  CHECK(run({"limit", "--alpha", "1.5", kGraph, dir / "t.json"}) == 2);

  REQUIRE(run({"analyze", kGraph, dir / "s.json", "--report", dir / "r.json"}) == 0);
  const auto report = json::parse(slurp(dir / "r.json"));
  CHECK(report["degree_ks"]["n"] == 180);
  CHECK(report["degree_ks"]["m"] == 45);
}

TEST_CASE("coherence with ratings") {
  TempDir dir;
  write(dir / "emb.json", R"({"1": [1, 0, 0], "2": [0.9, 0.1, 0], "3": [1, 0.2, 0], "4": [0, 1, 0], "5": [0.7, 0.7, 0]})");
  write(dir / "bg.json", "[1, 2, 3]");
  write(dir / "cand.json", R"({"ids": ["4", "5", "1"]})");
  write(dir / "r.csv", "reviewer,a,b,c\nr1,0.1,0.6,1\nr2,0.2,0.5;0.5;0.8,0.9\n");
  std::string text;
  REQUIRE(run({"coherence", "--background", dir / "bg.json", "--candidates", dir / "cand.json", "--embeddings",
               dir / "emb.json", "--ratings", dir / "r.csv"},
              &text) == 0);
  const auto j = json::parse(text);
  CHECK(j["agreement"]["reviewers"] == 2);
  CHECK(j["agreement"]["pearson"].get<double>() > 0.9);

  write(dir / "cand2.json", R"(["9"])");
  CHECK(run({"coherence", "--background", dir / "bg.json", "--candidates", dir / "cand2.json", "--embeddings",
             dir / "emb.json"}) == 2);
}
