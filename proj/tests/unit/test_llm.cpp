#include <httplib.h>
#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "tagsynth/error.hpp"
#include "tagsynth/llm.hpp"

using namespace tagsynth;
using nlohmann::json;

namespace {

ChatRequest request(AgentRole role, std::string user = "report") {
  ChatRequest r;
  r.role = role;
  r.system_prompt = "system";
  r.user_prompt = std::move(user);
  return r;
}

// Serves chat completions, failing the first `failures` requests with `status`.
struct StubServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};

  StubServer(int failures, int status, std::string reply = "ok") {
    server.Post("/v1/chat/completions", [this, failures, status, reply](const httplib::Request& req, httplib::Response& res) {
      const int n = ++hits;
      if (n <= failures) {
        res.status = status;
        res.set_content("{\"error\": \"injected\"}", "application/json");
        return;
      }
      auto body = json::parse(req.body);
      json out{{"choices", json::array({json{{"message", json{{"role", "assistant"}, {"content", reply}}}}})},
               {"usage", json{{"prompt_tokens", 11}, {"completion_tokens", 3}}},
               {"echo_model", body["model"]}};
      res.set_content(out.dump(), "application/json");
    });
    server.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
      auto body = json::parse(req.body);
      json data = json::array();
      for (std::size_t i = 0; i < body["input"].size(); ++i)
        data.push_back(json{{"index", i}, {"embedding", {static_cast<double>(body["input"][i].get<std::string>().size()), 1.0}}});
      res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~StubServer() {
    server.stop();
    thread.join();
  }
};

ProviderConfig fast_config(int port) {
  ProviderConfig c;
  c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  c.timeout_seconds = 2.0;
  c.backoff_base_ms = 1.0;
  c.backoff_max_ms = 5.0;
  return c;
}

}  // namespace

TEST_CASE("mock replays scripted replies by prompt hash") {
  const auto req = request(AgentRole::Manager);
  MockProvider mock(json{{"Manager:" + prompt_hash(req), "semantic"}});
  CHECK(mock.complete(req).text == "semantic");
  CHECK_THROWS_AS(mock.complete(request(AgentRole::Manager, "other")), PermanentProviderError);
}

TEST_CASE("mock lookup precedence and sequences") {
  MockProvider mock(json{{"Goal#2", "second goal"},
                         {"1", "first call"},
                         {"Goal", json{{"sequence", {"a", "b"}}}},
                         {"*", json{{"x", 1}}}});
  CHECK(mock.complete(request(AgentRole::Goal)).text == "first call");
  CHECK(mock.complete(request(AgentRole::Goal)).text == "second goal");
  CHECK(mock.complete(request(AgentRole::Goal)).text == "a");
  CHECK(mock.complete(request(AgentRole::Goal)).text == "b");
  CHECK(mock.complete(request(AgentRole::Goal)).text == "b");
  CHECK(mock.complete(request(AgentRole::Evaluation)).text == "{\"x\":1}");
  CHECK(mock.calls() == 6);
}

TEST_CASE("http provider retries 5xx and reports retries") {
  StubServer stub(2, 500, "semantic");
  HttpProvider provider(fast_config(stub.port), 7);
  AuditLog log;
  AuditedProvider audited(provider, log);
  auto r = audited.complete(request(AgentRole::Manager));
  CHECK(r.text == "semantic");
  CHECK(r.retries == 2);
  CHECK(stub.hits == 3);
  REQUIRE(log.entries().size() == 1);
  CHECK(log.entries()[0]["retries"] == 2);
  CHECK(log.entries()[0]["prompt_tokens"] == 11);
  CHECK(log.entries()[0].contains("latency_ms"));
}

TEST_CASE("http provider retries 429") {
  StubServer stub(1, 429);
  HttpProvider provider(fast_config(stub.port));
  CHECK(provider.complete(request(AgentRole::Goal)).retries == 1);
}

TEST_CASE("http 4xx is permanent and not retried") {
  StubServer stub(5, 404);
  HttpProvider provider(fast_config(stub.port));
  CHECK_THROWS_AS(provider.complete(request(AgentRole::Goal)), PermanentProviderError);
  CHECK(stub.hits == 1);
}

TEST_CASE("exhausted retries raise a transport error") {
  StubServer stub(100, 503);
  auto cfg = fast_config(stub.port);
  cfg.max_retries = 2;
  HttpProvider provider(cfg);
  CHECK_THROWS_AS(provider.complete(request(AgentRole::Goal)), TransportError);
  CHECK(stub.hits == 3);
}

TEST_CASE("silent server times out after max_retries + 1 attempts") {
  // A listening socket that never accepts: connects succeed, reads hang.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  REQUIRE(::listen(fd, 16) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);

  auto cfg = fast_config(ntohs(addr.sin_port));
  cfg.timeout_seconds = 0.2;
  cfg.max_retries = 2;
  HttpProvider provider(cfg);
  const auto start = std::chrono::steady_clock::now();
  try {
    provider.complete(request(AgentRole::Goal));
    FAIL("expected a transport error");
  } catch (const TransportError& e) {
    CHECK(std::string(e.what()).find("after 3 attempts") != std::string::npos);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  // Bounded by attempts x (timeout + max backoff), with slack for scheduling.
  CHECK(seconds < 3 * (0.2 + 0.005) + 1.0);
  ::close(fd);
}

TEST_CASE("http embeddings keep order across batches") {
  StubServer stub(0, 200);
  auto cfg = fast_config(stub.port);
  cfg.embedding_batch = 2;
  cfg.max_inflight = 2;
  HttpProvider provider(cfg);
  std::vector<std::string> texts{"a", "bb", "ccc", "dddd", "eeeee"};
  auto v = provider.embed(texts);
  REQUIRE(v.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(v[i][0] == static_cast<double>(i + 1));
  std::vector<std::string> bad{"ok", ""};
  CHECK_THROWS_AS(provider.embed(bad), ValidationError);
}

TEST_CASE("provider config validation") {
  ProviderConfig c;
  c.timeout_seconds = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.endpoint = "localhost:8000";
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("hash embeddings are deterministic, unit norm, and discriminate") {
  MockProvider mock(json::object(), 3);
  std::vector<std::string> texts{"case retrieval by activation passing", "case retrieval by activation passing",
                                 "evolution strategies for dynamic environments"};
  auto v = mock.embed(texts);
  CHECK(v[0] == v[1]);
  double norm = 0, dot = 0;
  for (std::size_t i = 0; i < v[0].size(); ++i) {
    norm += v[0][i] * v[0][i];
    dot += v[0][i] * v[2][i];
  }
  CHECK(norm == doctest::Approx(1.0));
  CHECK(dot < 1.0 - 1e-9);
  for (double x : v[2]) CHECK(x >= 0.0);
  CHECK(hash_embedding("Same Text", 3) == hash_embedding("same text", 3));
  CHECK(hash_embedding("same text", 3) != hash_embedding("same text", 4));
  CHECK_THROWS_AS(hash_embedding("", 1), ValidationError);
}

TEST_CASE("extract_json tolerates fences, prose and stray brackets") {
  auto v = extract_json("Here you go [see below]:\n```json\n{\"a\": \"x}y\", \"b\": [1, 2]}\n```\nThanks!");
  REQUIRE(v);
  CHECK((*v)["a"] == "x}y");
  CHECK((*v)["b"].size() == 2);
  CHECK_FALSE(extract_json("no json here"));
  CHECK_FALSE(extract_json("{\"unterminated\": 1"));
}

TEST_CASE("generated nodes parse from a fenced array with commentary") {
  const std::string reply = R"(```json
[{"node_id": "new_node 4", "label": 3, "neighbors": [1290, 263],
  "mask": "Train",
  "text": "Title: Hybrid Neural-Symbolic Architecture for Interpretable Knowledge Extraction\n Abstract: Omitted due to table size limitation."},
 {"node_id": "broken", "text": "no label"}]
```
These nodes bridge the sparse region.)";
  auto v = parse_structured(reply, OutputSchema::GeneratedNodes);
  REQUIRE(v["nodes"].size() == 1);
  CHECK(v["nodes"][0]["node_id"] == "new_node 4");
  CHECK(v["nodes"][0]["label"] == 3);
  CHECK(v["nodes"][0]["neighbors"] == json::array({"1290", "263"}));
  REQUIRE(v["invalid"].size() == 1);
  CHECK(v["invalid"][0]["index"] == 1);
  CHECK_THROWS_AS(parse_structured("\"just a string\"", OutputSchema::GeneratedNodes), SchemaError);
}

TEST_CASE("quality scores accept several shapes") {
  auto a = parse_structured(R"({"scores": [{"node_id": "n1", "score": 8.5}], "summary": "fine"})",
                            OutputSchema::QualityScores);
  CHECK(a["scores"][0]["score"] == 8.5);
  CHECK(a["summary"] == "fine");
  auto b = parse_structured(R"([{"node_id": 7, "semantic_coherence": 8, "structural_integrity": "6"}])",
                            OutputSchema::QualityScores);
  CHECK(b["scores"][0]["node_id"] == "7");
  CHECK(b["scores"][0]["score"] == 7.0);
  auto c = parse_structured(R"({"n1": 3, "n2": {"score": 9}})", OutputSchema::QualityScores);
  CHECK(c["scores"].size() == 2);
  CHECK_THROWS_AS(parse_structured(R"([{"node_id": "n1"}])", OutputSchema::QualityScores), SchemaError);
}

TEST_CASE("mode and goal decisions") {
  CHECK(parse_structured("semantic", OutputSchema::ModeDecision)["mode"] == "semantic");
  CHECK(parse_structured("Decision: Semantic Enhancement", OutputSchema::ModeDecision)["mode"] == "semantic");
  CHECK(parse_structured(R"({"mode": "Topological", "reason": "sparse"})", OutputSchema::ModeDecision)["mode"] ==
        "topological");
  CHECK_THROWS_AS(parse_structured("either", OutputSchema::ModeDecision), SchemaError);
  CHECK_THROWS_AS(parse_structured("semantic or topological", OutputSchema::ModeDecision), SchemaError);

  CHECK(parse_structured("the entire synthesis process has not converged.", OutputSchema::GoalDecision)
            ["goal_reached"] == false);
  CHECK(parse_structured(R"({"goal_reached": true, "reason": "stable"})", OutputSchema::GoalDecision)
            ["goal_reached"] == true);
  CHECK(parse_structured("yes", OutputSchema::GoalDecision)["goal_reached"] == true);
  CHECK_THROWS_AS(parse_structured("maybe later", OutputSchema::GoalDecision), SchemaError);
}

TEST_CASE("structured completion repairs once then fails hard") {
  MockProvider mock(json{{"Evaluation", json{{"sequence", {"garbage", R"([{"node_id": "a", "score": 4}])"}}}},
                         {"Goal", "still garbage"}});
  auto ok = complete_structured(mock, request(AgentRole::Evaluation), OutputSchema::QualityScores);
  CHECK(ok.repaired);
  CHECK(ok.value["scores"][0]["score"] == 4.0);

  try {
    complete_structured(mock, request(AgentRole::Goal), OutputSchema::GoalDecision);
    FAIL("expected a structured-output error");
  } catch (const StructuredOutputError& e) {
    CHECK(e.raw() == "still garbage");
  }
  CHECK(mock.calls() == 4);
}

TEST_CASE("audit omits latency for deterministic providers and records errors") {
  MockProvider mock(json{{"Manager", "semantic"}});
  AuditLog log;
  AuditedProvider audited(mock, log);
  audited.complete(request(AgentRole::Manager));
  CHECK_THROWS(audited.complete(request(AgentRole::Goal)));
  REQUIRE(log.entries().size() == 2);
  CHECK_FALSE(log.entries()[0].contains("latency_ms"));
  CHECK(log.entries()[0]["reply_hash"] == text_hash("semantic"));
  CHECK(log.entries()[1].contains("error"));
  CHECK(log.to_jsonl().find('\n') != std::string::npos);
}
