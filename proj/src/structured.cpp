#include <algorithm>
#include <cctype>
#include <cmath>

#include "tagsynth/error.hpp"
#include "tagsynth/llm.hpp"

namespace tagsynth {

using nlohmann::json;

std::string_view to_string(OutputSchema schema) {
  switch (schema) {
    case OutputSchema::GeneratedNodes:
      return "generated-nodes";
    case OutputSchema::QualityScores:
      return "quality-scores";
    case OutputSchema::ModeDecision:
      return "mode-decision";
    case OutputSchema::GoalDecision:
      return "goal-decision";
  }
  return "unknown";
}

std::optional<json> extract_json(std::string_view text) {
  for (std::size_t start = 0; start < text.size(); ++start) {
    if (text[start] != '{' && text[start] != '[') continue;
    std::vector<char> stack;
    bool in_string = false, escaped = false;
    std::size_t end = std::string_view::npos;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{' || c == '[') {
        stack.push_back(c == '{' ? '}' : ']');
      } else if (c == '}' || c == ']') {
        if (stack.empty() || stack.back() != c) break;
        stack.pop_back();
        if (stack.empty()) {
          end = i + 1;
          break;
        }
      }
    }
    if (end == std::string_view::npos) continue;
    try {
      return json::parse(text.substr(start, end - start));
    } catch (const json::parse_error&) {
      continue;
    }
  }
  return std::nullopt;
}

namespace {

std::string lower(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n`\"'.{}");
  auto e = s.find_last_not_of(" \t\r\n`\"'.{}");
  return b == std::string_view::npos ? std::string{} : std::string(s.substr(b, e - b + 1));
}

std::optional<std::string> id_of(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return v.is_number_unsigned() ? std::to_string(v.get<std::uint64_t>()) : std::to_string(v.get<std::int64_t>());
  return std::nullopt;
}

std::optional<double> number_of(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      const std::string s = v.get<std::string>();
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

std::optional<std::string> mode_keyword(std::string_view text) {
  const std::string t = lower(text);
  const bool sem = t.find("semantic") != std::string::npos;
  const bool topo = t.find("topolog") != std::string::npos;
  if (sem == topo) return std::nullopt;
  return sem ? "semantic" : "topological";
}

std::optional<bool> goal_keyword(std::string_view text) {
  const std::string t = lower(trim(text));
  for (const char* neg : {"not converged", "not yet converged", "not reached", "not been reached", "not achieved"})
    if (t.find(neg) != std::string::npos) return false;
  if (t == "false" || t == "no") return false;
  if (t == "true" || t == "yes") return true;
  for (const char* pos : {"has converged", "goal reached", "goal achieved"})
    if (t.find(pos) != std::string::npos) return true;
  if (t == "converged") return true;
  return std::nullopt;
}

json parse_nodes(const json& doc) {
  const json* list = &doc;
  if (doc.is_object() && doc.contains("nodes")) list = &doc["nodes"];
  if (!list->is_array()) throw SchemaError("expected a JSON array of node objects");
  json nodes = json::array(), invalid = json::array();
  std::size_t index = 0;
  for (const auto& item : *list) {
    auto reject = [&](const std::string& why) { invalid.push_back(json{{"index", index}, {"reason", why}}); };
    if (!item.is_object()) {
      reject("not an object");
    } else if (!item.contains("node_id") || !id_of(item["node_id"])) {
      reject("missing node_id");
    } else if (!item.contains("label") || !item["label"].is_number_integer()) {
      reject("missing integer label");
    } else if (!item.contains("text") || !item["text"].is_string()) {
      reject("missing text");
    } else {
      json node{{"node_id", *id_of(item["node_id"])},
                {"label", item["label"].get<int>()},
                {"text", item["text"].get<std::string>()},
                {"neighbors", json::array()},
                {"mask", "Train"}};
      bool ok = true;
      if (item.contains("neighbors")) {
        if (!item["neighbors"].is_array()) {
          ok = false;
          reject("neighbors is not an array");
        } else {
          for (const auto& nb : item["neighbors"]) {
            auto id = id_of(nb);
            if (!id) {
              ok = false;
              reject("non-id neighbor entry");
              break;
            }
            node["neighbors"].push_back(*id);
          }
        }
      }
      if (ok && item.contains("mask") && item["mask"].is_string()) node["mask"] = item["mask"];
      if (ok) nodes.push_back(std::move(node));
    }
    ++index;
  }
  return json{{"nodes", std::move(nodes)}, {"invalid", std::move(invalid)}};
}

json parse_scores(const json& doc) {
  json out{{"scores", json::array()}};
  const json* list = &doc;
  if (doc.is_object() && doc.contains("scores")) {
    list = &doc["scores"];
    if (doc.contains("summary") && doc["summary"].is_string()) out["summary"] = doc["summary"];
  }
  auto entry = [&](const std::string& id, const json& item) {
    json e{{"node_id", id}};
    std::optional<double> score;
    if (item.is_object()) {
      if (item.contains("score")) score = number_of(item["score"]);
      if (!score && item.contains("semantic_coherence") && item.contains("structural_integrity")) {
        auto a = number_of(item["semantic_coherence"]), b = number_of(item["structural_integrity"]);
        if (a && b) score = 0.5 * (*a + *b);
      }
      if (item.contains("reason") && item["reason"].is_string()) e["reason"] = item["reason"];
    } else {
      score = number_of(item);
    }
    if (!score || !std::isfinite(*score)) throw SchemaError("no numeric score for node " + id);
    e["score"] = *score;
    out["scores"].push_back(std::move(e));
  };
  if (list->is_array()) {
    for (const auto& item : *list) {
      if (!item.is_object() || !item.contains("node_id") || !id_of(item["node_id"]))
        throw SchemaError("score entries need a node_id");
      entry(*id_of(item["node_id"]), item);
    }
  } else if (list->is_object()) {
    for (const auto& [id, item] : list->items()) {
      if (id == "summary") continue;
      entry(id, item);
    }
  } else {
    throw SchemaError("expected an array of score objects");
  }
  if (out["scores"].empty()) throw SchemaError("no scores in reply");
  return out;
}

}  // namespace

json parse_structured(std::string_view text, OutputSchema schema) {
  auto doc = extract_json(text);
  switch (schema) {
    case OutputSchema::GeneratedNodes:
      if (!doc) throw SchemaError("no JSON value found in reply");
      return parse_nodes(*doc);
    case OutputSchema::QualityScores:
      if (!doc) throw SchemaError("no JSON value found in reply");
      return parse_scores(*doc);
    case OutputSchema::ModeDecision: {
      if (doc && doc->is_object()) {
        for (const char* key : {"mode", "decision"}) {
          if (doc->contains(key) && (*doc)[key].is_string()) {
            auto m = mode_keyword((*doc)[key].get<std::string>());
            if (!m) throw SchemaError("mode must be semantic or topological");
            json out{{"mode", *m}};
            if (doc->contains("reason") && (*doc)["reason"].is_string()) out["reason"] = (*doc)["reason"];
            return out;
          }
        }
        throw SchemaError("mode decision object lacks a \"mode\" field");
      }
      auto m = mode_keyword(text);
      if (!m) throw SchemaError("reply names neither semantic nor topological mode (or both)");
      return json{{"mode", *m}};
    }
    case OutputSchema::GoalDecision: {
      if (doc && doc->is_object()) {
        for (const char* key : {"goal_reached", "converged"}) {
          if (doc->contains(key) && (*doc)[key].is_boolean()) {
            json out{{"goal_reached", (*doc)[key].get<bool>()}};
            if (doc->contains("reason") && (*doc)["reason"].is_string()) out["reason"] = (*doc)["reason"];
            return out;
          }
        }
        throw SchemaError("goal decision object lacks a boolean \"goal_reached\"");
      }
      auto g = goal_keyword(text);
      if (!g) throw SchemaError("reply does not state whether the goal is reached");
      return json{{"goal_reached", *g}};
    }
  }
  throw SchemaError("unknown schema");
}

StructuredReply complete_structured(Provider& provider, ChatRequest request, OutputSchema schema) {
  request.contract = ResponseContract::Json;
  std::string raw = provider.complete(request).text;
  try {
    return {parse_structured(raw, schema), raw, false};
  } catch (const SchemaError& first) {
    ChatRequest repair = request;
    repair.user_prompt += "\n\nYour previous reply could not be used (" + std::string(first.what()) +
                          "). Previous reply:\n" + raw.substr(0, 2000) +
                          "\n\nReply again with only the " + std::string(to_string(schema)) +
                          " JSON value described above, with no commentary.";
    raw = provider.complete(repair).text;
    try {
      return {parse_structured(raw, schema), raw, true};
    } catch (const SchemaError& second) {
      throw StructuredOutputError(std::string(to_string(schema)) + " reply unusable after one repair: " +
                                      second.what(),
                                  raw);
    }
  }
}

}  // namespace tagsynth
