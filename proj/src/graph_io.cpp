#include <algorithm>
#include <fstream>
#include <sstream>
#include <system_error>

#include "tagsynth/error.hpp"
#include "tagsynth/graph.hpp"

namespace tagsynth {

using nlohmann::json;

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

// Integer ids are canonicalized to their decimal string.
std::string id_token(const json& v, const std::string& field, bool* numeric = nullptr) {
  if (v.is_string()) {
    if (numeric) *numeric = false;
    return v.get<std::string>();
  }
  if (v.is_number_integer()) {
    if (numeric) *numeric = true;
    return v.is_number_unsigned() ? std::to_string(v.get<std::uint64_t>()) : std::to_string(v.get<std::int64_t>());
  }
  throw SchemaError(field + ": expected string or integer id");
}

json id_value(const NodeRecord& rec) {
  if (rec.numeric_id) return json::parse(rec.id);
  return rec.id;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return buf.str();
}

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ":" + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place: " + path.string());
  }
}

TextAttributedGraph graph_from_json(const json& doc, NormalizationReport* report) {
  if (!doc.is_object()) throw SchemaError("top level: expected object");
  if (!doc.contains("class_count") || !doc["class_count"].is_number_integer())
    throw SchemaError("class_count: expected integer");
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw SchemaError("nodes: expected array");

  const int class_count = doc["class_count"].get<int>();
  std::vector<NodeRecord> records;
  records.reserve(doc["nodes"].size());
  std::size_t k = 0;
  for (const auto& item : doc["nodes"]) {
    const std::string where = "nodes[" + std::to_string(k++) + "]";
    if (!item.is_object()) throw SchemaError(where + ": expected object");
    NodeRecord rec;
    if (!item.contains("node_id")) throw SchemaError(where + ".node_id: missing");
    rec.id = id_token(item["node_id"], where + ".node_id", &rec.numeric_id);
    if (!item.contains("label") || !item["label"].is_number_integer())
      throw SchemaError(where + ".label: expected integer");
    rec.label = item["label"].get<int>();
    if (!item.contains("text") || !item["text"].is_string()) throw SchemaError(where + ".text: expected string");
    rec.text = item["text"].get<std::string>();
    if (item.contains("neighbors")) {
      if (!item["neighbors"].is_array()) throw SchemaError(where + ".neighbors: expected array");
      for (const auto& nb : item["neighbors"]) rec.neighbors.push_back(id_token(nb, where + ".neighbors"));
    }
    if (item.contains("mask")) {
      if (!item["mask"].is_string()) throw SchemaError(where + ".mask: expected string");
      auto mask = parse_mask(item["mask"].get<std::string>());
      if (!mask) throw SchemaError(where + ".mask: expected Train, Validation or Test");
      rec.mask = *mask;
    }
    records.push_back(std::move(rec));
  }
  return TextAttributedGraph::build(std::move(records), class_count, report);
}

json graph_to_json(const TextAttributedGraph& g) {
  json nodes = json::array();
  for (const auto& rec : g.nodes()) {
    json neighbors = json::array();
    for (const auto& nb : rec.neighbors) neighbors.push_back(id_value(g.node(g.index_of(nb))));
    nodes.push_back(json{{"node_id", id_value(rec)},
                         {"label", rec.label},
                         {"text", rec.text},
                         {"neighbors", std::move(neighbors)},
                         {"mask", std::string(to_string(rec.mask))}});
  }
  return json{{"class_count", g.class_count()}, {"nodes", std::move(nodes)}};
}

TextAttributedGraph load_graph(const std::filesystem::path& path, NormalizationReport* report) {
  const json doc = read_json_file(path);
  try {
    return graph_from_json(doc, report);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_graph(const TextAttributedGraph& g, const std::filesystem::path& path) {
  write_file_atomic(path, graph_to_json(g).dump(2) + "\n");
}

json to_json(const GraphStats& s) {
  json hist = json::object();
  for (const auto& [deg, count] : s.degree_histogram) hist[std::to_string(deg)] = count;
  json labels = json::object();
  for (const auto& [label, count] : s.label_distribution) labels[std::to_string(label)] = count;
  json out{{"num_nodes", s.num_nodes},
           {"num_edges", s.num_edges},
           {"avg_degree", s.avg_degree},
           {"density", s.density},
           {"clustering_coefficient", s.clustering_coefficient},
           {"avg_path_length", s.avg_path_length},
           {"connected_components", s.connected_components},
           {"largest_component_size", s.largest_component_size},
           {"degree_distribution", std::move(hist)},
           {"label_distribution", std::move(labels)}};
  if (s.avg_path_length_sampled) out["avg_path_length_sampled"] = true;
  return out;
}

GraphStats stats_from_json(const json& doc) {
  auto field = [&](const char* key) -> const json& {
    if (!doc.is_object() || !doc.contains(key)) throw SchemaError(std::string("stats.") + key + ": missing");
    return doc[key];
  };
  try {
    GraphStats s;
    s.num_nodes = field("num_nodes").get<std::size_t>();
    s.num_edges = field("num_edges").get<std::size_t>();
    s.avg_degree = field("avg_degree").get<double>();
    s.density = field("density").get<double>();
    s.clustering_coefficient = field("clustering_coefficient").get<double>();
    s.avg_path_length = field("avg_path_length").get<double>();
    s.connected_components = field("connected_components").get<std::size_t>();
    s.largest_component_size = field("largest_component_size").get<std::size_t>();
    s.avg_path_length_sampled = doc.value("avg_path_length_sampled", false);
    if (doc.contains("degree_distribution"))
      for (const auto& [k, v] : doc["degree_distribution"].items()) s.degree_histogram[std::stoul(k)] = v.get<std::size_t>();
    if (doc.contains("label_distribution"))
      for (const auto& [k, v] : doc["label_distribution"].items()) s.label_distribution[std::stoi(k)] = v.get<std::size_t>();
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("stats: ") + e.what());
  } catch (const std::logic_error& e) {
    throw SchemaError(std::string("stats: bad numeric key: ") + e.what());
  }
}

}  // namespace tagsynth
