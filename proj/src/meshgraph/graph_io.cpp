#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gefm/meshgraph/graph.hpp"

namespace gefm::mesh {

namespace {

using nlohmann::json;

constexpr const char* kSchema = "gefm-graph/1";

const char* kind_str(Kind k) { return k == Kind::multiscale ? "multiscale" : "hierarchical"; }
const char* geometry_str(Geometry g) { return g == Geometry::spherical ? "spherical" : "planar"; }

Kind parse_kind(const std::string& s) {
  if (s == "multiscale") return Kind::multiscale;
  if (s == "hierarchical") return Kind::hierarchical;
  throw std::invalid_argument("unknown graph kind '" + s + "'");
}

Geometry parse_geometry(const std::string& s) {
  if (s == "spherical") return Geometry::spherical;
  if (s == "planar") return Geometry::planar;
  throw std::invalid_argument("unknown geometry '" + s + "'");
}

}  // namespace

std::string to_json(const MeshGraph& graph) {
  json j;
  j["schema"] = kSchema;
  j["kind"] = kind_str(graph.kind);
  j["geometry"] = geometry_str(graph.geometry);
  j["grid"] = {{"geometry", geometry_str(graph.grid.geometry)},
               {"rows", graph.grid.rows},
               {"cols", graph.grid.cols},
               {"lat0", graph.grid.lat0},
               {"dlat", graph.grid.dlat},
               {"lon0", graph.grid.lon0},
               {"dlon", graph.grid.dlon}};
  j["num_levels"] = graph.num_levels;
  j["level_sizes"] = graph.level_sizes;

  json nodes = json::array();
  const auto listed = graph.nodes();
  for (const auto& n : listed) {
    const auto& p = graph.positions[static_cast<std::size_t>(n.level)][n.id - graph.level_offset(n.level)];
    nodes.push_back({{"id", n.id}, {"level", n.level}, {"pos", {n.pos[0], n.pos[1]}}, {"xyz", {p.x, p.y, p.z}}});
  }
  j["nodes"] = std::move(nodes);

  json sets = json::array();
  for (const auto& e : graph.edge_sets) {
    const auto so = graph.level_offset(e.sender_level), ro = graph.level_offset(e.receiver_level);
    json pairs = json::array();
    for (const auto& [a, b] : e.edges) pairs.push_back({so + a, ro + b});
    sets.push_back({{"name", e.name},
                    {"sender_level", e.sender_level},
                    {"receiver_level", e.receiver_level},
                    {"pairs", std::move(pairs)}});
  }
  j["edge_sets"] = std::move(sets);
  j["features"] = {{"node_width", graph.features.node_width},
                   {"edge_width", graph.features.edge_width},
                   {"length_scale", graph.features.length_scale},
                   {"node", graph.features.node},
                   {"edge", graph.features.edge}};
  return j.dump();
}

MeshGraph from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("schema").get<std::string>() != kSchema) {
    throw std::invalid_argument("unsupported graph schema '" + j.at("schema").get<std::string>() + "'");
  }
  MeshGraph g;
  g.kind = parse_kind(j.at("kind").get<std::string>());
  g.geometry = parse_geometry(j.at("geometry").get<std::string>());
  const auto& gr = j.at("grid");
  g.grid.geometry = parse_geometry(gr.at("geometry").get<std::string>());
  g.grid.rows = gr.at("rows").get<std::size_t>();
  g.grid.cols = gr.at("cols").get<std::size_t>();
  g.grid.lat0 = gr.at("lat0").get<double>();
  g.grid.dlat = gr.at("dlat").get<double>();
  g.grid.lon0 = gr.at("lon0").get<double>();
  g.grid.dlon = gr.at("dlon").get<double>();
  g.num_levels = j.at("num_levels").get<std::size_t>();
  g.level_sizes = j.at("level_sizes").get<std::vector<std::size_t>>();
  if (g.level_sizes.size() != g.num_levels + 1) throw std::invalid_argument("graph file: level_sizes mis-sized");

  g.positions.resize(g.level_sizes.size());
  for (std::size_t l = 0; l < g.level_sizes.size(); ++l) g.positions[l].resize(g.level_sizes[l]);
  const auto& nodes = j.at("nodes");
  if (nodes.size() != g.total_nodes()) throw std::invalid_argument("graph file: node count mismatch");
  for (const auto& n : nodes) {
    const int level = n.at("level").get<int>();
    if (level < 0 || level > static_cast<int>(g.num_levels)) throw std::invalid_argument("graph file: bad node level");
    const auto id = n.at("id").get<std::size_t>();
    const auto offset = g.level_offset(level);
    if (id < offset || id - offset >= g.level_size(level)) throw std::invalid_argument("graph file: node id out of range");
    const auto& xyz = n.at("xyz");
    g.positions[static_cast<std::size_t>(level)][id - offset] = {xyz.at(0).get<double>(), xyz.at(1).get<double>(),
                                                                 xyz.at(2).get<double>()};
  }
  for (const auto& s : j.at("edge_sets")) {
    EdgeSet e;
    e.name = s.at("name").get<std::string>();
    e.sender_level = s.at("sender_level").get<int>();
    e.receiver_level = s.at("receiver_level").get<int>();
    const auto so = g.level_offset(e.sender_level), ro = g.level_offset(e.receiver_level);
    for (const auto& p : s.at("pairs")) {
      const auto a = p.at(0).get<std::size_t>(), b = p.at(1).get<std::size_t>();
      if (a < so || b < ro) throw std::invalid_argument("graph file: edge endpoint outside its level");
      e.edges.emplace_back(static_cast<std::uint32_t>(a - so), static_cast<std::uint32_t>(b - ro));
    }
    g.edge_sets.push_back(std::move(e));
  }
  const auto& f = j.at("features");
  g.features.node_width = f.at("node_width").get<std::size_t>();
  g.features.edge_width = f.at("edge_width").get<std::size_t>();
  g.features.length_scale = f.at("length_scale").get<double>();
  g.features.node = f.at("node").get<std::vector<std::vector<double>>>();
  g.features.edge = f.at("edge").get<std::vector<std::vector<double>>>();
  const auto problems = validate(g);
  if (!problems.empty()) throw std::invalid_argument("graph file invalid: " + problems.front());
  return g;
}

void save_graph(const MeshGraph& graph, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << to_json(graph);
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot move graph into '" + path + "'");
}

MeshGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read graph '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace gefm::mesh
