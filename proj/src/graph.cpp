#include "dynsolve/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace dynsolve {

using nlohmann::json;

void SourceGraph::validate() const {
  const int p = num_nodes();
  if (static_cast<int>(neighbors.size()) != p ||
      static_cast<int>(distances.size()) != p) {
    throw ConfigError("graph: neighbor/distance lists do not match node count");
  }
  for (int i = 0; i < p; ++i) {
    if (neighbors[i].size() != distances[i].size()) {
      throw ConfigError("graph: neighbor and distance lists differ at node " +
                        std::to_string(i));
    }
    for (size_t k = 0; k < neighbors[i].size(); ++k) {
      const int j = neighbors[i][k];
      if (j < 0 || j >= p) {
        throw ConfigError("graph: neighbor index out of range");
      }
      if (j == i) {
        throw ConfigError("graph: self-edge at node " + std::to_string(i));
      }
      if (!(distances[i][k] > 0.0) || !std::isfinite(distances[i][k])) {
        throw ConfigError("graph: nonpositive edge distance at node " +
                          std::to_string(i));
      }
      // symmetry: j must list i with the same distance
      const auto& nj = neighbors[j];
      auto it = std::find(nj.begin(), nj.end(), i);
      if (it == nj.end()) {
        throw ConfigError("graph: asymmetric neighbor relation (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
      }
      const size_t kj = static_cast<size_t>(it - nj.begin());
      if (std::abs(distances[j][kj] - distances[i][k]) >
          1e-12 * std::max(1.0, distances[i][k])) {
        throw ConfigError("graph: asymmetric edge distance (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

SourceGraph make_source_graph(const Eigen::MatrixX3d& positions,
                              const std::vector<GraphEdge>& edges) {
  SourceGraph g;
  g.positions = positions;
  const int p = g.num_nodes();
  g.neighbors.assign(p, {});
  g.distances.assign(p, {});
  std::set<std::pair<int, int>> seen;
  for (const auto& e : edges) {
    if (e.i < 0 || e.i >= p || e.j < 0 || e.j >= p) {
      throw ConfigError("graph: edge index out of range");
    }
    if (e.i == e.j) {
      throw ConfigError("graph: self-edge rejected");
    }
    if (!(e.distance > 0.0) || !std::isfinite(e.distance)) {
      throw ConfigError("graph: edge distance must be positive");
    }
    auto key = std::minmax(e.i, e.j);
    if (!seen.insert(key).second) continue;  // ignore duplicate edges
    g.neighbors[e.i].push_back(e.j);
    g.distances[e.i].push_back(e.distance);
    g.neighbors[e.j].push_back(e.i);
    g.distances[e.j].push_back(e.distance);
  }
  // keep neighbor lists sorted for deterministic iteration
  for (int i = 0; i < p; ++i) {
    std::vector<size_t> order(g.neighbors[i].size());
    for (size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return g.neighbors[i][a] < g.neighbors[i][b];
    });
    std::vector<int> nb(order.size());
    std::vector<double> ds(order.size());
    for (size_t k = 0; k < order.size(); ++k) {
      nb[k] = g.neighbors[i][order[k]];
      ds[k] = g.distances[i][order[k]];
    }
    g.neighbors[i] = std::move(nb);
    g.distances[i] = std::move(ds);
  }
  g.validate();
  return g;
}

std::vector<GraphEdge> graph_edges(const SourceGraph& graph) {
  std::vector<GraphEdge> edges;
  for (int i = 0; i < graph.num_nodes(); ++i) {
    for (size_t k = 0; k < graph.neighbors[i].size(); ++k) {
      const int j = graph.neighbors[i][k];
      if (j > i) edges.push_back({i, j, graph.distances[i][k]});
    }
  }
  return edges;
}

SourceGraph make_ring_graph(int num_nodes, double spacing_mm) {
  if (num_nodes < 3) throw ConfigError("ring graph needs at least 3 nodes");
  if (!(spacing_mm > 0.0)) throw ConfigError("ring spacing must be positive");
  // place nodes on a circle whose chord length equals the spacing
  const double pi = 3.14159265358979323846;
  const double radius = spacing_mm / (2.0 * std::sin(pi / num_nodes));
  Eigen::MatrixX3d pos(num_nodes, 3);
  std::vector<GraphEdge> edges;
  for (int i = 0; i < num_nodes; ++i) {
    const double a = 2.0 * pi * i / num_nodes;
    pos.row(i) << radius * std::cos(a), radius * std::sin(a), 0.0;
    edges.push_back({i, (i + 1) % num_nodes, spacing_mm});
  }
  return make_source_graph(pos, edges);
}

SourceGraph make_grid_graph(int rows, int cols, double spacing_mm) {
  if (rows < 1 || cols < 1) throw ConfigError("grid dimensions must be >= 1");
  if (!(spacing_mm > 0.0)) throw ConfigError("grid spacing must be positive");
  Eigen::MatrixX3d pos(rows * cols, 3);
  std::vector<GraphEdge> edges;
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      pos.row(id(r, c)) << c * spacing_mm, r * spacing_mm, 0.0;
      if (c + 1 < cols) edges.push_back({id(r, c), id(r, c + 1), spacing_mm});
      if (r + 1 < rows) edges.push_back({id(r, c), id(r + 1, c), spacing_mm});
    }
  }
  return make_source_graph(pos, edges);
}

SourceGraph make_sphere_graph(int n_lat, int n_lon, double radius_mm,
                              double lat_min_deg, double lat_max_deg) {
  if (n_lat < 2 || n_lon < 3) throw ConfigError("sphere band needs >= 2x3 nodes");
  if (!(radius_mm > 0.0)) throw ConfigError("sphere radius must be positive");
  if (!(lat_max_deg > lat_min_deg)) throw ConfigError("empty latitude band");
  const double pi = 3.14159265358979323846;
  const double lat_step = (lat_max_deg - lat_min_deg) / n_lat;
  auto id = [n_lon](int i, int j) { return i * n_lon + j; };

  Eigen::MatrixX3d pos(n_lat * n_lon, 3);
  for (int i = 0; i < n_lat; ++i) {
    const double lat = (lat_min_deg + (i + 0.5) * lat_step) * pi / 180.0;
    for (int j = 0; j < n_lon; ++j) {
      const double lon = (j + 0.5) * 2.0 * pi / n_lon;
      pos.row(id(i, j)) << radius_mm * std::cos(lat) * std::cos(lon),
          radius_mm * std::cos(lat) * std::sin(lon),
          radius_mm * std::sin(lat);
    }
  }
  std::vector<GraphEdge> edges;
  auto dist = [&](int a, int b) { return (pos.row(a) - pos.row(b)).norm(); };
  for (int i = 0; i < n_lat; ++i) {
    for (int j = 0; j < n_lon; ++j) {
      const int a = id(i, j);
      const int east = id(i, (j + 1) % n_lon);
      edges.push_back({a, east, dist(a, east)});
      if (i + 1 < n_lat) {
        const int north = id(i + 1, j);
        edges.push_back({a, north, dist(a, north)});
      }
    }
  }
  return make_source_graph(pos, edges);
}

SourceGraph load_graph_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open graph file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("graph json parse error in " + path + ": " + e.what());
  }
  if (!doc.contains("positions") || !doc.contains("edges")) {
    throw IoError("graph json missing positions/edges: " + path);
  }
  const auto& jp = doc["positions"];
  Eigen::MatrixX3d pos(jp.size(), 3);
  for (size_t i = 0; i < jp.size(); ++i) {
    if (jp[i].size() != 3) throw IoError("graph position is not a 3-vector");
    for (int k = 0; k < 3; ++k) pos(static_cast<int>(i), k) = jp[i][k].get<double>();
  }
  std::vector<GraphEdge> edges;
  for (const auto& je : doc["edges"]) {
    if (je.size() != 3) throw IoError("graph edge is not [i, j, distance]");
    edges.push_back({je[0].get<int>(), je[1].get<int>(), je[2].get<double>()});
  }
  return make_source_graph(pos, edges);
}

void save_graph_json(const std::string& path, const SourceGraph& graph) {
  json doc;
  doc["positions"] = json::array();
  for (int i = 0; i < graph.num_nodes(); ++i) {
    doc["positions"].push_back(
        {graph.positions(i, 0), graph.positions(i, 1), graph.positions(i, 2)});
  }
  doc["edges"] = json::array();
  for (const auto& e : graph_edges(graph)) {
    doc["edges"].push_back({e.i, e.j, e.distance});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write graph file: " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace dynsolve
