#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "dynsolve/common.hpp"

namespace dynsolve {

/// Undirected graph of dipole source locations. Edges carry the
/// inter-dipole distance (mm) used to weight neighbor interactions.
struct SourceGraph {
  Eigen::MatrixX3d positions;               // p x 3, mm
  std::vector<std::vector<int>> neighbors;  // per-node sorted neighbor indices
  std::vector<std::vector<double>> distances;  // parallel to neighbors, mm

  int num_nodes() const { return static_cast<int>(positions.rows()); }

  // Throws ConfigError if the neighbor relation is asymmetric, an edge has
  // nonpositive distance, or a self-edge is present.
  void validate() const;
};

struct GraphEdge {
  int i = 0;
  int j = 0;
  double distance = 0.0;
};

SourceGraph make_source_graph(const Eigen::MatrixX3d& positions,
                              const std::vector<GraphEdge>& edges);

std::vector<GraphEdge> graph_edges(const SourceGraph& graph);

// Synthetic graphs; edge distances are the Euclidean gaps.
SourceGraph make_ring_graph(int num_nodes, double spacing_mm);
SourceGraph make_grid_graph(int rows, int cols, double spacing_mm);

// Latitude-longitude band on a sphere (longitude wraps). Nodes sit at cell
// centers, so refining with doubled counts interleaves cleanly.
SourceGraph make_sphere_graph(int n_lat, int n_lon, double radius_mm,
                              double lat_min_deg = -60.0,
                              double lat_max_deg = 60.0);

// JSON document: {"positions": [[x,y,z],...], "edges": [[i,j,distance],...]}
SourceGraph load_graph_json(const std::string& path);
void save_graph_json(const std::string& path, const SourceGraph& graph);

}  // namespace dynsolve
