// Discrete length structures: weighted grid graphs realizing the intrinsic
// (semi-)metric of a stratified field on a model space.  An edge along index
// offset o costs sqrt(g(mid)(dx, dx)) with dx the chart displacement of o and
// g evaluated in the stratum of the segment midpoint.  Shortest paths are
// deterministic (ties resolved by node id); zero-weight edges are allowed.
#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "collapse/metric_space.hpp"
#include "collapse/model_space.hpp"
#include "collapse/stratified.hpp"

namespace collapse {

// Neighbor offsets: axis steps, optional diagonals ({-1,0,1} patterns),
// optional 2D knight moves, plus caller-supplied extra index offsets (used by
// scenarios whose geodesics hug a non-grid direction).
struct StencilConfig {
  bool diagonals = true;
  bool knight = false;
  std::vector<std::vector<int>> extra;

  // Canonical half set: one representative per +-pair (first nonzero > 0);
  // extras are appended verbatim.
  std::vector<std::vector<int>> offsets(int dim) const;
};

// Shortest-path table that tolerates +infinity (disconnected restrictions).
struct DistanceMatrix {
  int n = 0;
  std::vector<double> d;  // row-major n*n

  double operator()(int i, int j) const { return d[static_cast<size_t>(i) * n + j]; }
  bool all_finite() const;
  // check_error on any non-finite entry (the intrinsic metric demands a
  // connected graph); otherwise validates the metric axioms.
  SemiMetricSpace to_semimetric() const;
};

struct GraphEdge {
  int a = 0, b = 0;
  double w = 0;
};

struct InducedSubgraph;

class GeodesicGraph {
 public:
  static GeodesicGraph build(const ModelSpace& model, const StratifiedMetricField& field,
                             const StencilConfig& stencil = {});

  // Graph with caller-supplied node coordinates and edge weights (>= 0).
  static GeodesicGraph from_edges(std::vector<Eigen::VectorXd> coords,
                                  std::vector<GraphEdge> edges);

  int node_count() const { return static_cast<int>(coords_.size()); }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const Eigen::VectorXd& coord(int node) const { return coords_[node]; }
  int degree(int node) const { return head_[node + 1] - head_[node]; }

  std::vector<double> dijkstra(int source) const;
  // Multi-source variant with per-source initial offsets (all >= 0).
  std::vector<double> dijkstra_multi(std::span<const std::pair<int, double>> sources) const;
  double eccentricity(int source) const;  // +inf when disconnected
  DistanceMatrix all_pairs(int threads = 1) const;

  // Induced subgraph on the given node set (duplicates ignored).
  InducedSubgraph subgraph(std::span<const int> keep) const;

  nlohmann::json to_json() const;  // { "nodes": [[coords]], "edges": [[a, b, w]] }

 private:
  std::vector<Eigen::VectorXd> coords_;
  std::vector<GraphEdge> edges_;
  std::vector<int> head_, adj_;  // CSR over undirected incidence
  std::vector<double> wt_;

  void finalize();
};

struct InducedSubgraph {
  GeodesicGraph graph;
  std::vector<int> to_old;    // new node id -> original id
  std::vector<int> from_old;  // original id -> new id or -1
};

// Full intrinsic semi-metric of the graph; check_error when disconnected.
SemiMetricSpace all_pairs_distance(const GeodesicGraph& graph, int threads = 1);

// A path in cover (unwrapped) chart coordinates; consecutive points should be
// within one stencil step.  Lengths price each segment at its midpoint's
// stratum, wrapping the midpoint into the fundamental domain.
struct PathPolyline {
  std::vector<Eigen::VectorXd> points;
};

double path_length(const ModelSpace& model, const StratifiedMetricField& field,
                   const PathPolyline& path);

// Grid path from a start node and a list of index offsets.
PathPolyline polyline_from_steps(const ModelSpace& model, int start_node,
                                 const std::vector<std::vector<int>>& steps);

}  // namespace collapse
