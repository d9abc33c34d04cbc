#include "collapse/geodesic_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include <nlohmann/json.hpp>

#include "collapse/common.hpp"

namespace collapse {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::vector<std::vector<int>> StencilConfig::offsets(int dim) const {
  require(dim >= 1, "stencil: dimension must be positive");
  std::vector<std::vector<int>> out;
  if (diagonals) {
    // Enumerate {-1,0,1}^dim, keep nonzero offsets whose first nonzero is +1.
    std::vector<int> off(dim, -1);
    while (true) {
      int first = 0;
      while (first < dim && off[first] == 0) ++first;
      if (first < dim && off[first] > 0) out.push_back(off);
      int a = dim - 1;
      while (a >= 0 && off[a] == 1) off[a--] = -1;
      if (a < 0) break;
      ++off[a];
    }
  } else {
    for (int a = 0; a < dim; ++a) {
      std::vector<int> off(dim, 0);
      off[a] = 1;
      out.push_back(off);
    }
  }
  if (knight) {
    require(dim == 2, "stencil: knight moves are only defined in dimension 2");
    out.push_back({1, 2});
    out.push_back({2, 1});
    out.push_back({1, -2});
    out.push_back({2, -1});
  }
  for (const auto& e : extra) {
    require(static_cast<int>(e.size()) == dim, "stencil: extra offset has wrong dimension");
    require(std::any_of(e.begin(), e.end(), [](int v) { return v != 0; }),
            "stencil: extra offset is zero");
    out.push_back(e);
  }
  return out;
}

bool DistanceMatrix::all_finite() const {
  return std::all_of(d.begin(), d.end(), [](double v) { return std::isfinite(v); });
}

SemiMetricSpace DistanceMatrix::to_semimetric() const {
  ensure(all_finite(), "distance matrix has unreachable pairs (graph not connected)");
  return SemiMetricSpace::from_full(n, d);
}

GeodesicGraph GeodesicGraph::build(const ModelSpace& model, const StratifiedMetricField& field,
                                   const StencilConfig& stencil) {
  require(model.max_step() > 0, "geodesic graph: non-positive grid resolution");
  require(field.dim == model.dim(), "geodesic graph: field/model dimension mismatch");

  GeodesicGraph g;
  const int n = model.node_count();
  g.coords_.reserve(n);
  for (int v = 0; v < n; ++v) g.coords_.push_back(model.coord(v));

  const auto offs = stencil.offsets(model.dim());
  for (int v = 0; v < n; ++v) {
    for (const auto& off : offs) {
      const int w = model.neighbor(v, off);
      if (w < 0 || w == v) continue;  // off-grid or identified with itself
      const Eigen::VectorXd dx = model.displacement(off);
      const Eigen::VectorXd mid = model.wrap(g.coords_[v] + 0.5 * dx);
      const double q = dx.dot(field.at(mid) * dx);
      ensure(q > -1e-9 * (1.0 + dx.squaredNorm()),
             "geodesic graph: negative squared length along an edge");
      g.edges_.push_back({v, w, std::sqrt(std::max(0.0, q))});
    }
  }
  g.finalize();
  return g;
}

GeodesicGraph GeodesicGraph::from_edges(std::vector<Eigen::VectorXd> coords,
                                        std::vector<GraphEdge> edges) {
  GeodesicGraph g;
  g.coords_ = std::move(coords);
  const int n = g.node_count();
  for (const auto& e : edges) {
    require(e.a >= 0 && e.a < n && e.b >= 0 && e.b < n, "from_edges: endpoint out of range");
    require(e.w >= 0 && std::isfinite(e.w), "from_edges: weights must be finite and >= 0");
    require(e.a != e.b, "from_edges: self edges are not allowed");
  }
  g.edges_ = std::move(edges);
  g.finalize();
  return g;
}

void GeodesicGraph::finalize() {
  const int n = node_count();
  head_.assign(n + 1, 0);
  for (const auto& e : edges_) {
    ++head_[e.a + 1];
    ++head_[e.b + 1];
  }
  for (int v = 0; v < n; ++v) head_[v + 1] += head_[v];
  adj_.resize(edges_.size() * 2);
  wt_.resize(edges_.size() * 2);
  std::vector<int> cursor(head_.begin(), head_.end() - 1);
  for (const auto& e : edges_) {
    adj_[cursor[e.a]] = e.b;
    wt_[cursor[e.a]++] = e.w;
    adj_[cursor[e.b]] = e.a;
    wt_[cursor[e.b]++] = e.w;
  }
}

std::vector<double> GeodesicGraph::dijkstra(int source) const {
  const std::pair<int, double> one[] = {{source, 0.0}};
  return dijkstra_multi(one);
}

std::vector<double> GeodesicGraph::dijkstra_multi(
    std::span<const std::pair<int, double>> sources) const {
  const int n = node_count();
  std::vector<double> dist(n, kInf);
  using Item = std::pair<double, int>;  // (distance, node id): id breaks ties
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (const auto& [v, d0] : sources) {
    require(v >= 0 && v < n, "dijkstra: source out of range");
    require(d0 >= 0, "dijkstra: negative source offset");
    if (d0 < dist[v]) {
      dist[v] = d0;
      heap.emplace(d0, v);
    }
  }
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    for (int it = head_[v]; it < head_[v + 1]; ++it) {
      const int w = adj_[it];
      const double nd = d + wt_[it];
      if (nd < dist[w]) {
        dist[w] = nd;
        heap.emplace(nd, w);
      }
    }
  }
  return dist;
}

double GeodesicGraph::eccentricity(int source) const {
  const auto dist = dijkstra(source);
  return *std::max_element(dist.begin(), dist.end());
}

DistanceMatrix GeodesicGraph::all_pairs(int threads) const {
  const int n = node_count();
  DistanceMatrix m;
  m.n = n;
  m.d.resize(static_cast<size_t>(n) * n);
  parallel_for(n, threads, [&](int r) {
    const auto row = dijkstra(r);
    std::copy(row.begin(), row.end(), m.d.begin() + static_cast<size_t>(r) * n);
  });
  return m;
}

InducedSubgraph GeodesicGraph::subgraph(std::span<const int> keep) const {
  InducedSubgraph s;
  s.from_old.assign(node_count(), -1);
  for (const int v : keep) {
    require(v >= 0 && v < node_count(), "subgraph: node out of range");
    if (s.from_old[v] < 0) {
      s.from_old[v] = static_cast<int>(s.to_old.size());
      s.to_old.push_back(v);
    }
  }
  s.graph.coords_.reserve(s.to_old.size());
  for (const int v : s.to_old) s.graph.coords_.push_back(coords_[v]);
  for (const auto& e : edges_) {
    const int a = s.from_old[e.a], b = s.from_old[e.b];
    if (a >= 0 && b >= 0) s.graph.edges_.push_back({a, b, e.w});
  }
  s.graph.finalize();
  return s;
}

nlohmann::json GeodesicGraph::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& c : coords_) {
    nlohmann::json row = nlohmann::json::array();
    for (int i = 0; i < c.size(); ++i) row.push_back(c[i]);
    nodes.push_back(std::move(row));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : edges_) edges.push_back({e.a, e.b, e.w});
  return nlohmann::json{{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

SemiMetricSpace all_pairs_distance(const GeodesicGraph& graph, int threads) {
  return graph.all_pairs(threads).to_semimetric();
}

double path_length(const ModelSpace& model, const StratifiedMetricField& field,
                   const PathPolyline& path) {
  require(field.dim == model.dim(), "path_length: field/model dimension mismatch");
  require(!path.points.empty(), "path_length: empty path");
  double total = 0;
  for (size_t t = 0; t + 1 < path.points.size(); ++t) {
    const Eigen::VectorXd dx = path.points[t + 1] - path.points[t];
    const Eigen::VectorXd mid = model.wrap(0.5 * (path.points[t] + path.points[t + 1]));
    const double q = dx.dot(field.at(mid) * dx);
    ensure(q > -1e-9 * (1.0 + dx.squaredNorm()),
           "path_length: negative squared length along a segment");
    total += std::sqrt(std::max(0.0, q));
  }
  return total;
}

PathPolyline polyline_from_steps(const ModelSpace& model, int start_node,
                                 const std::vector<std::vector<int>>& steps) {
  require(start_node >= 0 && start_node < model.node_count(),
          "polyline_from_steps: start node out of range");
  PathPolyline p;
  p.points.push_back(model.coord(start_node));
  for (const auto& off : steps) {
    require(static_cast<int>(off.size()) == model.dim(),
            "polyline_from_steps: step has wrong dimension");
    p.points.push_back(p.points.back() +
                       model.displacement(std::span<const int>(off.data(), off.size())));
  }
  return p;
}

}  // namespace collapse
