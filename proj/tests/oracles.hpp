// Reference implementations and generators used to cross-check the library
// from the tests.  Everything here is deliberately naive and independent of
// the production code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "collapse/geodesic_graph.hpp"
#include "collapse/metric_space.hpp"

namespace testutil {

// Dense relaxation over all intermediate nodes; the classic cubic recursion.
inline std::vector<double> floyd_warshall(const collapse::GeodesicGraph& g) {
  const int n = g.node_count();
  std::vector<double> d(static_cast<size_t>(n) * n, std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i) d[static_cast<size_t>(i) * n + i] = 0;
  for (const collapse::GraphEdge& e : g.edges()) {
    auto& ab = d[static_cast<size_t>(e.a) * n + e.b];
    auto& ba = d[static_cast<size_t>(e.b) * n + e.a];
    ab = std::min(ab, e.w);
    ba = std::min(ba, e.w);
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      const double dik = d[static_cast<size_t>(i) * n + k];
      if (!std::isfinite(dik)) continue;
      for (int j = 0; j < n; ++j) {
        const double v = dik + d[static_cast<size_t>(k) * n + j];
        if (v < d[static_cast<size_t>(i) * n + j]) d[static_cast<size_t>(i) * n + j] = v;
      }
    }
  return d;
}

inline std::vector<Eigen::Vector3d> random_cloud(collapse::Rng& rng, int n, double scale = 1.0) {
  std::vector<Eigen::Vector3d> pts(n);
  for (auto& p : pts)
    p = scale * Eigen::Vector3d(collapse::uniform(rng, 0.0, 1.0),
                                collapse::uniform(rng, 0.0, 1.0),
                                collapse::uniform(rng, 0.0, 1.0));
  return pts;
}

inline collapse::SemiMetricSpace space_of_cloud(const std::vector<Eigen::Vector3d>& pts) {
  const int n = static_cast<int>(pts.size());
  std::vector<double> full(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      full[static_cast<size_t>(i) * n + j] = (pts[i] - pts[j]).norm();
  return collapse::SemiMetricSpace::from_full(n, full);
}

inline collapse::SemiMetricSpace random_cloud_space(collapse::Rng& rng, int n,
                                                    double scale = 1.0) {
  return space_of_cloud(random_cloud(rng, n, scale));
}

inline Eigen::MatrixXd random_spd(collapse::Rng& rng, int d, double ridge = 0.2) {
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = collapse::uniform(rng, -1.0, 1.0);
  return m.transpose() * m + ridge * Eigen::MatrixXd::Identity(d, d);
}

inline collapse::CorrespondenceMap random_map(collapse::Rng& rng, int from, int to) {
  collapse::CorrespondenceMap f;
  f.target_size = to;
  f.to.resize(from);
  for (int i = 0; i < from; ++i) f.to[i] = collapse::uniform_int(rng, 0, to - 1);
  return f;
}

// Hausdorff distance straight from the definition.
inline double brute_hausdorff(const collapse::SemiMetricSpace& ambient,
                              const std::vector<int>& a, const std::vector<int>& b) {
  double h = 0;
  for (int x : a) {
    double best = std::numeric_limits<double>::infinity();
    for (int y : b) best = std::min(best, ambient(x, y));
    h = std::max(h, best);
  }
  for (int y : b) {
    double best = std::numeric_limits<double>::infinity();
    for (int x : a) best = std::min(best, ambient(x, y));
    h = std::max(h, best);
  }
  return h;
}

// Distortion and covering defect straight from the definitions.
inline double brute_distortion(const collapse::CorrespondenceMap& f,
                               const collapse::SemiMetricSpace& x,
                               const collapse::SemiMetricSpace& xp) {
  double d = 0;
  for (int i = 0; i < x.size(); ++i)
    for (int j = i + 1; j < x.size(); ++j)
      d = std::max(d, std::abs(xp(f.to[i], f.to[j]) - x(i, j)));
  return d;
}

inline double brute_net_defect(const collapse::CorrespondenceMap& f,
                               const collapse::SemiMetricSpace& xp) {
  double worst = 0;
  for (int y = 0; y < xp.size(); ++y) {
    double best = std::numeric_limits<double>::infinity();
    for (int img : f.to) best = std::min(best, xp(img, y));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace testutil
