#include "collapse/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <utility>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace collapse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double trend_slack(double v) { return 1e-9 * std::max(1.0, std::abs(v)); }

bool rows_monotone(const TrendTable& t, bool nonincreasing) {
  for (const auto& row : t.value)
    for (size_t i = 0; i + 1 < row.size(); ++i) {
      if (nonincreasing && row[i + 1] > row[i] + trend_slack(row[i])) return false;
      if (!nonincreasing && row[i + 1] < row[i] - trend_slack(row[i])) return false;
    }
  return true;
}

bool cols_monotone(const TrendTable& t, bool nonincreasing) {
  if (t.value.empty()) return true;
  for (size_t mi = 0; mi < t.value[0].size(); ++mi)
    for (size_t ri = 0; ri + 1 < t.value.size(); ++ri) {
      const double a = t.value[ri][mi], b = t.value[ri + 1][mi];
      if (nonincreasing && b > a + trend_slack(a)) return false;
      if (!nonincreasing && b < a - trend_slack(a)) return false;
    }
  return true;
}

ConditionVerdict grade_quantity(const TrendTable& t, double threshold) {
  ConditionVerdict v;
  v.monotone_mu = rows_monotone(t, /*nonincreasing=*/true);
  v.monotone_r = cols_monotone(t, /*nonincreasing=*/true);
  v.final_value = t.final_value();
  v.threshold = threshold;
  v.final_ok = v.final_value <= threshold;
  v.pass = v.monotone_mu && v.final_ok;
  return v;
}

ConditionVerdict grade_lambda(const TrendTable& t, double lambda_tol) {
  ConditionVerdict v;
  v.monotone_mu = rows_monotone(t, /*nonincreasing=*/false);
  v.monotone_r = true;  // the exterior grows as r shrinks; no trend is implied
  v.final_value = t.final_value();
  v.threshold = lambda_tol;
  v.final_ok = 1.0 - v.final_value <= lambda_tol;
  v.pass = v.monotone_mu && v.final_ok;
  return v;
}

void init_table(TrendTable& t, const CollapseScenario& s) {
  t.r = s.r_grid;
  t.mu = s.mu_grid;
  t.value.assign(s.r_grid.size(), std::vector<double>(s.mu_grid.size(), 0.0));
}

// Snaps a chart point (possibly an unwrapped cover point) to its grid node.
int node_at(const ModelSpace& m, const Eigen::VectorXd& p) {
  require(p.size() == m.dim(), "path point dimension mismatch");
  const Eigen::VectorXd w = m.wrap(p);
  std::vector<int> idx(m.dim());
  for (int a = 0; a < m.dim(); ++a) {
    const double fi = w[a] / m.axis(a).step;
    const long r = std::lround(fi);
    require(std::abs(fi - static_cast<double>(r)) <= 1e-6, "path point off the grid");
    idx[a] = static_cast<int>(r);
  }
  const int v = m.node_from_index(idx);
  require(v >= 0, "path point outside the model");
  return v;
}

// Boundary shells at one radius: exterior nodes with a graph edge into each
// region's neighborhood.
std::vector<std::vector<int>> boundary_shells(const GeodesicGraph& g,
                                              const std::vector<char>& exterior,
                                              const std::vector<int>& region_of,
                                              int n_regions) {
  const int n = g.node_count();
  std::vector<std::vector<int>> shells(n_regions);
  std::vector<char> seen(static_cast<size_t>(std::max(1, n_regions)) * n, 0);
  auto mark = [&](int a, int b) {
    if (!exterior[a] || region_of[b] < 0) return;
    char& c = seen[static_cast<size_t>(region_of[b]) * n + a];
    if (!c) {
      c = 1;
      shells[region_of[b]].push_back(a);
    }
  };
  for (const GraphEdge& e : g.edges()) {
    mark(e.a, e.b);
    mark(e.b, e.a);
  }
  for (auto& sh : shells) std::sort(sh.begin(), sh.end());
  return shells;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

nlohmann::json table_json(const TrendTable& t) {
  return {{"r", t.r}, {"mu", t.mu}, {"value", t.value}};
}

nlohmann::json verdict_json(const ConditionVerdict& v) {
  return {{"monotone_mu", v.monotone_mu}, {"monotone_r", v.monotone_r},
          {"final_value", v.final_value}, {"threshold", v.threshold},
          {"final_ok", v.final_ok},       {"pass", v.pass}};
}

}  // namespace

RestrictedSpace restricted_distance(const CollapseScenario& s, int r_index,
                                    std::optional<double> mu, int threads) {
  require(r_index >= 0 && r_index < static_cast<int>(s.r_grid.size()),
          "restricted_distance: r index out of range");
  GeodesicGraph g =
      mu ? GeodesicGraph::build(*s.e1, s.family.at_mu(*mu), s.family.stencil_at_mu(*mu))
         : GeodesicGraph::build(*s.e2, *s.g_inf, s.stencil_e2);
  const std::vector<int> keep = exterior_nodes(s, mu ? 1 : 2, r_index);
  ensure(!keep.empty(), "restricted exterior E^(r) is empty");
  InducedSubgraph sub = g.subgraph(keep);
  DistanceMatrix dm = sub.graph.all_pairs(threads);
  ensure(dm.all_finite(), "restricted exterior E^(r) is disconnected at this resolution");
  return {dm.to_semimetric(), std::move(sub.to_old)};
}

ConditionReport check_conditions(const CollapseScenario& s, int threads) {
  validate_scenario(s);
  const int n1 = s.e1->node_count(), n2 = s.e2->node_count();
  require(n1 <= 6000 && n2 <= 6000, "check_conditions: model too large for dense tables");
  const int nr = static_cast<int>(s.r_grid.size());
  const int nm = static_cast<int>(s.mu_grid.size());

  ConditionReport rep;
  init_table(rep.field_gap, s);
  init_table(rep.lambda, s);
  init_table(rep.fiber_diam_mu, s);
  init_table(rep.fiber_diam_inf, s);
  init_table(rep.boundary_gap, s);

  std::vector<std::vector<int>> ext1(nr);
  for (int ri = 0; ri < nr; ++ri) {
    ext1[ri] = exterior_nodes(s, 1, ri);
    ensure(!ext1[ri].empty(), "exterior E^(r) is empty");
  }

  const StratifiedMetricField ref = preset_flat(s.e1->dim());
  const StratifiedMetricField& ginf1 = *s.g_inf_on_e1;

  // Limit distances on E2.
  GeodesicGraph ginf_graph = GeodesicGraph::build(*s.e2, *s.g_inf, s.stencil_e2);
  DistanceMatrix dinf = ginf_graph.all_pairs(threads);
  ensure(dinf.all_finite(), "limit graph is disconnected");

  // (iii): fiber class diameters under d^inf; constant across the mu axis.
  for (int ri = 0; ri < nr; ++ri) {
    double worst = 0;
    for (const auto& reg : s.regions) {
      for (int cls = 0; cls < reg.class_count; ++cls) {
        std::vector<int> nodes;
        for (int v : reg.u2[ri])
          if (reg.f2[v] == cls) nodes.push_back(v);
        ensure(!nodes.empty(), "empty fiber class inside U^(r)");
        for (size_t i = 0; i < nodes.size(); ++i)
          for (size_t j = i + 1; j < nodes.size(); ++j)
            worst = std::max(worst, dinf(nodes[i], nodes[j]));
      }
    }
    for (int mi = 0; mi < nm; ++mi) rep.fiber_diam_inf.value[ri][mi] = worst;
  }

  for (int mi = 0; mi < nm; ++mi) {
    const double mu = s.mu_grid[mi];
    const StratifiedMetricField gmu = s.family.at_mu(mu);

    // (i): pointwise form gap, then the supremum over each exterior.
    std::vector<double> gapv(n1);
    for (int v = 0; v < n1; ++v) {
      const Eigen::VectorXd p = s.e1->coord(v);
      gapv[v] = norm_bound(gmu.at(p) - ginf1.at(p), ref.at(p));
    }
    for (int ri = 0; ri < nr; ++ri) {
      double g = 0;
      for (int v : ext1[ri]) g = std::max(g, gapv[v]);
      rep.field_gap.value[ri][mi] = g;
      rep.lambda.value[ri][mi] = lambda_sup(gmu, ginf1, *s.e1, ext1[ri]);
    }

    // Level distances on E1.
    GeodesicGraph g = GeodesicGraph::build(*s.e1, gmu, s.family.stencil_at_mu(mu));
    DistanceMatrix dmu = g.all_pairs(threads);
    ensure(dmu.all_finite(), "level graph is disconnected");

    // (ii): fiber class diameters under d^mu.
    for (int ri = 0; ri < nr; ++ri) {
      double worst = 0;
      for (const auto& reg : s.regions) {
        for (int cls = 0; cls < reg.class_count; ++cls) {
          std::vector<int> nodes;
          for (int v : reg.u1[ri])
            if (reg.f1[v] == cls) nodes.push_back(v);
          ensure(!nodes.empty(), "empty fiber class inside U^(r)");
          for (size_t i = 0; i < nodes.size(); ++i)
            for (size_t j = i + 1; j < nodes.size(); ++j)
              worst = std::max(worst, dmu(nodes[i], nodes[j]));
        }
      }
      rep.fiber_diam_mu.value[ri][mi] = worst;
    }

    // (iv): boundary shell gap |d^mu - d^inf o Phi|.
    for (int ri = 0; ri < nr; ++ri) {
      std::vector<char> exterior(n1, 0);
      for (int v : ext1[ri]) exterior[v] = 1;
      std::vector<int> region_of(n1, -1);
      for (size_t j = 0; j < s.regions.size(); ++j)
        for (int v : s.regions[j].u1[ri]) region_of[v] = static_cast<int>(j);
      const auto shells = boundary_shells(g, exterior, region_of, s.n_regions());
      double worst = 0;
      for (const auto& sh : shells) {
        ensure(!sh.empty(), "empty boundary shell");
        for (size_t i = 0; i < sh.size(); ++i)
          for (size_t j = i + 1; j < sh.size(); ++j)
            worst = std::max(worst, std::abs(dmu(sh[i], sh[j]) -
                                             dinf(s.phi[sh[i]], s.phi[sh[j]])));
      }
      rep.boundary_gap.value[ri][mi] = worst;
    }
  }

  rep.v_field_gap = grade_quantity(rep.field_gap, s.threshold);
  rep.v_lambda = grade_lambda(rep.lambda, s.lambda_tol);
  rep.v_fiber_mu = grade_quantity(rep.fiber_diam_mu, s.threshold);
  rep.v_fiber_inf = grade_quantity(rep.fiber_diam_inf, s.threshold);
  rep.v_boundary = grade_quantity(rep.boundary_gap, s.threshold);
  rep.all_pass = rep.v_field_gap.pass && rep.v_lambda.pass && rep.v_fiber_mu.pass &&
                 rep.v_fiber_inf.pass && rep.v_boundary.pass;
  return rep;
}

LiftResult lift_path(const DiscreteFibration& fib, const StratifiedMetricField& field,
                     const PathPolyline& base_path, int e0, int e1) {
  const ModelSpace& total = *fib.total;
  const ModelSpace& base = *fib.base;
  require(field.dim == total.dim(), "lift_path: field dimension mismatch");
  const int layers = static_cast<int>(base_path.points.size());
  require(layers >= 1, "lift_path: empty base path");
  const int nb = static_cast<int>(fib.base_axes.size());
  const int m = static_cast<int>(fib.fiber_axes.size());
  require(e0 >= 0 && e0 < total.node_count() && e1 >= 0 && e1 < total.node_count(),
          "lift_path: endpoint out of range");

  std::vector<int> bnode(layers);
  for (int t = 0; t < layers; ++t) bnode[t] = node_at(base, base_path.points[t]);
  require(fib.proj[e0] == bnode[0], "lift_path: start point is not in the initial fiber");
  require(fib.proj[e1] == bnode[layers - 1], "lift_path: end point is not in the final fiber");
  require(layers >= 2 || e0 == e1, "lift_path: single-layer path with distinct endpoints");

  auto fiber_coord = [&](int x) {
    Eigen::VectorXd c(m);
    const Eigen::VectorXd p = total.coord(x);
    for (int i = 0; i < m; ++i) c[i] = p[fib.fiber_axes[i]];
    return c;
  };
  auto min_delta = [&](const Eigen::VectorXd& from, const Eigen::VectorXd& to) {
    Eigen::VectorXd d = to - from;
    for (int i = 0; i < m; ++i) {
      const auto& ax = total.axis(fib.fiber_axes[i]);
      if (ax.periodic) d[i] = std::remainder(d[i], ax.count * ax.step);
    }
    return d;
  };

  std::vector<double> cost(fib.fibers[bnode[0]].size(), kInf);
  {
    const auto& f0 = fib.fibers[bnode[0]];
    for (size_t i = 0; i < f0.size(); ++i)
      if (f0[i] == e0) cost[i] = 0;
  }
  std::vector<std::vector<int>> parent(layers);

  Eigen::VectorXd delta = Eigen::VectorXd::Zero(total.dim());
  Eigen::VectorXd mid = Eigen::VectorXd::Zero(total.dim());
  for (int t = 0; t + 1 < layers; ++t) {
    const auto& fa = fib.fibers[bnode[t]];
    const auto& fb = fib.fibers[bnode[t + 1]];
    const Eigen::VectorXd& p0 = base_path.points[t];
    const Eigen::VectorXd& p1 = base_path.points[t + 1];
    std::vector<double> nxt(fb.size(), kInf);
    parent[t + 1].assign(fb.size(), -1);
    for (size_t i = 0; i < fa.size(); ++i) {
      if (!std::isfinite(cost[i])) continue;
      const Eigen::VectorXd ca = fiber_coord(fa[i]);
      for (size_t l = 0; l < fb.size(); ++l) {
        const Eigen::VectorXd df = min_delta(ca, fiber_coord(fb[l]));
        for (int a = 0; a < nb; ++a) {
          delta[fib.base_axes[a]] = p1[a] - p0[a];
          mid[fib.base_axes[a]] = 0.5 * (p0[a] + p1[a]);
        }
        for (int i2 = 0; i2 < m; ++i2) {
          delta[fib.fiber_axes[i2]] = df[i2];
          mid[fib.fiber_axes[i2]] = ca[i2] + 0.5 * df[i2];
        }
        const double q = delta.dot(field.at(total.wrap(mid)) * delta);
        ensure(q > -1e-9 * (1 + delta.squaredNorm()), "lift chord priced negative");
        const double w = cost[i] + std::sqrt(std::max(0.0, q));
        if (w < nxt[l]) {
          nxt[l] = w;
          parent[t + 1][l] = static_cast<int>(i);
        }
      }
    }
    cost.swap(nxt);
  }

  const auto& fl = fib.fibers[bnode[layers - 1]];
  int li = -1;
  for (size_t i = 0; i < fl.size(); ++i)
    if (fl[i] == e1) li = static_cast<int>(i);
  require(li >= 0, "lift_path: end point is not in the final fiber");
  ensure(std::isfinite(cost[li]), "lift_path: end point unreachable");

  LiftResult res;
  res.cost = cost[li];
  std::vector<int> pick(layers);
  pick[layers - 1] = li;
  for (int t = layers - 1; t > 0; --t) pick[t - 1] = parent[t][pick[t]];
  res.nodes.resize(layers);
  for (int t = 0; t < layers; ++t) res.nodes[t] = fib.fibers[bnode[t]][pick[t]];

  Eigen::VectorXd fc = fiber_coord(res.nodes[0]);
  for (int t = 0; t < layers; ++t) {
    if (t > 0) fc += min_delta(fiber_coord(res.nodes[t - 1]), fiber_coord(res.nodes[t]));
    Eigen::VectorXd p = Eigen::VectorXd::Zero(total.dim());
    for (int a = 0; a < nb; ++a) p[fib.base_axes[a]] = base_path.points[t][a];
    for (int i = 0; i < m; ++i) p[fib.fiber_axes[i]] = fc[i];
    res.path.points.push_back(std::move(p));
  }
  return res;
}

double apriori_bound(const DiscreteFibration& fib, const StratifiedMetricField& field,
                     const PathPolyline& base_path, std::span<const LiftResult> lifts) {
  const ModelSpace& total = *fib.total;
  const ModelSpace& base = *fib.base;
  require(field.dim == total.dim(), "apriori_bound: field dimension mismatch");
  const int layers = static_cast<int>(base_path.points.size());
  require(layers >= 2, "apriori_bound: need at least one segment");
  const int nb = static_cast<int>(fib.base_axes.size());

  const McLContext ctx =
      McLContext::make(std::make_shared<const DiscreteFibration>(fib),
                       std::make_shared<const StratifiedMetricField>(field));

  double c = 0;
  for (int t = 0; t + 1 < layers; ++t) {
    const Eigen::VectorXd db = base_path.points[t + 1] - base_path.points[t];
    const double len = db.norm();
    require(len > 0, "apriori_bound: zero-length base segment");
    const Eigen::VectorXd u = db / len;
    for (int endpoint = 0; endpoint < 2; ++endpoint) {
      const int b = node_at(base, base_path.points[t + endpoint]);
      for (int x : fib.fibers[b]) {
        const double v = ctx.minimal_lift_value(x, u);
        c = std::max(c, v * v);
      }
    }
  }

  const double root = std::sqrt(c);
  for (const LiftResult& lift : lifts) {
    const auto& pts = lift.path.points;
    for (size_t t = 0; t + 1 < pts.size(); ++t) {
      const Eigen::VectorXd d = pts[t + 1] - pts[t];
      const Eigen::VectorXd wm = total.wrap(0.5 * (pts[t] + pts[t + 1]));
      const double q = d.dot(field.at(wm) * d);
      const double step_cost = std::sqrt(std::max(0.0, q));
      double blen2 = 0;
      for (int a = 0; a < nb; ++a) blen2 += d[fib.base_axes[a]] * d[fib.base_axes[a]];
      ensure(step_cost <= root * std::sqrt(blen2) * (1 + 1e-9) + 1e-12,
             "lift step exceeds the a-priori speed bound");
    }
  }
  return c;
}

CombDecomposer::CombDecomposer(const CollapseScenario& s, int r_index, double mu, int threads) {
  validate_scenario(s);
  require(r_index >= 0 && r_index < static_cast<int>(s.r_grid.size()),
          "comb decomposition: r index out of range");
  n_regions_ = s.n_regions();

  full_ = GeodesicGraph::build(*s.e1, s.family.at_mu(mu), s.family.stencil_at_mu(mu));
  const int n = full_.node_count();
  const std::vector<int> ext = exterior_nodes(s, 1, r_index);
  ensure(!ext.empty(), "comb decomposition: empty exterior");
  sub_ = full_.subgraph(ext);

  std::vector<char> exterior(n, 0);
  for (int v : ext) exterior[v] = 1;
  std::vector<int> region_of(n, -1);
  for (size_t j = 0; j < s.regions.size(); ++j)
    for (int v : s.regions[j].u1[r_index]) region_of[v] = static_cast<int>(j);
  shells_ = boundary_shells(full_, exterior, region_of, n_regions_);
  for (const auto& sh : shells_) ensure(!sh.empty(), "comb decomposition: empty boundary shell");

  shell_rest_.assign(n_regions_, {});
  hop_.assign(n_regions_, {});
  for (int j = 0; j < n_regions_; ++j) {
    const int sz = static_cast<int>(shells_[j].size());
    shell_rest_[j].resize(sz);
    hop_[j].assign(sz, std::vector<double>(sz, 0.0));
    parallel_for(sz, threads, [&](int i) {
      shell_rest_[j][i] = sub_.graph.dijkstra(sub_.from_old[shells_[j][i]]);
      const std::vector<double> dist = full_.dijkstra(shells_[j][i]);
      for (int l = 0; l < sz; ++l) hop_[j][i][l] = dist[shells_[j][l]];
    });
  }

  // Ordered tuples of distinct regions, every nonempty length.
  std::vector<int> cur;
  std::vector<char> used(n_regions_, 0);
  std::function<void()> rec = [&] {
    if (!cur.empty()) tuples_.push_back(cur);
    if (static_cast<int>(cur.size()) == n_regions_) return;
    for (int j = 0; j < n_regions_; ++j) {
      if (used[j]) continue;
      used[j] = 1;
      cur.push_back(j);
      rec();
      cur.pop_back();
      used[j] = 0;
    }
  };
  rec();
}

void CombDecomposer::inject_fault(double factor) {
  require(factor > 0, "inject_fault: factor must be positive");
  for (auto& region : hop_)
    for (auto& row : region)
      for (double& v : row) v *= factor;
}

double CombDecomposer::distance(int x, int y) const {
  require(x >= 0 && x < static_cast<int>(sub_.from_old.size()) && y >= 0 &&
              y < static_cast<int>(sub_.from_old.size()),
          "comb decomposition: node out of range");
  const int sx = sub_.from_old[x], sy = sub_.from_old[y];
  require(sx >= 0 && sy >= 0, "comb decomposition: query node is not in the exterior");
  const std::vector<double> dx = sub_.graph.dijkstra(sx);
  const std::vector<double> dy = sub_.graph.dijkstra(sy);

  double best = dx[sy];
  std::vector<double> cur, nxt;
  for (const auto& tup : tuples_) {
    const auto& sh0 = shells_[tup[0]];
    cur.resize(sh0.size());
    for (size_t i = 0; i < sh0.size(); ++i) cur[i] = dx[sub_.from_old[sh0[i]]];
    for (size_t t = 0; t < tup.size(); ++t) {
      const int j = tup[t];
      const size_t sz = shells_[j].size();
      nxt.assign(sz, kInf);
      for (size_t i = 0; i < sz; ++i) {
        if (!std::isfinite(cur[i])) continue;
        const auto& row = hop_[j][i];
        for (size_t l = 0; l < sz; ++l) nxt[l] = std::min(nxt[l], cur[i] + row[l]);
      }
      cur.swap(nxt);
      if (t + 1 < tup.size()) {
        const auto& shn = shells_[tup[t + 1]];
        nxt.assign(shn.size(), kInf);
        for (size_t i = 0; i < sz; ++i) {
          if (!std::isfinite(cur[i])) continue;
          const auto& row = shell_rest_[j][i];
          for (size_t l = 0; l < shn.size(); ++l)
            nxt[l] = std::min(nxt[l], cur[i] + row[sub_.from_old[shn[l]]]);
        }
        cur.swap(nxt);
      }
    }
    const auto& shl = shells_[tup.back()];
    for (size_t i = 0; i < shl.size(); ++i)
      best = std::min(best, cur[i] + dy[sub_.from_old[shl[i]]]);
  }
  return best;
}

double comb_decomp_distance(const CollapseScenario& s, int r_index, double mu, int x, int y,
                            int threads) {
  return CombDecomposer(s, r_index, mu, threads).distance(x, y);
}

BaseComparisonReport base_vs_total(const CollapseScenario& s, int sample_pairs,
                                   double tol_factor, unsigned long long seed, int threads) {
  validate_scenario(s);
  require(sample_pairs > 0, "base_vs_total: need a positive sample count");
  require(tol_factor >= 0, "base_vs_total: negative tolerance factor");
  require(s.g_inf->regular, "base_vs_total: the limit field must be regular along the fibers");
  const ModelSpace& base = *s.base;
  const double h = s.e2->max_step();

  GeodesicGraph graph = GeodesicGraph::build(*s.e2, *s.g_inf, s.stencil_e2);
  const SemiMetricSpace xinf = all_pairs_distance(graph, threads);
  const QuotientResult q = free_quotient(xinf, tol_factor * h);

  // Quotient classes must be exactly the fibers.
  std::vector<int> base_class(base.node_count(), -1);
  std::vector<int> class_base(q.quotient.size(), -1);
  for (int v = 0; v < s.e2->node_count(); ++v) {
    const int c = q.projection[v], b = s.fib.proj[v];
    ensure(base_class[b] < 0 || base_class[b] == c,
           "base_vs_total: a fiber splits across quotient classes");
    ensure(class_base[c] < 0 || class_base[c] == b,
           "base_vs_total: a quotient class crosses distinct fibers");
    base_class[b] = c;
    class_base[c] = b;
  }
  ensure(q.quotient.size() == base.node_count(),
         "base_vs_total: quotient classes do not match the fibers");

  // Induced length structure on the base; edges priced by endpoint means.
  const QuasiFinslerField qf = build_quasifinsler(
      std::make_shared<const DiscreteFibration>(s.fib), s.g_inf, preset_flat(base.dim()));
  const auto offs = StencilConfig{}.offsets(base.dim());
  std::vector<GraphEdge> bedges;
  for (int v = 0; v < base.node_count(); ++v) {
    for (const auto& o : offs) {
      const int w = base.neighbor(v, o);
      if (w < 0 || w == v) continue;
      const Eigen::VectorXd dx = base.displacement(o);
      auto priced = [&](int node, double& out) {
        for (int a = 0; a < base.dim(); ++a)
          if (dx[a] != 0.0 && !qf.ctx->base_axis_tangent(node, a)) return false;
        out = qf.eval(node, dx);
        return true;
      };
      double lu = 0, lv = 0;
      const bool bu = priced(v, lu), bv = priced(w, lv);
      if (!bu && !bv) continue;
      bedges.push_back({v, w, bu && bv ? 0.5 * (lu + lv) : (bu ? lu : lv)});
    }
  }
  std::vector<Eigen::VectorXd> bcoords(base.node_count());
  for (int v = 0; v < base.node_count(); ++v) bcoords[v] = base.coord(v);
  const GeodesicGraph bgraph = GeodesicGraph::from_edges(std::move(bcoords), std::move(bedges));
  const SemiMetricSpace dl = all_pairs_distance(bgraph, threads);

  BaseComparisonReport rep;
  rep.tol = tol_factor * h;
  rep.quotient_size = q.quotient.size();
  rep.pairs = sample_pairs;
  Rng rng(seed);
  for (int k = 0; k < sample_pairs; ++k) {
    const int a = uniform_int(rng, 0, base.node_count() - 1);
    const int b = uniform_int(rng, 0, base.node_count() - 1);
    const double gap = std::abs(q.quotient(base_class[a], base_class[b]) - dl(a, b));
    if (gap > rep.max_gap) {
      rep.max_gap = gap;
      rep.witness_a = a;
      rep.witness_b = b;
    }
  }
  rep.gap_over_h = rep.max_gap / h;
  return rep;
}

CorrespondenceMap extend_phi(const CollapseScenario& s) {
  validate_scenario(s);
  std::vector<int> to = s.phi;
  for (const auto& reg : s.regions) {
    for (int x : reg.s1) {
      const int cls = reg.f1[x];
      int target = -1;
      for (int w : reg.s2) {
        if (reg.f2[w] == cls) {
          target = w;  // least match: s2 is sorted
          break;
        }
      }
      require(target >= 0, "extend_phi: no matching fiber point in the target singular set");
      to[x] = target;
    }
  }
  return {std::move(to), s.e2->node_count()};
}

CollapseReport run_collapse(const CollapseScenario& s, int threads) {
  validate_scenario(s);
  require(s.e1->node_count() <= 6000 && s.e2->node_count() <= 6000,
          "run_collapse: model too large for dense distance tables");
  const CorrespondenceMap phit = extend_phi(s);

  GeodesicGraph ginf_graph = GeodesicGraph::build(*s.e2, *s.g_inf, s.stencil_e2);
  const SemiMetricSpace xinf = all_pairs_distance(ginf_graph, threads);

  CollapseReport rep;
  rep.quotient_tol = 0.5 * s.e2->max_step();
  const QuotientResult q = free_quotient(xinf, rep.quotient_tol);
  rep.quotient_size = q.quotient.size();
  const CorrespondenceMap piq{q.projection, q.quotient.size()};

  for (const double mu : s.mu_grid) {
    GeodesicGraph g = GeodesicGraph::build(*s.e1, s.family.at_mu(mu),
                                           s.family.stencil_at_mu(mu));
    const SemiMetricSpace xmu = all_pairs_distance(g, threads);
    const DiscrepancyReport d = discrepancy(phit, xmu, xinf);
    const DiscrepancyReport dq = compose_discrepancy(phit, piq, xmu, xinf, q.quotient);
    CollapseRow row;
    row.mu = mu;
    row.distortion = d.distortion;
    row.net_defect = d.net_defect;
    row.epsilon = d.epsilon;
    row.gh_upper = d.gh_upper;
    row.gh_to_limit = dq.gh_upper;
    row.diameter = xmu.diameter();
    row.gh_to_point = 0.5 * row.diameter;
    rep.rows.push_back(row);
  }

  rep.epsilon_decreasing = true;
  for (size_t i = 0; i + 1 < rep.rows.size(); ++i)
    if (rep.rows[i + 1].epsilon > rep.rows[i].epsilon + trend_slack(rep.rows[i].epsilon))
      rep.epsilon_decreasing = false;
  return rep;
}

SmoothConvReport smooth_conv_check(const CollapseScenario& s, int r_index, int threads) {
  validate_scenario(s);
  const RestrictedSpace rinf = restricted_distance(s, r_index, std::nullopt, threads);
  std::vector<int> idx2(s.e2->node_count(), -1);
  for (size_t i = 0; i < rinf.nodes.size(); ++i) idx2[rinf.nodes[i]] = static_cast<int>(i);
  const double diam = rinf.space.diameter();
  const std::vector<int> ext1 = exterior_nodes(s, 1, r_index);
  const StratifiedMetricField ref = preset_flat(s.e1->dim());

  SmoothConvReport rep;
  rep.r = s.r_grid[r_index];
  for (const double mu : s.mu_grid) {
    const RestrictedSpace rmu = restricted_distance(s, r_index, mu, threads);
    ensure(rmu.nodes.size() == rinf.nodes.size(),
           "smooth_conv_check: restricted exteriors differ in size");
    SmoothConvRow row;
    row.mu = mu;
    const int n = rmu.space.size();
    for (int i = 0; i < n; ++i) {
      const int a2 = idx2[s.phi[rmu.nodes[i]]];
      ensure(a2 >= 0, "smooth_conv_check: Phi leaves the restricted exterior");
      for (int j = i + 1; j < n; ++j) {
        const int b2 = idx2[s.phi[rmu.nodes[j]]];
        row.sup_gap = std::max(row.sup_gap, std::abs(rmu.space(i, j) - rinf.space(a2, b2)));
      }
    }
    const StratifiedMetricField gmu = s.family.at_mu(mu);
    for (int v : ext1) {
      const Eigen::VectorXd p = s.e1->coord(v);
      row.field_gap =
          std::max(row.field_gap, norm_bound(gmu.at(p) - s.g_inf_on_e1->at(p), ref.at(p)));
    }
    row.lambda = lambda_sup(gmu, *s.g_inf_on_e1, *s.e1, ext1);
    const double denom = (std::sqrt(row.field_gap) + (1.0 - std::min(row.lambda, 1.0))) * diam;
    row.ratio = denom > 1e-15 ? row.sup_gap / denom : (row.sup_gap <= 1e-12 ? 0.0 : kInf);
    rep.k_constant = std::max(rep.k_constant, row.ratio);
    rep.rows.push_back(row);
  }
  rep.decreasing = true;
  for (size_t i = 0; i + 1 < rep.rows.size(); ++i)
    if (rep.rows[i + 1].sup_gap > rep.rows[i].sup_gap + trend_slack(rep.rows[i].sup_gap))
      rep.decreasing = false;
  return rep;
}

nlohmann::json to_json(const ConditionReport& rep) {
  return {{"tables",
           {{"field_gap", table_json(rep.field_gap)},
            {"lambda", table_json(rep.lambda)},
            {"fiber_diam_mu", table_json(rep.fiber_diam_mu)},
            {"fiber_diam_inf", table_json(rep.fiber_diam_inf)},
            {"boundary_gap", table_json(rep.boundary_gap)}}},
          {"verdicts",
           {{"field_gap", verdict_json(rep.v_field_gap)},
            {"lambda", verdict_json(rep.v_lambda)},
            {"fiber_diam_mu", verdict_json(rep.v_fiber_mu)},
            {"fiber_diam_inf", verdict_json(rep.v_fiber_inf)},
            {"boundary_gap", verdict_json(rep.v_boundary)}}},
          {"all_pass", rep.all_pass}};
}

nlohmann::json to_json(const CollapseReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"mu", r.mu},
                    {"distortion", r.distortion},
                    {"net_defect", r.net_defect},
                    {"epsilon", r.epsilon},
                    {"gh_upper", r.gh_upper},
                    {"gh_to_limit", r.gh_to_limit},
                    {"diameter", r.diameter},
                    {"gh_to_point", r.gh_to_point}});
  return {{"rows", rows},
          {"epsilon_decreasing", rep.epsilon_decreasing},
          {"quotient_tol", rep.quotient_tol},
          {"quotient_size", rep.quotient_size}};
}

nlohmann::json to_json(const BaseComparisonReport& rep) {
  return {{"tol", rep.tol},           {"quotient_size", rep.quotient_size},
          {"pairs", rep.pairs},       {"max_gap", rep.max_gap},
          {"gap_over_h", rep.gap_over_h}, {"witness_a", rep.witness_a},
          {"witness_b", rep.witness_b}};
}

nlohmann::json to_json(const SmoothConvReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"mu", r.mu},
                    {"sup_gap", r.sup_gap},
                    {"field_gap", r.field_gap},
                    {"lambda", r.lambda},
                    {"ratio", r.ratio}});
  return {{"r", rep.r},
          {"rows", rows},
          {"k_constant", rep.k_constant},
          {"decreasing", rep.decreasing}};
}

void write_csv(const ConditionReport& rep, std::ostream& os) {
  const std::pair<const char*, const TrendTable*> tables[] = {
      {"field_gap", &rep.field_gap},
      {"lambda", &rep.lambda},
      {"fiber_diam_mu", &rep.fiber_diam_mu},
      {"fiber_diam_inf", &rep.fiber_diam_inf},
      {"boundary_gap", &rep.boundary_gap}};
  os << "# conditions\n";
  os << "table,r,mu,value\n";
  for (const auto& [name, t] : tables)
    for (size_t ri = 0; ri < t->value.size(); ++ri)
      for (size_t mi = 0; mi < t->value[ri].size(); ++mi)
        os << name << ',' << fmt(t->r[ri]) << ',' << fmt(t->mu[mi]) << ','
           << fmt(t->value[ri][mi]) << '\n';
  const std::pair<const char*, const ConditionVerdict*> verdicts[] = {
      {"field_gap", &rep.v_field_gap},
      {"lambda", &rep.v_lambda},
      {"fiber_diam_mu", &rep.v_fiber_mu},
      {"fiber_diam_inf", &rep.v_fiber_inf},
      {"boundary_gap", &rep.v_boundary}};
  os << "# verdicts\n";
  os << "table,monotone_mu,monotone_r,final_value,threshold,final_ok,pass\n";
  for (const auto& [name, v] : verdicts)
    os << name << ',' << int(v->monotone_mu) << ',' << int(v->monotone_r) << ','
       << fmt(v->final_value) << ',' << fmt(v->threshold) << ',' << int(v->final_ok) << ','
       << int(v->pass) << '\n';
  os << "# all_pass," << int(rep.all_pass) << '\n';
}

void write_csv(const CollapseReport& rep, std::ostream& os) {
  os << "# collapse\n";
  os << "mu,distortion,net_defect,epsilon,gh_upper,gh_to_limit,diameter,gh_to_point\n";
  for (const auto& r : rep.rows)
    os << fmt(r.mu) << ',' << fmt(r.distortion) << ',' << fmt(r.net_defect) << ','
       << fmt(r.epsilon) << ',' << fmt(r.gh_upper) << ',' << fmt(r.gh_to_limit) << ','
       << fmt(r.diameter) << ',' << fmt(r.gh_to_point) << '\n';
  os << "# summary\n";
  os << "epsilon_decreasing,quotient_tol,quotient_size\n";
  os << int(rep.epsilon_decreasing) << ',' << fmt(rep.quotient_tol) << ','
     << rep.quotient_size << '\n';
}

void write_csv(const BaseComparisonReport& rep, std::ostream& os) {
  os << "# base_vs_total\n";
  os << "tol,quotient_size,pairs,max_gap,gap_over_h,witness_a,witness_b\n";
  os << fmt(rep.tol) << ',' << rep.quotient_size << ',' << rep.pairs << ','
     << fmt(rep.max_gap) << ',' << fmt(rep.gap_over_h) << ',' << rep.witness_a << ','
     << rep.witness_b << '\n';
}

}  // namespace collapse
