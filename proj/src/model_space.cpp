#include "collapse/model_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>

namespace collapse {

const char* tag_name(OrbifoldTag t) {
  switch (t) {
    case OrbifoldTag::trivial: return "trivial";
    case OrbifoldTag::z2: return "Z2";
    case OrbifoldTag::z2xz2: return "Z2xZ2";
  }
  return "?";
}

namespace {

int checked_count(double extent, double h, const char* what) {
  require(h > 0, std::string(what) + ": resolution must be positive");
  require(extent > 0, std::string(what) + ": extent must be positive");
  const double ratio = extent / h;
  const int count = static_cast<int>(std::llround(ratio));
  require(count >= 1 && std::abs(ratio - count) <= 1e-9 * std::max(1.0, ratio),
          std::string(what) + ": extent must be an integer multiple of the resolution");
  return count;
}

}  // namespace

ModelSpace ModelSpace::build(std::vector<Axis> axes, Identification ident) {
  ModelSpace m;
  m.axes_ = std::move(axes);
  m.ident_ = ident;
  const int d = m.dim();
  require(d >= 1 && d <= 4, "ModelSpace: dimension out of range");

  switch (ident) {
    case Identification::none:
      m.group_ = {0};
      break;
    case Identification::antipodal:
      m.group_ = {0, static_cast<uint8_t>((1u << d) - 1)};
      break;
    case Identification::axis_reflections:
      for (uint8_t g = 0; g < (1u << d); ++g) m.group_.push_back(g);
      break;
  }

  long long total = 1;
  for (const Axis& a : m.axes_) {
    require(a.count >= 1, "ModelSpace: empty axis");
    total *= a.count;
    require(total <= 50'000'000, "ModelSpace: grid too large");
  }

  m.canon_.assign(static_cast<size_t>(total), -1);
  std::vector<int> norm(d), tmp(d);
  for (long long raw = 0; raw < total; ++raw) {
    // Decode normalized indices.
    long long rest = raw;
    for (int a = d - 1; a >= 0; --a) {
      norm[a] = static_cast<int>(rest % m.axes_[a].count);
      rest /= m.axes_[a].count;
    }
    long long least = raw;
    int stabilizer = 0;
    for (uint8_t g : m.group_) {
      tmp = norm;
      if (!m.negate_norm(tmp, g)) continue;  // off-grid images cannot occur here
      const int img = m.raw_linear(tmp);
      least = std::min<long long>(least, img);
      if (img == raw) ++stabilizer;
    }
    if (least == raw) {
      m.canon_[raw] = static_cast<int>(m.node_raw_.size());
      m.node_raw_.push_back(static_cast<int>(raw));
      OrbifoldTag t = OrbifoldTag::trivial;
      if (stabilizer == 2) t = OrbifoldTag::z2;
      else if (stabilizer == 4) t = OrbifoldTag::z2xz2;
      else
        require(stabilizer == 1, "ModelSpace: unsupported isotropy group");
      m.tags_.push_back(t);
    } else {
      m.canon_[raw] = m.canon_[least];  // least < raw, already assigned
    }
  }
  return m;
}

bool ModelSpace::negate_norm(std::vector<int>& norm, uint8_t mask) const {
  for (int a = 0; a < dim(); ++a) {
    if (!(mask & (1u << a))) continue;
    const Axis& ax = axes_[a];
    if (ax.periodic) {
      norm[a] = (ax.count - norm[a]) % ax.count;
    } else {
      // Symmetric patch: index lo+k maps to -(lo+k); with lo = -(count-1)/2
      // this is count-1-k in normalized terms.
      norm[a] = ax.count - 1 - norm[a];
    }
  }
  return true;
}

int ModelSpace::raw_linear(std::span<const int> norm) const {
  long long r = 0;
  for (int a = 0; a < dim(); ++a) r = r * axes_[a].count + norm[a];
  return static_cast<int>(r);
}

std::vector<int> ModelSpace::raw_to_norm(int raw) const {
  std::vector<int> norm(dim());
  long long rest = raw;
  for (int a = dim() - 1; a >= 0; --a) {
    norm[a] = static_cast<int>(rest % axes_[a].count);
    rest /= axes_[a].count;
  }
  return norm;
}

ModelSpace ModelSpace::torus(const std::vector<double>& periods, double h) {
  std::vector<int> counts;
  counts.reserve(periods.size());
  for (double p : periods) counts.push_back(checked_count(p, h, "torus"));
  return torus_counts(periods, counts);
}

ModelSpace ModelSpace::torus_counts(const std::vector<double>& periods,
                                    const std::vector<int>& counts) {
  require(!periods.empty() && periods.size() == counts.size(),
          "torus: periods/counts mismatch");
  std::vector<Axis> axes;
  for (size_t a = 0; a < periods.size(); ++a) {
    require(periods[a] > 0 && counts[a] >= 1, "torus: bad axis");
    axes.push_back(Axis{counts[a], true, 0, periods[a] / counts[a]});
  }
  return build(std::move(axes), Identification::none);
}

ModelSpace ModelSpace::pillowcase_total(double h) {
  const double period = 2 * M_PI;
  const int n = checked_count(period, h, "pillowcase");
  require(n % 2 == 0, "pillowcase: resolution must divide pi");
  std::vector<Axis> axes(2, Axis{n, true, 0, period / n});
  return build(std::move(axes), Identification::antipodal);
}

ModelSpace ModelSpace::interval_orbifold(double period, double h) {
  const int n = checked_count(period, h, "interval_orbifold");
  require(n % 2 == 0, "interval_orbifold: resolution must divide the half period");
  std::vector<Axis> axes{Axis{n, true, 0, period / n}};
  return build(std::move(axes), Identification::antipodal);
}

ModelSpace ModelSpace::quadrant(const std::vector<double>& extents, double h) {
  require(!extents.empty() && extents.size() <= 3, "quadrant: dimension out of range");
  std::vector<Axis> axes;
  for (double L : extents) {
    const int m = checked_count(L, h, "quadrant");
    axes.push_back(Axis{2 * m + 1, false, -m, h});
  }
  return build(std::move(axes), Identification::axis_reflections);
}

double ModelSpace::max_step() const {
  double s = 0;
  for (const Axis& a : axes_) s = std::max(s, a.step);
  return s;
}

Eigen::VectorXd ModelSpace::coord(int node) const {
  const std::vector<int> norm = raw_to_norm(node_raw_[node]);
  Eigen::VectorXd p(dim());
  for (int a = 0; a < dim(); ++a) p[a] = (axes_[a].lo + norm[a]) * axes_[a].step;
  return p;
}

std::vector<int> ModelSpace::index_of(int node) const {
  std::vector<int> norm = raw_to_norm(node_raw_[node]);
  for (int a = 0; a < dim(); ++a) norm[a] += axes_[a].lo;
  return norm;
}

int ModelSpace::node_from_index(std::span<const int> idx) const {
  require(static_cast<int>(idx.size()) == dim(), "node_from_index: wrong arity");
  std::vector<int> norm(dim());
  for (int a = 0; a < dim(); ++a) {
    const Axis& ax = axes_[a];
    long long v = static_cast<long long>(idx[a]) - ax.lo;
    if (ax.periodic) {
      v %= ax.count;
      if (v < 0) v += ax.count;
    } else if (v < 0 || v >= ax.count) {
      return -1;
    }
    norm[a] = static_cast<int>(v);
  }
  return canon_[raw_linear(norm)];
}

int ModelSpace::neighbor(int node, std::span<const int> offset) const {
  require(static_cast<int>(offset.size()) == dim(), "neighbor: wrong arity");
  std::vector<int> idx = index_of(node);
  for (int a = 0; a < dim(); ++a) idx[a] += offset[a];
  return node_from_index(idx);
}

Eigen::VectorXd ModelSpace::displacement(std::span<const int> offset) const {
  Eigen::VectorXd d(dim());
  for (int a = 0; a < dim(); ++a) d[a] = offset[a] * axes_[a].step;
  return d;
}

Eigen::VectorXd ModelSpace::wrap(Eigen::VectorXd p) const {
  for (int a = 0; a < dim(); ++a) {
    if (!axes_[a].periodic) continue;
    const double period = axes_[a].count * axes_[a].step;
    p[a] = std::fmod(p[a], period);
    if (p[a] < 0) p[a] += period;
  }
  return p;
}

namespace {

// Union-find components over axis adjacency restricted to equal keys;
// component ids are ordered by least member node.
StratificationLabel components_by_key(const ModelSpace& m, const std::vector<long long>& key) {
  const int n = m.node_count();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  std::vector<int> off(m.dim(), 0);
  for (int u = 0; u < n; ++u) {
    for (int a = 0; a < m.dim(); ++a) {
      for (int s : {-1, 1}) {
        off[a] = s;
        const int v = m.neighbor(u, off);
        off[a] = 0;
        if (v < 0 || v == u || key[v] != key[u]) continue;
        const int ru = find(u), rv = find(v);
        if (ru != rv) parent[std::max(ru, rv)] = std::min(ru, rv);
      }
    }
  }
  StratificationLabel out;
  out.label.assign(n, -1);
  std::vector<int> id(n, -1);
  for (int u = 0; u < n; ++u) {
    const int r = find(u);
    if (id[r] < 0) id[r] = out.count++;
    out.label[u] = id[r];
  }
  // Frontier: strata meeting along an axis edge.
  std::vector<std::vector<int>> fr(out.count);
  for (int u = 0; u < n; ++u) {
    for (int a = 0; a < m.dim(); ++a) {
      for (int s : {-1, 1}) {
        off[a] = s;
        const int v = m.neighbor(u, off);
        off[a] = 0;
        if (v < 0 || v == u) continue;
        if (out.label[u] != out.label[v]) fr[out.label[u]].push_back(out.label[v]);
      }
    }
  }
  for (auto& f : fr) {
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
  }
  out.frontier = std::move(fr);
  return out;
}

}  // namespace

StratificationLabel canonical_stratification(const ModelSpace& m) {
  std::vector<long long> key(m.node_count());
  for (int u = 0; u < m.node_count(); ++u) key[u] = static_cast<long long>(m.tag(u));
  return components_by_key(m, key);
}

DiscreteFibration product_fibration(std::shared_ptr<const ModelSpace> total,
                                    std::shared_ptr<const ModelSpace> base, int n_base_axes) {
  require(total && base, "product_fibration: null model");
  require(n_base_axes == base->dim() && n_base_axes >= 1 && n_base_axes < total->dim(),
          "product_fibration: axis split mismatch");
  for (int a = 0; a < n_base_axes; ++a) {
    const auto& ta = total->axis(a);
    const auto& ba = base->axis(a);
    require(ta.count == ba.count && ta.periodic == ba.periodic && ta.lo == ba.lo &&
                std::abs(ta.step - ba.step) <= 1e-12 * std::max(1.0, ta.step),
            "product_fibration: base axes must match total axes");
  }
  DiscreteFibration fib;
  fib.total = std::move(total);
  fib.base = std::move(base);
  for (int a = 0; a < n_base_axes; ++a) fib.base_axes.push_back(a);
  for (int a = n_base_axes; a < fib.total->dim(); ++a) fib.fiber_axes.push_back(a);

  const int n = fib.total->node_count();
  fib.proj.resize(n);
  fib.fibers.assign(fib.base->node_count(), {});
  for (int u = 0; u < n; ++u) {
    const std::vector<int> idx = fib.total->index_of(u);
    const int b = fib.base->node_from_index(std::span<const int>(idx).first(n_base_axes));
    ensure(b >= 0, "product_fibration: projection left the base grid");
    fib.proj[u] = b;
    fib.fibers[b].push_back(u);
  }
  validate_fibration(fib);
  return fib;
}

void validate_fibration(const DiscreteFibration& fib, const StratificationLabel* base_strata) {
  require(fib.total && fib.base, "fibration: null model");
  require(static_cast<int>(fib.proj.size()) == fib.total->node_count(),
          "fibration: projection has wrong size");
  require(static_cast<int>(fib.fibers.size()) == fib.base->node_count(),
          "fibration: fiber table has wrong size");
  std::vector<char> seen(fib.total->node_count(), 0);
  for (int b = 0; b < fib.base->node_count(); ++b) {
    ensure(!fib.fibers[b].empty(), "fibration: projection is not surjective");
    for (int u : fib.fibers[b]) {
      ensure(fib.proj[u] == b, "fibration: fiber table disagrees with projection");
      ensure(!seen[u], "fibration: fibers do not partition the total space");
      seen[u] = 1;
    }
  }
  for (char c : seen) ensure(c, "fibration: node missing from all fibers");

  if (base_strata) {
    // Fibers over base nodes sharing stratum and tag must have one cardinality.
    std::map<std::pair<int, int>, size_t> want;
    for (int b = 0; b < fib.base->node_count(); ++b) {
      const auto k = std::make_pair(base_strata->label[b], static_cast<int>(fib.base->tag(b)));
      auto [it, fresh] = want.emplace(k, fib.fibers[b].size());
      ensure(fresh || it->second == fib.fibers[b].size(),
             "fibration: fiber cardinality varies inside a base stratum");
    }
  }
}

StratificationLabel induced_stratification(const DiscreteFibration& fib,
                                           const StratificationLabel& base_strata) {
  require(static_cast<int>(base_strata.label.size()) == fib.base->node_count(),
          "induced_stratification: base labels mismatch");
  const ModelSpace& m = *fib.total;
  std::vector<long long> key(m.node_count());
  for (int u = 0; u < m.node_count(); ++u)
    key[u] = static_cast<long long>(base_strata.label[fib.proj[u]]) * 8 +
             static_cast<long long>(m.tag(u));
  return components_by_key(m, key);
}

std::vector<int> fiber_endpoint_nodes(const DiscreteFibration& fib, int base_node) {
  require(base_node >= 0 && base_node < fib.base->node_count(),
          "fiber_endpoint_nodes: base node out of range");
  std::vector<int> out;
  std::vector<int> off(fib.total->dim(), 0);
  for (int u : fib.fibers[base_node]) {
    std::vector<int> nbrs;
    for (int a : fib.fiber_axes) {
      for (int s : {-1, 1}) {
        off[a] = s;
        const int v = fib.total->neighbor(u, off);
        off[a] = 0;
        if (v >= 0 && v != u && fib.proj[v] == base_node) nbrs.push_back(v);
      }
    }
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    if (nbrs.size() == 1) out.push_back(u);
  }
  return out;
}

Pillowcase make_pillowcase(double h) {
  Pillowcase p;
  p.total = std::make_shared<ModelSpace>(ModelSpace::pillowcase_total(h));
  p.base = std::make_shared<ModelSpace>(ModelSpace::interval_orbifold(2 * M_PI, h));
  p.fib = product_fibration(p.total, p.base, 1);
  return p;
}

void write_stratification_csv(const ModelSpace& m, const StratificationLabel& s,
                              std::ostream& os) {
  os << "node,stratum,tag";
  for (int a = 0; a < m.dim(); ++a) os << ",x" << a;
  os << '\n';
  for (int u = 0; u < m.node_count(); ++u) {
    os << u << ',' << s.label[u] << ',' << tag_name(m.tag(u));
    const Eigen::VectorXd p = m.coord(u);
    for (int a = 0; a < m.dim(); ++a) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.12g", p[a]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace collapse
