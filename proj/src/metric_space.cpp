#include "collapse/metric_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

namespace collapse {

namespace {

// Exhaustive triangle check is cubic; above this size a fixed random sample
// of triples is checked instead.
constexpr int kTriangleExhaustiveMax = 192;
constexpr int kTriangleSamples = 2'000'000;

}  // namespace

SemiMetricSpace SemiMetricSpace::from_upper(int n, std::vector<double> upper) {
  require(n >= 0, "SemiMetricSpace: negative size");
  const size_t want = static_cast<size_t>(n) * (n - 1) / 2;
  require(upper.size() == want, "SemiMetricSpace: upper triangle has wrong length");
  SemiMetricSpace s;
  s.n_ = n;
  s.upper_ = std::move(upper);
  s.validate();
  return s;
}

SemiMetricSpace SemiMetricSpace::from_full(int n, const std::vector<double>& full) {
  require(n >= 0, "SemiMetricSpace: negative size");
  require(full.size() == static_cast<size_t>(n) * n, "SemiMetricSpace: matrix has wrong size");
  std::vector<double> upper;
  upper.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i) {
    ensure(std::abs(full[static_cast<size_t>(i) * n + i]) <= kMetricSlack,
           "SemiMetricSpace: nonzero diagonal entry");
    for (int j = i + 1; j < n; ++j) {
      const double a = full[static_cast<size_t>(i) * n + j];
      const double b = full[static_cast<size_t>(j) * n + i];
      ensure(std::abs(a - b) <= kMetricSlack, "SemiMetricSpace: asymmetric matrix");
      upper.push_back(a);
    }
  }
  return from_upper(n, std::move(upper));
}

void SemiMetricSpace::validate() const {
  const auto& d = *this;
  for (double v : upper_) {
    ensure(std::isfinite(v), "SemiMetricSpace: non-finite distance");
    ensure(v >= 0.0, "SemiMetricSpace: negative distance");
  }
  auto check_triple = [&](int i, int j, int k) {
    const double dij = d(i, j), djk = d(j, k), dik = d(i, k);
    ensure(dik <= dij + djk + kMetricSlack, "SemiMetricSpace: triangle inequality violated");
  };
  if (n_ <= kTriangleExhaustiveMax) {
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j)
        for (int k = 0; k < n_; ++k) {
          if (k == i || k == j) continue;
          check_triple(i, k, j);  // d(i,j) <= d(i,k) + d(k,j)
        }
  } else {
    Rng rng(0x7417a3u);  // fixed seed: deterministic sampled validation
    for (int t = 0; t < kTriangleSamples; ++t) {
      const int i = uniform_int(rng, 0, n_ - 1);
      const int j = uniform_int(rng, 0, n_ - 1);
      const int k = uniform_int(rng, 0, n_ - 1);
      if (i == j || j == k || i == k) continue;
      check_triple(i, j, k);
    }
  }
}

double SemiMetricSpace::diameter() const {
  double m = 0;
  for (double v : upper_) m = std::max(m, v);
  return m;
}

nlohmann::json SemiMetricSpace::to_json() const {
  return nlohmann::json{{"n", n_}, {"dist", upper_}};
}

SemiMetricSpace SemiMetricSpace::from_json(const nlohmann::json& j) {
  require(j.contains("n") && j.contains("dist"), "SemiMetricSpace: json needs n and dist");
  return from_upper(j.at("n").get<int>(), j.at("dist").get<std::vector<double>>());
}

void SemiMetricSpace::write_csv(std::ostream& os) const {
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      if (j) os << ',';
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.12g", (*this)(i, j));
      os << buf;
    }
    os << '\n';
  }
}

double hausdorff_distance(const SemiMetricSpace& ambient, std::span<const int> a,
                          std::span<const int> b) {
  require(!a.empty() && !b.empty(), "hausdorff_distance: empty subset");
  auto inside = [&](int i) { return i >= 0 && i < ambient.size(); };
  for (int i : a) require(inside(i), "hausdorff_distance: index out of range");
  for (int i : b) require(inside(i), "hausdorff_distance: index out of range");
  auto one_sided = [&](std::span<const int> from, std::span<const int> to) {
    double worst = 0;
    for (int i : from) {
      double best = std::numeric_limits<double>::infinity();
      for (int j : to) best = std::min(best, ambient(i, j));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

DiscrepancyReport discrepancy(const CorrespondenceMap& f, const SemiMetricSpace& x,
                              const SemiMetricSpace& xp) {
  require(static_cast<int>(f.to.size()) == x.size(), "discrepancy: map size mismatch");
  require(f.target_size == xp.size(), "discrepancy: target size mismatch");
  for (int v : f.to) require(v >= 0 && v < xp.size(), "discrepancy: image out of range");

  DiscrepancyReport r;
  const int n = x.size();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      r.distortion = std::max(r.distortion, std::abs(xp(f.to[i], f.to[j]) - x(i, j)));

  for (int t = 0; t < xp.size(); ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) best = std::min(best, xp(f.to[i], t));
    r.net_defect = std::max(r.net_defect, best);
  }
  if (n == 0) r.net_defect = std::numeric_limits<double>::infinity();
  r.epsilon = std::max(r.distortion, r.net_defect);
  r.gh_upper = 2 * r.epsilon;
  return r;
}

DiscrepancyReport compose_discrepancy(const CorrespondenceMap& f, const CorrespondenceMap& fp,
                                      const SemiMetricSpace& x, const SemiMetricSpace& xp,
                                      const SemiMetricSpace& xpp) {
  require(f.target_size == xp.size(), "compose_discrepancy: inner target mismatch");
  require(static_cast<int>(fp.to.size()) == xp.size(), "compose_discrepancy: outer map mismatch");
  const DiscrepancyReport rf = discrepancy(f, x, xp);
  const DiscrepancyReport rfp = discrepancy(fp, xp, xpp);
  CorrespondenceMap comp;
  comp.target_size = xpp.size();
  comp.to.reserve(f.to.size());
  for (int v : f.to) comp.to.push_back(fp.to[v]);
  DiscrepancyReport r = discrepancy(comp, x, xpp);
  ensure(r.epsilon <= rf.epsilon + 2 * rfp.epsilon + kMetricSlack,
         "compose_discrepancy: two-stage bound violated");
  return r;
}

QuotientResult free_quotient(const SemiMetricSpace& x, double tol) {
  require(std::isfinite(tol) && tol >= 0, "free_quotient: tolerance must be >= 0");
  const int n = x.size();

  // Single-linkage union-find over the relation d <= tol.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (x(i, j) <= tol) {
        int a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }

  // Class ids ordered by least member, so quotient labels are deterministic.
  QuotientResult out;
  out.projection.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    const int root = find(i);
    if (out.projection[root] < 0) {
      out.projection[root] = static_cast<int>(out.representative.size());
      out.representative.push_back(root);
    }
    out.projection[i] = out.projection[root];
  }

  const int m = static_cast<int>(out.representative.size());
  std::vector<double> q(static_cast<size_t>(m) * m, std::numeric_limits<double>::infinity());
  for (int i = 0; i < m; ++i) q[static_cast<size_t>(i) * m + i] = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const int a = out.projection[i], b = out.projection[j];
      if (a == b) continue;
      double& slot = q[static_cast<size_t>(a) * m + b];
      slot = std::min(slot, x(i, j));
      q[static_cast<size_t>(b) * m + a] = slot;
    }

  // Same-class original distances are chained by <= (size-1) links of <= tol.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (out.projection[i] == out.projection[j])
        ensure(x(i, j) <= static_cast<double>(n - 1) * tol + kMetricSlack,
               "free_quotient: class diameter exceeds chain bound");

  try {
    out.quotient = SemiMetricSpace::from_full(m, q);
  } catch (const check_error& e) {
    throw check_error(std::string("free_quotient: quotient is not a semi-metric at tol=") +
                      std::to_string(tol) + ": " + e.what());
  }
  // Distinct classes sit strictly beyond tol, else they would have merged.
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      ensure(out.quotient(a, b) > tol, "free_quotient: classes within tolerance survived");
  return out;
}

DiscrepancyReport min_discrepancy_search(const SemiMetricSpace& x, const SemiMetricSpace& xp,
                                         const std::vector<CorrespondenceMap>& candidates) {
  require(!candidates.empty(), "min_discrepancy_search: no candidates");
  DiscrepancyReport best;
  best.epsilon = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < candidates.size(); ++c) {
    DiscrepancyReport r = discrepancy(candidates[c], x, xp);
    if (r.epsilon < best.epsilon) {
      best = r;
      best.winner = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace collapse
