#include "collapse/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <utility>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "collapse/common.hpp"

namespace collapse {

namespace {

constexpr double kPi = std::numbers::pi;

double circle_dist(double a, double b, double period) {
  double d = std::fmod(std::abs(a - b), period);
  if (d < 0) d += period;
  return std::min(d, period - d);
}

// Snaps a requested coordinate to the nearest grid value of the given axis.
double snap_to_axis(const ModelSpace::Axis& ax, double x) {
  const double lo = ax.lo * ax.step;
  double i = std::round((x - lo) / ax.step);
  if (ax.periodic) {
    i = std::fmod(i, ax.count);
    if (i < 0) i += ax.count;
  } else {
    i = std::clamp(i, 0.0, static_cast<double>(ax.count - 1));
  }
  return lo + i * ax.step;
}

// Vertical strip |th1 - center| <= r * halfwidth (circle distance in the
// first coordinate); the singular set is the centerline column and the fiber
// map collapses the whole strip to one abstract class.
SingularRegion strip_region(const ModelSpace& m, const std::vector<double>& r_grid,
                            double center, double halfwidth) {
  require(halfwidth > 0, "strip region: halfwidth must be positive");
  const auto& ax = m.axis(0);
  require(ax.periodic, "strip region: first axis must be periodic");
  const double period = ax.count * ax.step;
  const double c = snap_to_axis(ax, center);
  const int n = m.node_count();

  SingularRegion reg;
  reg.class_count = 1;
  reg.f1.assign(n, -1);
  for (int v = 0; v < n; ++v)
    if (circle_dist(m.coord(v)[0], c, period) <= 1e-9) reg.s1.push_back(v);
  reg.u1.resize(r_grid.size());
  for (size_t k = 0; k < r_grid.size(); ++k)
    for (int v = 0; v < n; ++v)
      if (circle_dist(m.coord(v)[0], c, period) <= r_grid[k] * halfwidth + 1e-9)
        reg.u1[k].push_back(v);
  for (int v : reg.u1[0]) reg.f1[v] = 0;
  reg.s2 = reg.s1;
  reg.u2 = reg.u1;
  reg.f2 = reg.f1;
  return reg;
}

// Round neighborhood of one grid point (wrapped Euclidean distance); the
// singular set is the center node.
SingularRegion disk_region(const ModelSpace& m, const std::vector<double>& r_grid,
                           std::vector<double> center, double halfwidth) {
  require(halfwidth > 0, "disk region: halfwidth must be positive");
  require(static_cast<int>(center.size()) == m.dim(),
          "disk region: center dimension mismatch");
  for (int a = 0; a < m.dim(); ++a) center[a] = snap_to_axis(m.axis(a), center[a]);
  const int n = m.node_count();
  auto dist = [&](int v) {
    const Eigen::VectorXd p = m.coord(v);
    double q = 0;
    for (int a = 0; a < m.dim(); ++a) {
      const auto& ax = m.axis(a);
      const double d = ax.periodic ? circle_dist(p[a], center[a], ax.count * ax.step)
                                   : std::abs(p[a] - center[a]);
      q += d * d;
    }
    return std::sqrt(q);
  };

  SingularRegion reg;
  reg.class_count = 1;
  reg.f1.assign(n, -1);
  for (int v = 0; v < n; ++v)
    if (dist(v) <= 1e-9) reg.s1.push_back(v);
  reg.u1.resize(r_grid.size());
  for (size_t k = 0; k < r_grid.size(); ++k)
    for (int v = 0; v < n; ++v)
      if (dist(v) <= r_grid[k] * halfwidth + 1e-9) reg.u1[k].push_back(v);
  for (int v : reg.u1[0]) reg.f1[v] = 0;
  reg.s2 = reg.s1;
  reg.u2 = reg.u1;
  reg.f2 = reg.f1;
  return reg;
}

void check_sorted_in_range(const std::vector<int>& v, int n, const char* what) {
  int prev = -1;
  for (int x : v) {
    require(x >= 0 && x < n, std::string(what) + ": node id out of range");
    require(x > prev, std::string(what) + ": node list must be sorted and duplicate-free");
    prev = x;
  }
}

bool is_subset(const std::vector<int>& a, const std::vector<int>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

StencilConfig stencil_from_json(const nlohmann::json& j) {
  StencilConfig st;
  if (j.is_null()) return st;
  require(j.is_object(), "scenario: stencil must be an object");
  st.diagonals = j.value("diagonals", true);
  st.knight = j.value("knight", false);
  if (j.contains("extra")) st.extra = j.at("extra").get<std::vector<std::vector<int>>>();
  return st;
}

}  // namespace

StratifiedMetricField preset_flat(int dim) {
  require(dim >= 1, "preset_flat: dimension must be positive");
  return StratifiedMetricField::uniform(dim, Eigen::MatrixXd::Identity(dim, dim),
                                        /*semi=*/false);
}

StratifiedMetricField preset_t3_limit(double lambda) {
  require(lambda > -1.0, "preset_t3_limit: lambda must exceed -1");
  MatFn g = [lambda](const Eigen::VectorXd& p) {
    const double c = std::cos(p[2]), s = std::sin(p[2]);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
    m(0, 0) = 1.0 + lambda * c * c;
    m(1, 1) = 1.0 + lambda * s * s;
    return m;
  };
  Eigen::MatrixXd kb = Eigen::MatrixXd::Zero(3, 1);
  kb(2, 0) = 1.0;
  MatFn kfn = [kb](const Eigen::VectorXd&) { return kb; };
  return StratifiedMetricField::uniform_fn(3, std::move(g), /*semi=*/true, /*regular=*/true,
                                           std::move(kfn));
}

StratifiedMetricField preset_shrink_fiber(double mu) {
  require(mu > 0, "preset_shrink_fiber: mu must be positive");
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
  g(0, 0) = 1.0;
  g(1, 1) = 1.0 / (mu * mu);
  return StratifiedMetricField::uniform(2, g, /*semi=*/false);
}

StratifiedMetricField preset_shrink_fiber_limit() {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
  g(0, 0) = 1.0;
  Eigen::MatrixXd kb = Eigen::MatrixXd::Zero(2, 1);
  kb(1, 0) = 1.0;
  return StratifiedMetricField::uniform(2, g, /*semi=*/true, /*regular=*/true, kb);
}

StratifiedMetricField preset_counterexample(double mu) {
  require(mu > 0, "preset_counterexample: mu must be positive");
  const double im = 1.0 / mu;
  Eigen::MatrixXd g(2, 2);
  g << 1.0 + im, -im, -im, im * im;
  return StratifiedMetricField::uniform(2, g, /*semi=*/false);
}

StratifiedMetricField preset_counterexample_limit() { return preset_shrink_fiber_limit(); }

StratifiedMetricField preset_pullback(int total_dim, int n_base,
                                      StratifiedMetricField base_field) {
  require(n_base >= 1 && n_base < total_dim, "preset_pullback: need 1 <= n_base < total_dim");
  require(base_field.dim == n_base, "preset_pullback: base field dimension mismatch");
  auto inner = std::make_shared<const StratifiedMetricField>(std::move(base_field));

  StratifiedMetricField f;
  f.dim = total_dim;
  f.semi = true;
  f.regular = !inner->semi;
  f.stratum_of = [inner, n_base](const Eigen::VectorXd& p) {
    return inner->stratum_of(p.head(n_base));
  };
  auto lift = [total_dim, n_base](MatFn fn) {
    return MatFn([fn = std::move(fn), total_dim, n_base](const Eigen::VectorXd& p) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(total_dim, total_dim);
      m.topLeftCorner(n_base, n_base) = fn(p.head(n_base));
      return m;
    });
  };
  for (const auto& fn : inner->tangential) f.tangential.push_back(lift(fn));
  for (const auto& fn : inner->extension) f.extension.push_back(lift(fn));
  const int m = total_dim - n_base;
  Eigen::MatrixXd kb = Eigen::MatrixXd::Zero(total_dim, m);
  for (int i = 0; i < m; ++i) kb(n_base + i, i) = 1.0;
  f.kernel = MatFn([kb](const Eigen::VectorXd&) { return kb; });
  return f;
}

void validate_scenario(const CollapseScenario& s) {
  require(s.e1 && s.e2 && s.base, "scenario: missing model spaces");
  const int n1 = s.e1->node_count(), n2 = s.e2->node_count();

  require(!s.mu_grid.empty(), "scenario: empty mu schedule");
  for (size_t i = 0; i < s.mu_grid.size(); ++i) {
    require(s.mu_grid[i] > 0, "scenario: mu levels must be positive");
    require(i == 0 || s.mu_grid[i] > s.mu_grid[i - 1],
            "scenario: mu schedule must be strictly increasing");
  }
  require(!s.r_grid.empty() && std::abs(s.r_grid[0] - 1.0) <= 1e-12,
          "scenario: r grid must start at 1");
  for (size_t i = 0; i < s.r_grid.size(); ++i) {
    require(s.r_grid[i] > 0 && s.r_grid[i] <= 1.0, "scenario: radii must lie in (0, 1]");
    require(i == 0 || s.r_grid[i] < s.r_grid[i - 1],
            "scenario: r grid must be strictly decreasing");
  }
  require(s.threshold > 0, "scenario: threshold must be positive");
  require(s.lambda_tol > 0, "scenario: lambda tolerance must be positive");

  require(s.fib.total.get() == s.e2.get() && s.fib.base.get() == s.base.get(),
          "scenario: the fibration must map E2 onto the base");
  validate_fibration(s.fib);

  require(s.g_inf && s.g_inf->dim == s.e2->dim(), "scenario: limit field dimension mismatch");
  require(s.g_inf_on_e1 && s.g_inf_on_e1->dim == s.e1->dim(),
          "scenario: pulled-back limit field dimension mismatch");
  require(static_cast<bool>(s.family.at_mu), "scenario: missing metric family");
  require(s.family.limit.dim == s.e1->dim(), "scenario: family limit dimension mismatch");
  require(static_cast<int>(s.phi.size()) == n1, "scenario: Phi size mismatch");
  require(s.regions.size() <= 3, "scenario: at most three singular regions are supported");

  const size_t nr = s.r_grid.size();
  std::vector<int> owner1(n1, -1), owner2(n2, -1);  // region owning each U^(1) node
  for (size_t j = 0; j < s.regions.size(); ++j) {
    const auto& reg = s.regions[j];
    require(reg.class_count >= 1, "scenario: region needs at least one fiber class");
    require(reg.u1.size() == nr && reg.u2.size() == nr,
            "scenario: region neighborhoods must match the r grid");
    require(static_cast<int>(reg.f1.size()) == n1 && static_cast<int>(reg.f2.size()) == n2,
            "scenario: fiber map size mismatch");
    require(!reg.s1.empty() && !reg.s2.empty(), "scenario: empty singular set");
    check_sorted_in_range(reg.s1, n1, "scenario: S1");
    check_sorted_in_range(reg.s2, n2, "scenario: S2");
    for (size_t k = 0; k < nr; ++k) {
      check_sorted_in_range(reg.u1[k], n1, "scenario: U1");
      check_sorted_in_range(reg.u2[k], n2, "scenario: U2");
      require(is_subset(reg.s1, reg.u1[k]) && is_subset(reg.s2, reg.u2[k]),
              "scenario: singular set must lie in every neighborhood");
      if (k > 0)
        require(is_subset(reg.u1[k], reg.u1[k - 1]) && is_subset(reg.u2[k], reg.u2[k - 1]),
                "scenario: neighborhoods must be nested along the r grid");
    }
    for (int v = 0; v < n1; ++v) {
      const bool inside = std::binary_search(reg.u1[0].begin(), reg.u1[0].end(), v);
      require((reg.f1[v] >= 0 && reg.f1[v] < reg.class_count) == inside,
              inside ? "scenario: fiber map undefined inside U1^(1)"
                     : "scenario: fiber map defined outside U1^(1)");
    }
    for (int v = 0; v < n2; ++v) {
      const bool inside = std::binary_search(reg.u2[0].begin(), reg.u2[0].end(), v);
      require((reg.f2[v] >= 0 && reg.f2[v] < reg.class_count) == inside,
              inside ? "scenario: fiber map undefined inside U2^(1)"
                     : "scenario: fiber map defined outside U2^(1)");
    }
    for (int v : reg.u1[0]) {
      require(owner1[v] < 0, "scenario: singular neighborhoods overlap in E1");
      owner1[v] = static_cast<int>(j);
    }
    for (int v : reg.u2[0]) {
      require(owner2[v] < 0, "scenario: singular neighborhoods overlap in E2");
      owner2[v] = static_cast<int>(j);
    }
  }

  // Disjoint closures at r = 1: no geometric (axis/diagonal) adjacency may
  // connect neighborhoods of distinct regions.
  auto check_closures = [](const ModelSpace& m, const std::vector<int>& owner) {
    const auto offs = StencilConfig{}.offsets(m.dim());
    std::vector<int> neg(m.dim());
    for (int v = 0; v < static_cast<int>(owner.size()); ++v) {
      if (owner[v] < 0) continue;
      for (const auto& o : offs) {
        for (int sgn = 0; sgn < 2; ++sgn) {
          for (int a = 0; a < m.dim(); ++a) neg[a] = sgn ? -o[a] : o[a];
          const int w = m.neighbor(v, neg);
          if (w >= 0 && owner[w] >= 0 && owner[w] != owner[v])
            throw config_error("scenario: closures of the singular neighborhoods intersect");
        }
      }
    }
  };
  check_closures(*s.e1, owner1);
  check_closures(*s.e2, owner2);

  // Phi: a bijection from E1 minus its singular sets onto E2 minus its own.
  std::vector<char> in_s1(n1, 0), in_s2(n2, 0);
  for (const auto& reg : s.regions) {
    for (int v : reg.s1) in_s1[v] = 1;
    for (int v : reg.s2) in_s2[v] = 1;
  }
  std::vector<char> hit(n2, 0);
  for (int v = 0; v < n1; ++v) {
    if (in_s1[v]) continue;
    const int w = s.phi[v];
    require(w >= 0 && w < n2, "scenario: Phi maps a node out of range");
    require(!in_s2[w], "scenario: Phi must avoid the singular set of E2");
    require(!hit[w], "scenario: Phi is not injective");
    hit[w] = 1;
  }
  for (int w = 0; w < n2; ++w)
    require(hit[w] || in_s2[w], "scenario: Phi is not onto the nonsingular part of E2");

  // Fiber maps commute with Phi away from the singular sets.
  for (const auto& reg : s.regions) {
    for (int v : reg.u1[0]) {
      if (in_s1[v]) continue;
      const int w = s.phi[v];
      require(reg.f2[w] >= 0, "scenario: Phi pushes U1^(1) outside U2^(1)");
      require(reg.f1[v] == reg.f2[w], "scenario: fiber maps do not commute with Phi");
    }
  }
}

std::vector<int> exterior_nodes(const CollapseScenario& s, int which, int r_index) {
  require(which == 1 || which == 2, "exterior_nodes: which must be 1 or 2");
  require(r_index >= 0 && r_index < static_cast<int>(s.r_grid.size()),
          "exterior_nodes: r index out of range");
  const int n = (which == 1 ? s.e1 : s.e2)->node_count();
  std::vector<char> cut(n, 0);
  for (const auto& reg : s.regions)
    for (int v : (which == 1 ? reg.u1 : reg.u2)[r_index]) cut[v] = 1;
  std::vector<int> out;
  out.reserve(n);
  for (int v = 0; v < n; ++v)
    if (!cut[v]) out.push_back(v);
  return out;
}

CollapseScenario make_simple_collapse(double h, std::vector<double> mu, std::vector<double> r,
                                      int n_regions) {
  require(n_regions >= 0 && n_regions <= 2, "make_simple_collapse: n_regions must be 0, 1 or 2");
  auto model = std::make_shared<const ModelSpace>(ModelSpace::torus({2 * kPi, 2 * kPi}, h));
  auto base = std::make_shared<const ModelSpace>(ModelSpace::torus({2 * kPi}, h));

  CollapseScenario s;
  s.name = "simple-collapse";
  s.e1 = model;
  s.e2 = model;
  s.base = base;
  s.fib = product_fibration(model, base, 1);
  s.g_inf = std::make_shared<const StratifiedMetricField>(preset_shrink_fiber_limit());
  s.g_inf_on_e1 = s.g_inf;
  s.family.name = "shrink-fiber";
  s.family.at_mu = [](double m) { return preset_shrink_fiber(m); };
  s.family.limit = preset_shrink_fiber_limit();
  s.mu_grid = std::move(mu);
  s.r_grid = std::move(r);
  s.phi.resize(model->node_count());
  std::iota(s.phi.begin(), s.phi.end(), 0);
  s.threshold = 10 * model->max_step();

  std::vector<double> centers;
  if (n_regions == 1) centers = {kPi / 2};
  if (n_regions == 2) centers = {kPi / 2, 3 * kPi / 2};
  for (double c : centers) s.regions.push_back(strip_region(*model, s.r_grid, c, 1.0));

  validate_scenario(s);
  return s;
}

CollapseScenario make_counterexample_scenario(int n, std::vector<double> mu) {
  require(n >= 8, "make_counterexample_scenario: need at least 8 subdivisions");
  const double h = 1.0 / n;
  auto model = std::make_shared<const ModelSpace>(ModelSpace::torus({1.0, 1.0}, h));
  auto base = std::make_shared<const ModelSpace>(ModelSpace::torus({1.0}, h));

  CollapseScenario s;
  s.name = "counterexample";
  s.e1 = model;
  s.e2 = model;
  s.base = base;
  s.fib = product_fibration(model, base, 1);
  s.g_inf = std::make_shared<const StratifiedMetricField>(preset_counterexample_limit());
  s.g_inf_on_e1 = s.g_inf;
  s.family.name = "counterexample";
  s.family.at_mu = [](double m) { return preset_counterexample(m); };
  s.family.limit = preset_counterexample_limit();
  // The family's geodesics run along the chart direction (1, mu); give the
  // graph that chord explicitly at each level.
  s.family.stencil_at_mu = [](double m) {
    const long k = std::llround(m);
    require(k >= 1 && std::abs(m - static_cast<double>(k)) <= 1e-9,
            "counterexample family: mu levels must be positive integers");
    StencilConfig st;
    st.extra = {{1, static_cast<int>(k)}};
    return st;
  };
  s.mu_grid = std::move(mu);
  s.r_grid = {1, 0.5, 0.25, 0.125};
  s.phi.resize(model->node_count());
  std::iota(s.phi.begin(), s.phi.end(), 0);
  s.threshold = 10 * h;

  validate_scenario(s);
  return s;
}

CollapseScenario make_pillowcase_scenario(double h, std::vector<double> mu) {
  Pillowcase pc = make_pillowcase(h);

  CollapseScenario s;
  s.name = "pillowcase";
  s.e1 = pc.total;
  s.e2 = pc.total;
  s.base = pc.base;
  s.fib = std::move(pc.fib);
  s.g_inf = std::make_shared<const StratifiedMetricField>(preset_shrink_fiber_limit());
  s.g_inf_on_e1 = s.g_inf;
  s.family.name = "shrink-fiber";
  s.family.at_mu = [](double m) { return preset_shrink_fiber(m); };
  s.family.limit = preset_shrink_fiber_limit();
  s.mu_grid = std::move(mu);
  s.r_grid = {1, 0.5, 0.25, 0.125};
  s.phi.resize(s.e1->node_count());
  std::iota(s.phi.begin(), s.phi.end(), 0);
  s.threshold = 10 * s.e1->max_step();

  validate_scenario(s);
  return s;
}

T3Setup make_t3(double lambda, int base_n, int fiber_n) {
  require(lambda > 2.0, "make_t3: the anisotropic scenario requires lambda > 2");
  require(base_n >= 4, "make_t3: base subdivision too small");
  require(fiber_n >= 8 && fiber_n % 4 == 0,
          "make_t3: fiber subdivision must be a multiple of 4 (puts 0 and pi/2 on the grid)");

  T3Setup t;
  t.total = std::make_shared<const ModelSpace>(
      ModelSpace::torus_counts({2 * kPi, 2 * kPi, 2 * kPi}, {base_n, base_n, fiber_n}));
  t.base = std::make_shared<const ModelSpace>(
      ModelSpace::torus_counts({2 * kPi, 2 * kPi}, {base_n, base_n}));
  t.fib = product_fibration(t.total, t.base, 2);
  t.field = std::make_shared<const StratifiedMetricField>(preset_t3_limit(lambda));
  t.reference = preset_flat(2);
  t.lambda = lambda;
  return t;
}

std::shared_ptr<const ModelSpace> model_from_json(const nlohmann::json& j) {
  require(j.is_object() && j.contains("kind"), "model: expected an object with a kind");
  const std::string kind = j.at("kind").get<std::string>();
  const double h = j.value("h", 0.0);
  if (kind == "torus") {
    require(j.contains("periods"), "model: torus needs periods");
    const auto periods = j.at("periods").get<std::vector<double>>();
    if (j.contains("counts"))
      return std::make_shared<const ModelSpace>(
          ModelSpace::torus_counts(periods, j.at("counts").get<std::vector<int>>()));
    require(h > 0, "model: torus needs h or counts");
    return std::make_shared<const ModelSpace>(ModelSpace::torus(periods, h));
  }
  if (kind == "pillowcase") {
    require(h > 0, "model: pillowcase needs h");
    return std::make_shared<const ModelSpace>(ModelSpace::pillowcase_total(h));
  }
  if (kind == "interval") {
    require(h > 0, "model: interval needs h");
    return std::make_shared<const ModelSpace>(
        ModelSpace::interval_orbifold(j.value("period", 2 * kPi), h));
  }
  if (kind == "quadrant") {
    require(j.contains("extents"), "model: quadrant needs extents");
    require(h > 0, "model: quadrant needs h");
    return std::make_shared<const ModelSpace>(
        ModelSpace::quadrant(j.at("extents").get<std::vector<double>>(), h));
  }
  throw config_error("model: unknown kind '" + kind + "'");
}

CollapseScenario scenario_from_json(const nlohmann::json& j) {
  require(j.is_object(), "scenario: expected a JSON object");
  require(j.contains("model"), "scenario: missing model");
  const auto& jm = j.at("model");
  require(jm.is_object() && jm.contains("kind"), "scenario: model needs a kind");
  const std::string kind = jm.at("kind").get<std::string>();
  const std::string preset =
      j.contains("metric") ? j.at("metric").value("preset", "") : std::string{};
  require(preset == "shrink-fiber" || preset == "counterexample",
          "scenario: metric preset must be 'shrink-fiber' or 'counterexample'");

  CollapseScenario s;
  s.name = j.value("name", preset);

  if (kind == "pillowcase") {
    require(!j.contains("regions") || j.at("regions").empty(),
            "scenario: singular regions are unsupported on the pillowcase");
    require(preset == "shrink-fiber", "scenario: the pillowcase uses the shrink-fiber preset");
    const double h = jm.value("h", 0.0);
    require(h > 0, "scenario: pillowcase needs h");
    Pillowcase pc = make_pillowcase(h);
    s.e1 = pc.total;
    s.e2 = pc.total;
    s.base = pc.base;
    s.fib = std::move(pc.fib);
  } else {
    require(kind == "torus", "scenario: model kind must be 'torus' or 'pillowcase'");
    auto model = model_from_json(jm);
    require(model->dim() == 2, "scenario: collapse scenarios need a 2d total space");
    auto base = std::make_shared<const ModelSpace>(ModelSpace::torus_counts(
        {model->axis(0).count * model->axis(0).step}, {model->axis(0).count}));
    s.e1 = model;
    s.e2 = model;
    s.base = base;
    s.fib = product_fibration(model, base, 1);
  }

  const StencilConfig base_stencil =
      stencil_from_json(j.contains("stencil") ? j.at("stencil") : nlohmann::json{});
  s.stencil_e2 = base_stencil;
  if (preset == "shrink-fiber") {
    s.family.name = "shrink-fiber";
    s.family.at_mu = [](double m) { return preset_shrink_fiber(m); };
    s.family.limit = preset_shrink_fiber_limit();
    s.family.stencil_at_mu = [base_stencil](double) { return base_stencil; };
    s.g_inf = std::make_shared<const StratifiedMetricField>(preset_shrink_fiber_limit());
  } else {
    s.family.name = "counterexample";
    s.family.at_mu = [](double m) { return preset_counterexample(m); };
    s.family.limit = preset_counterexample_limit();
    s.family.stencil_at_mu = [base_stencil](double m) {
      const long k = std::llround(m);
      require(k >= 1 && std::abs(m - static_cast<double>(k)) <= 1e-9,
              "counterexample family: mu levels must be positive integers");
      StencilConfig st = base_stencil;
      st.extra.push_back({1, static_cast<int>(k)});
      return st;
    };
    s.g_inf = std::make_shared<const StratifiedMetricField>(preset_counterexample_limit());
  }
  s.family.stencil_limit = base_stencil;
  s.g_inf_on_e1 = s.g_inf;

  s.mu_grid = j.value("mu", std::vector<double>{4, 16, 64, 256});
  s.r_grid = j.value("r", std::vector<double>{1, 0.5, 0.25, 0.125});
  s.phi.resize(s.e1->node_count());
  std::iota(s.phi.begin(), s.phi.end(), 0);
  s.threshold = j.value("threshold", 10 * s.e1->max_step());
  s.lambda_tol = j.value("lambda_tol", 0.01);

  if (j.contains("regions")) {
    for (const auto& jr : j.at("regions")) {
      require(jr.is_object() && jr.contains("kind"), "scenario: region needs a kind");
      const std::string rk = jr.at("kind").get<std::string>();
      if (rk == "none") continue;
      const double hw = jr.value("halfwidth", 1.0);
      if (rk == "strip") {
        s.regions.push_back(
            strip_region(*s.e1, s.r_grid, jr.value("center", kPi / 2), hw));
      } else if (rk == "disk") {
        require(jr.contains("center"), "scenario: disk region needs a center point");
        s.regions.push_back(
            disk_region(*s.e1, s.r_grid, jr.at("center").get<std::vector<double>>(), hw));
      } else {
        throw config_error("scenario: unknown region kind '" + rk + "'");
      }
    }
  }

  validate_scenario(s);
  return s;
}

}  // namespace collapse
