// Named closed-form metric presets and assembly of collapse scenarios:
// model spaces E1, E2, a base B fibered by E2, an identification Phi of the
// nonsingular parts, singular regions with nested neighborhoods U^(r) and
// fiber maps onto abstract classes, a metric family g^mu on E1, and the
// degenerate limit field g^inf on E2.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "collapse/geodesic_graph.hpp"
#include "collapse/model_space.hpp"
#include "collapse/stratified.hpp"

namespace collapse {

// Flat metric: the identity form in the given dimension.
StratifiedMetricField preset_flat(int dim);

// Three-torus field with coordinates (th1, th2, alpha), vanishing along
// d/dalpha:  (1 + lambda cos^2 alpha) dth1^2 + (1 + lambda sin^2 alpha) dth2^2.
// Regular with respect to the alpha fibers for lambda > -1.
StratifiedMetricField preset_t3_limit(double lambda);

// Shrinking-fiber family on a 2d model: dth1^2 + mu^-2 dth2^2, and its
// degenerate limit dth1^2 (regular with respect to the th2 fibers).
StratifiedMetricField preset_shrink_fiber(double mu);
StratifiedMetricField preset_shrink_fiber_limit();

// Shear family whose candidate limit degenerates everywhere:
//   (dth1 - mu^-1 dth2)^2 + mu^-1 dth1^2
// i.e. the matrix [[1 + 1/mu, -1/mu], [-1/mu, 1/mu^2]].
StratifiedMetricField preset_counterexample(double mu);
StratifiedMetricField preset_counterexample_limit();  // dth1^2 on the 2-torus

// Pullback of a base field through the first n_base coordinates of a product
// total space; regular with respect to the remaining (fiber) coordinates
// when the base field is positive-definite.
StratifiedMetricField preset_pullback(int total_dim, int n_base, StratifiedMetricField base_field);

// A mu-parametrized family with its limit and the edge stencils to use at
// each level (some families need extra chord offsets to resolve their
// geodesic direction on the grid).
struct MetricFamily {
  std::string name;
  std::function<StratifiedMetricField(double mu)> at_mu;
  StratifiedMetricField limit;
  std::function<StencilConfig(double mu)> stencil_at_mu = [](double) { return StencilConfig{}; };
  StencilConfig stencil_limit;
};

// One singular region: singular node sets in both spaces, the nested
// neighborhoods per declared radius, and fiber maps onto abstract classes.
struct SingularRegion {
  std::vector<int> s1, s2;               // sorted node ids, S_i(j)
  std::vector<std::vector<int>> u1, u2;  // per r-grid index (r descending), sorted
  std::vector<int> f1, f2;               // node -> class id, or -1 outside U^(1)(j)
  int class_count = 1;
};

struct CollapseScenario {
  std::string name;
  std::shared_ptr<const ModelSpace> e1, e2, base;
  DiscreteFibration fib;  // E2 -> base
  std::shared_ptr<const StratifiedMetricField> g_inf;        // on E2
  std::shared_ptr<const StratifiedMetricField> g_inf_on_e1;  // Phi-pullback, for comparisons
  MetricFamily family;                                       // g^mu on E1
  StencilConfig stencil_e2;
  std::vector<double> mu_grid;  // strictly increasing
  std::vector<double> r_grid;   // strictly decreasing, r_grid[0] = 1, values in (0,1]
  std::vector<int> phi;         // E1 node -> E2 node; consulted off the singular sets
  std::vector<SingularRegion> regions;
  double threshold = 0;    // final-value pass threshold (builders: 10 * grid step)
  double lambda_tol = 0.01;

  int n_regions() const { return static_cast<int>(regions.size()); }
};

// Structural validation: grids, region nesting, disjoint closures at r = 1,
// Phi bijectivity off the singular sets, commuting fiber maps, fibration
// integrity.  Throws config_error with a description of the first failure.
void validate_scenario(const CollapseScenario& s);

// E_i^(r): nodes of E1 (which = 1) or E2 (which = 2) outside every singular
// neighborhood at r_grid[r_index].
std::vector<int> exterior_nodes(const CollapseScenario& s, int which, int r_index);

// Shrinking-fiber collapse on the square 2-torus of period 2*pi: fibers over
// the first circle, n_regions in {0, 1, 2} vertical singular strips
// (centerline singular sets, neighborhoods of half-width r).
CollapseScenario make_simple_collapse(double h, std::vector<double> mu = {4, 16, 64, 256},
                                      std::vector<double> r = {1, 0.5, 0.25, 0.125},
                                      int n_regions = 1);

// Shear family on the unit-period square torus with n subdivisions; the
// stencil at level mu includes the (1, mu) chord that carries its geodesics.
// No singular regions; the candidate limit field is dth1^2.
CollapseScenario make_counterexample_scenario(int n = 128,
                                              std::vector<double> mu = {4, 16, 64, 256});

// Shrinking-fiber collapse on the pillowcase (2-torus mod point reflection)
// over the base interval.
CollapseScenario make_pillowcase_scenario(double h, std::vector<double> mu = {4, 16, 64, 256});

// Three-torus fibered over the square 2-torus with the anisotropic limit
// field; used by the induced-length-structure experiments (no mu family).
struct T3Setup {
  std::shared_ptr<const ModelSpace> total, base;
  DiscreteFibration fib;
  std::shared_ptr<const StratifiedMetricField> field;
  StratifiedMetricField reference;  // flat field on the base
  double lambda = 0;
};
T3Setup make_t3(double lambda, int base_n = 8, int fiber_n = 1000);

// Model from JSON: {"kind": "torus"|"pillowcase"|"quadrant"|"interval",
// "periods"/"extents": [...], "h": float}.
std::shared_ptr<const ModelSpace> model_from_json(const nlohmann::json& j);

// Scenario from JSON: metric preset by name with parameters, mu schedule,
// r grid, region constructors ("strip" | "disk" | "none"), thresholds,
// stencil options.  See README for the schema.
CollapseScenario scenario_from_json(const nlohmann::json& j);

}  // namespace collapse
