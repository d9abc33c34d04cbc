// Verification machinery for collapse scenarios: restricted exterior
// distances, the four convergence conditions on the (r, mu) grids, layered
// path lifting with an a-priori speed bound, the comb decomposition of the
// full metric through singular regions, the base-vs-total comparison, and the
// collapse run measuring discrepancies of the extended identification.
#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "collapse/geodesic_graph.hpp"
#include "collapse/metric_space.hpp"
#include "collapse/scenarios.hpp"
#include "collapse/stratified.hpp"

namespace collapse {

// ---------- restricted distances ----------

struct RestrictedSpace {
  SemiMetricSpace space;
  std::vector<int> nodes;  // space index -> scenario node id
};

// d^{mu,r} on E1 (mu given) or d^{inf,r} on E2 (mu empty): the intrinsic
// metric of the graph induced on the exterior E^(r).  check_error when the
// exterior is disconnected at this resolution.
RestrictedSpace restricted_distance(const CollapseScenario& s, int r_index,
                                    std::optional<double> mu, int threads = 1);

// ---------- conditions (i)-(iv) ----------

struct TrendTable {
  std::vector<double> r, mu;
  std::vector<std::vector<double>> value;  // [r index][mu index]

  double at(int ri, int mi) const { return value[ri][mi]; }
  double final_value() const { return value.back().back(); }
};

struct ConditionVerdict {
  bool monotone_mu = false;  // expected trend along the mu schedule (required)
  bool monotone_r = false;   // trend along the descending r grid (informational)
  bool final_ok = false;
  double final_value = 0;
  double threshold = 0;
  bool pass = false;  // monotone_mu && final_ok
};

struct ConditionReport {
  TrendTable field_gap;       // (i) sup-norm form gap on E^(r)
  TrendTable lambda;          // (i) largest Lambda with g_mu >= Lambda^2 g_inf on E^(r)
  TrendTable fiber_diam_mu;   // (ii) fiber class diameters under d^mu inside U^(r)
  TrendTable fiber_diam_inf;  // (iii) the same under d^inf (constant across mu)
  TrendTable boundary_gap;    // (iv) sup |d^mu - d^inf| over boundary shell pairs
  ConditionVerdict v_field_gap, v_lambda, v_fiber_mu, v_fiber_inf, v_boundary;
  bool all_pass = false;
};

// Fills the five tables over the scenario's (r, mu) grids using full-space
// distances, and grades each: the mu-trend must be monotone (nonincreasing,
// nondecreasing for Lambda) within 1e-9 slack and the final cell must meet
// the threshold (quantities: <= threshold; Lambda: 1 - Lambda <= lambda_tol).
ConditionReport check_conditions(const CollapseScenario& s, int threads = 1);

// ---------- path lifting ----------

struct LiftResult {
  PathPolyline path;       // total-space cover coordinates, one point per layer
  std::vector<int> nodes;  // total-space node ids per layer
  double cost = 0;
};

// Minimal-cost graph lift of a base path with pinned endpoints: layered
// dynamic program over complete bipartite fiber transitions, each chord
// priced at its midpoint's stratum.  Endpoints must lie in the fibers over
// the path's first and last base nodes (config_error otherwise); base path
// points must sit on the base grid.
LiftResult lift_path(const DiscreteFibration& fib, const StratifiedMetricField& field,
                     const PathPolyline& base_path, int e0, int e1);

// Worst squared speed of a minimal lift along the path: the maximum over
// segments and over fiber nodes of both segment ends of the kernel-minimized
// form applied to the unit segment direction.  Any supplied lifts are checked
// stepwise: cost(step) <= sqrt(C) * |base step| within 1e-9 relative slack
// (check_error otherwise).
double apriori_bound(const DiscreteFibration& fib, const StratifiedMetricField& field,
                     const PathPolyline& base_path, std::span<const LiftResult> lifts = {});

// ---------- comb decomposition ----------

// Represents distances of the level-mu graph as the minimum over
// characteristic tuples of singular regions: restricted legs through E^(r)
// joined by full-metric hops between boundary-shell nodes of each visited
// region.  Exact for graph metrics; acceptance checks allow 2h of slack.
class CombDecomposer {
 public:
  CombDecomposer(const CollapseScenario& s, int r_index, double mu, int threads = 1);

  // x, y: E1 node ids inside E^(r).  +infinity only if the full graph
  // disconnects them (never for valid scenarios).
  double distance(int x, int y) const;

  const std::vector<int>& shell(int region) const { return shells_[region]; }
  int exterior_size() const { return static_cast<int>(sub_.to_old.size()); }

  // Testing hook: scales the in-region hop matrices (1 = exact) so that the
  // equality check against the full metric visibly breaks.
  void inject_fault(double factor);

 private:
  int n_regions_ = 0;
  GeodesicGraph full_;
  InducedSubgraph sub_;                      // graph induced on E^(r)
  std::vector<std::vector<int>> shells_;     // region -> sorted E1 node ids
  std::vector<std::vector<std::vector<double>>> shell_rest_;  // [j][i] -> restricted row
  std::vector<std::vector<std::vector<double>>> hop_;         // [j][i][l] full metric
  std::vector<std::vector<int>> tuples_;     // ordered distinct region tuples
};

// One-shot convenience wrapper around CombDecomposer::distance.
double comb_decomp_distance(const CollapseScenario& s, int r_index, double mu, int x, int y,
                            int threads = 1);

// ---------- base vs total ----------

struct BaseComparisonReport {
  double tol = 0;       // single-linkage tolerance used for the quotient
  int quotient_size = 0;
  int pairs = 0;
  double max_gap = 0;   // max |d_quotient - d_base| over sampled base pairs
  double gap_over_h = 0;
  int witness_a = -1, witness_b = -1;  // base nodes realizing max_gap
};

// Free metric quotient of (E2, d^inf) at tolerance tol_factor * h versus the
// length metric of the induced base evaluator (edges priced by the mean of
// the endpoint evaluations, one-sided at non-tangent endpoints).  Ensures the
// quotient classes are exactly the fibers.
BaseComparisonReport base_vs_total(const CollapseScenario& s, int sample_pairs = 100,
                                   double tol_factor = 0.5, unsigned long long seed = 1,
                                   int threads = 1);

// ---------- the collapse run ----------

struct CollapseRow {
  double mu = 0;
  double distortion = 0, net_defect = 0, epsilon = 0, gh_upper = 0;
  double gh_to_limit = 0;  // 2 * eps of (quotient projection o Phi-tilde)
  double diameter = 0;     // of (E1, d^mu)
  double gh_to_point = 0;  // = diameter / 2 (exact GH distance to one point)
};

struct CollapseReport {
  std::vector<CollapseRow> rows;     // one per mu, schedule order
  bool epsilon_decreasing = false;   // nonincreasing within 1e-9 slack
  double quotient_tol = 0;
  int quotient_size = 0;
};

// Extends Phi over each singular set by the least node of the matching
// target fiber: x in S1(j) -> min f2^{-1}({f1(x)}) of S2(j).
CorrespondenceMap extend_phi(const CollapseScenario& s);

// Per mu level: discrepancy of Phi-tilde : (E1, d^mu) -> (E2, d^inf), its GH
// upper bound, and the bound onward to the free quotient of the limit.
CollapseReport run_collapse(const CollapseScenario& s, int threads = 1);

// ---------- uniform convergence of restricted distances ----------

struct SmoothConvRow {
  double mu = 0, sup_gap = 0, field_gap = 0, lambda = 0, ratio = 0;
};

struct SmoothConvReport {
  double r = 0;
  std::vector<SmoothConvRow> rows;
  double k_constant = 0;  // max ratio sup_gap / (sqrt(field_gap) + (1 - Lambda)) / diam
  bool decreasing = false;
};

// sup |d^{mu,r} - d^{inf,r}| per mu at one fixed r, with the ratio against
// the field-driven bound (sqrt of the sup-norm form gap plus the Lambda
// deficit, scaled by the restricted limit diameter).
SmoothConvReport smooth_conv_check(const CollapseScenario& s, int r_index, int threads = 1);

// ---------- report serialization ----------

nlohmann::json to_json(const ConditionReport& rep);
nlohmann::json to_json(const CollapseReport& rep);
nlohmann::json to_json(const BaseComparisonReport& rep);
nlohmann::json to_json(const SmoothConvReport& rep);

// Long-format CSV (%.12g): section comments, one row per table cell /
// verdict / mu level.
void write_csv(const ConditionReport& rep, std::ostream& os);
void write_csv(const CollapseReport& rep, std::ostream& os);
void write_csv(const BaseComparisonReport& rep, std::ostream& os);

}  // namespace collapse
