// Acceptance gate: six end-to-end checks with pinned tolerances.  Prints one
// [PASS]/[FAIL] line per criterion and exits nonzero if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "collapse/verifier.hpp"
#include "oracles.hpp"

using namespace collapse;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

// The fiberwise length evaluator on the anisotropic three-torus matches the
// closed form sqrt(a^2 + b^2 + lambda * min(a^2, b^2)) to 1e-6, and its
// relaxed-triangle defect at the axis pair equals sqrt(lambda + 2) - 2.
std::optional<std::string> crit_closed_form() {
  for (const double lambda : {3.0, 7.0}) {
    const T3Setup t3 = make_t3(lambda, 8, 64);
    const McLContext ctx =
        McLContext::make(std::make_shared<DiscreteFibration>(t3.fib), t3.field);
    double worst = 0;
    for (int k = 0; k < 64; ++k) {
      const double th = 2 * kPi * k / 64;
      const double a = std::cos(th), b = std::sin(th);
      const double closed =
          std::sqrt(a * a + b * b + lambda * std::min(a * a, b * b));
      worst = std::max(worst, std::abs(ctx.eval(0, Eigen::Vector2d(a, b)) - closed));
    }
    if (worst > 1e-6)
      return "direction gap " + num(worst) + " at lambda " + num(lambda);
    const double l1 = ctx.eval(0, Eigen::Vector2d(1, 0));
    const double l2 = ctx.eval(0, Eigen::Vector2d(0, 1));
    const double l12 = ctx.eval(0, Eigen::Vector2d(1, 1));
    const double gap = l12 - l1 - l2;
    const double expected = std::sqrt(lambda + 2) - 2;
    if (std::abs(gap - expected) > 1e-6)
      return "triangle defect " + num(gap) + " expected " + num(expected) +
             " at lambda " + num(lambda);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- criterion 2

// The sheared family on the fine unit torus collapses to a point: diameters
// are at most 1/mu + 1/sqrt(mu) + 3h and strictly decreasing, while the
// largest lower form bound against the candidate limit is mu^(-1/2) +- 1e-6.
std::optional<std::string> crit_shear_decay() {
  const std::vector<double> mu = {4, 16, 64, 256};
  const CollapseScenario s = make_counterexample_scenario(128, mu);
  const double h = 1.0 / 128;
  std::vector<int> all(s.e1->node_count());
  std::iota(all.begin(), all.end(), 0);
  double prev = std::numeric_limits<double>::infinity();
  for (const double m : mu) {
    const StratifiedMetricField gm = s.family.at_mu(m);
    const GeodesicGraph graph =
        GeodesicGraph::build(*s.e1, gm, s.family.stencil_at_mu(m));
    const double diam = graph.eccentricity(0);  // transitive symmetry: any source
    const double bound = 1.0 / m + 1.0 / std::sqrt(m) + 3 * h;
    if (!(diam <= bound + 1e-12))
      return "diameter " + num(diam) + " exceeds " + num(bound) + " at mu " + num(m);
    if (!(diam < prev))
      return "diameter did not decrease at mu " + num(m);
    prev = diam;
    const double lam = lambda_sup(gm, *s.g_inf_on_e1, *s.e1, all);
    if (std::abs(lam - 1.0 / std::sqrt(m)) > 1e-6)
      return "lower form bound " + num(lam) + " expected " + num(1.0 / std::sqrt(m)) +
             " at mu " + num(m);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- criterion 3

// Shrinking-fiber collapse on the square torus: the identification onto the
// limit is an epsilon-isometry with epsilon <= pi/mu + 4h at every level, the
// final distance bound to the quotient circle is below 10h, and the induced
// base length structure reproduces the quotient metric within 2h.
std::optional<std::string> crit_fiber_collapse() {
  const double h = 2 * kPi / 48;
  const CollapseScenario s = make_simple_collapse(h, {4, 16, 64, 256});
  const CollapseReport rep = run_collapse(s);
  for (const CollapseRow& row : rep.rows)
    if (!(row.epsilon <= kPi / row.mu + 4 * h))
      return "epsilon " + num(row.epsilon) + " exceeds " +
             num(kPi / row.mu + 4 * h) + " at mu " + num(row.mu);
  if (!rep.epsilon_decreasing) return std::string("epsilon is not decreasing");
  const double final_gh = rep.rows.back().gh_to_limit;
  if (!(final_gh < 10 * h))
    return "final distance bound " + num(final_gh) + " is not below " + num(10 * h);
  const BaseComparisonReport bc = base_vs_total(s, 100, 0.5, 1);
  if (!(bc.max_gap <= 2 * h))
    return "base comparison gap " + num(bc.max_gap) + " exceeds " + num(2 * h);
  return std::nullopt;
}

// ---------------------------------------------------------------- criterion 4

// The comb decomposition through one and two singular strips reproduces the
// direct graph metric within 2h over 200 random exterior pairs each.
std::optional<std::string> crit_comb() {
  const double h = 2 * kPi / 64;
  for (const int regions : {1, 2}) {
    const CollapseScenario s = make_simple_collapse(h, {4}, {1, 0.5}, regions);
    const CombDecomposer dec(s, 1, 4.0);
    const GeodesicGraph graph =
        GeodesicGraph::build(*s.e1, s.family.at_mu(4.0), s.family.stencil_at_mu(4.0));
    const std::vector<int> ext = exterior_nodes(s, 1, 1);
    Rng rng(11);
    double worst = 0;
    for (int src = 0; src < 20; ++src) {
      const int x = ext[uniform_int(rng, 0, static_cast<int>(ext.size()) - 1)];
      const std::vector<double> ref = graph.dijkstra(x);
      for (int t = 0; t < 10; ++t) {
        const int y = ext[uniform_int(rng, 0, static_cast<int>(ext.size()) - 1)];
        worst = std::max(worst, std::abs(dec.distance(x, y) - ref[y]));
      }
    }
    if (!(worst <= 2 * h))
      return "gap " + num(worst) + " with " + std::to_string(regions) + " region(s)";
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- criterion 5

// Pillowcase structure: exactly 4 half-turn corner points, 7 induced strata
// over the base interval, and fiber endpoints only over the interval's ends.
std::optional<std::string> crit_pillowcase() {
  const Pillowcase pc = make_pillowcase(2 * kPi / 16);
  int corners = 0;
  for (int v = 0; v < pc.total->node_count(); ++v)
    if (pc.total->tag(v) == OrbifoldTag::z2) ++corners;
  if (corners != 4) return "corner count " + std::to_string(corners);
  const StratificationLabel ind =
      induced_stratification(pc.fib, canonical_stratification(*pc.base));
  if (ind.count != 7) return "induced stratum count " + std::to_string(ind.count);
  const int nb = pc.base->node_count();
  if (fiber_endpoint_nodes(pc.fib, 0).size() != 2 ||
      fiber_endpoint_nodes(pc.fib, nb - 1).size() != 2)
    return std::string("end fibers must each have 2 endpoint nodes");
  for (int b = 1; b + 1 < nb; ++b)
    if (!fiber_endpoint_nodes(pc.fib, b).empty())
      return "interior fiber " + std::to_string(b) + " has endpoint nodes";
  return std::nullopt;
}

// ---------------------------------------------------------------- criterion 6

// Property sweeps: axiom rejection on corrupted matrices, the two-stage
// discrepancy bound, quasinorm axioms of the induced structure, form-order
// certification of the norm bound, lifted paths against the a-priori speed
// bound, and idempotence of the free metric quotient.
std::optional<std::string> crit_properties() {
  Rng rng(2026);

  // corrupted distance matrices are rejected, valid ones accepted
  for (int t = 0; t < 100; ++t) {
    const auto pts = testutil::random_cloud(rng, 8, 5.0);
    const SemiMetricSpace ok = testutil::space_of_cloud(pts);
    std::vector<double> full(64, 0);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) full[i * 8 + j] = ok(i, j);
    double detour = std::numeric_limits<double>::infinity();
    for (int k = 2; k < 8; ++k) detour = std::min(detour, ok(0, k) + ok(k, 1));
    full[0 * 8 + 1] = full[1 * 8 + 0] = 1.5 * detour + 1.0;
    bool rejected = false;
    try {
      (void)SemiMetricSpace::from_full(8, full);
    } catch (const check_error&) {
      rejected = true;
    }
    if (!rejected) return std::string("a corrupted matrix was accepted");
  }

  // two-stage discrepancy bound
  for (int t = 0; t < 100; ++t) {
    const SemiMetricSpace x = testutil::random_cloud_space(rng, 7);
    const SemiMetricSpace xp = testutil::random_cloud_space(rng, 6);
    const SemiMetricSpace xpp = testutil::random_cloud_space(rng, 5);
    const CorrespondenceMap f = testutil::random_map(rng, 7, 6);
    const CorrespondenceMap fp = testutil::random_map(rng, 6, 5);
    const DiscrepancyReport rf = discrepancy(f, x, xp);
    const DiscrepancyReport rp = discrepancy(fp, xp, xpp);
    const DiscrepancyReport rc = compose_discrepancy(f, fp, x, xp, xpp);
    if (rc.epsilon > rf.epsilon + 2 * rp.epsilon + 1e-12)
      return "two-stage bound violated by " +
             num(rc.epsilon - rf.epsilon - 2 * rp.epsilon);
  }

  // quasinorm axioms of the induced structure
  const T3Setup t3 = make_t3(7.0, 8, 16);
  const QuasiFinslerField qf =
      build_quasifinsler(std::make_shared<DiscreteFibration>(t3.fib), t3.field,
                         t3.reference, 64);
  if (qf.axioms.positivity_violations != 0)
    return std::string("induced structure violates positivity");
  if (qf.axioms.max_homogeneity_residual > 1e-9)
    return "homogeneity residual " + num(qf.axioms.max_homogeneity_residual);

  // the norm bound certifies the two-sided form order
  for (int t = 0; t < 100; ++t) {
    const Eigen::MatrixXd g = testutil::random_spd(rng, 3);
    Eigen::MatrixXd m = testutil::random_spd(rng, 3, 0.0);
    m -= 0.5 * Eigen::MatrixXd::Identity(3, 3);  // indefinite perturbations too
    const Eigen::MatrixXd hsym = 0.5 * (m + m.transpose());
    const double c = norm_bound(hsym, g);
    if (!check_order(c * g, hsym).psd || !check_order(hsym, -c * g).psd)
      return std::string("norm bound failed to certify the order");
  }

  // lifted paths obey the a-priori speed bound, stepwise
  {
    Rng prng(7);
    for (int t = 0; t < 50; ++t) {
      std::vector<std::vector<int>> steps;
      int len = 2 + uniform_int(prng, 0, 3);
      for (int k = 0; k < len; ++k) {
        std::vector<int> st(2, 0);
        st[uniform_int(prng, 0, 1)] = uniform_int(prng, 0, 1) ? 1 : -1;
        steps.push_back(st);
      }
      const int b0 = uniform_int(prng, 0, t3.base->node_count() - 1);
      const PathPolyline base = polyline_from_steps(*t3.base, b0, steps);
      int b1 = b0;
      for (const auto& st : steps) b1 = t3.base->neighbor(b1, st);
      const auto& f0 = t3.fib.fibers[b0];
      const auto& f1 = t3.fib.fibers[b1];
      const int e0 = f0[uniform_int(prng, 0, static_cast<int>(f0.size()) - 1)];
      const int e1 = f1[uniform_int(prng, 0, static_cast<int>(f1.size()) - 1)];
      std::vector<LiftResult> lifts = {lift_path(t3.fib, *t3.field, base, e0, e1)};
      (void)apriori_bound(t3.fib, *t3.field, base, lifts);  // throws on violation
    }
  }

  // free quotient: classes match the duplication, and it is idempotent
  for (int t = 0; t < 100; ++t) {
    const int k = 3 + uniform_int(rng, 0, 4);
    const auto pts = testutil::random_cloud(rng, k, 10.0);
    std::vector<Eigen::Vector3d> doubled = pts;
    doubled.insert(doubled.end(), pts.begin(), pts.end());
    const QuotientResult q = free_quotient(testutil::space_of_cloud(doubled), 0.0);
    if (q.quotient.size() != k)
      return "quotient size " + std::to_string(q.quotient.size()) + " expected " +
             std::to_string(k);
    const QuotientResult q2 = free_quotient(q.quotient, 0.0);
    if (q2.quotient.size() != q.quotient.size())
      return std::string("free quotient is not idempotent");
  }

  return std::nullopt;
}

}  // namespace

int main() {
  struct Criterion {
    const char* what;
    std::function<std::optional<std::string>()> fn;
  };
  const std::vector<Criterion> criteria = {
      {"closed-form fiberwise evaluator and triangle defect on the three-torus",
       crit_closed_form},
      {"sheared family: diameter decay and mu^(-1/2) lower form bound",
       crit_shear_decay},
      {"shrinking fibers: epsilon-isometry onto the quotient circle",
       crit_fiber_collapse},
      {"comb decomposition matches direct shortest paths within 2h", crit_comb},
      {"pillowcase corners, induced strata, and fiber endpoints", crit_pillowcase},
      {"property sweeps: axioms, bounds, lifts, and quotients", crit_properties},
  };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    std::optional<std::string> detail;
    try {
      detail = criteria[i].fn();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (detail) {
      ++failures;
      std::printf("[FAIL] criterion %zu: %s — %s (%.1fs)\n", i + 1, criteria[i].what,
                  detail->c_str(), secs);
    } else {
      std::printf("[PASS] criterion %zu: %s (%.1fs)\n", i + 1, criteria[i].what, secs);
    }
    std::fflush(stdout);
  }
  if (failures) std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
