#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "collapse/scenarios.hpp"
#include "collapse/stratified.hpp"
#include "oracles.hpp"

using namespace collapse;

TEST_CASE("form order check") {
  Eigen::Matrix2d g, h;
  g << 2, 0, 0, 2;
  h << 1, 0, 0, 1;
  CHECK(check_order(g, h).psd);
  CHECK(check_order(g, h).min_eigenvalue == doctest::Approx(1.0));
  const PSDReport bad = check_order(h, g);
  CHECK_FALSE(bad.psd);
  CHECK(bad.min_eigenvalue == doctest::Approx(-1.0));
  CHECK(bad.witness.size() == 2);
  // boundary case within the slack
  Eigen::Matrix2d almost = h;
  almost(0, 0) = 1 - 0.5 * kPsdSlack;
  CHECK(check_order(almost, h).psd);
}

TEST_CASE("norm bound is the Frobenius norm in a g-orthonormal frame") {
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    const Eigen::MatrixXd g = testutil::random_spd(rng, 3);
    Eigen::MatrixXd h(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) h(i, j) = h(j, i) = uniform(rng, -1.0, 1.0);
    const double c = norm_bound(h, g);
    // frame-invariant formula: sqrt(tr((g^-1 h)^2))
    const Eigen::MatrixXd m = g.ldlt().solve(h);
    CHECK(c == doctest::Approx(std::sqrt((m * m).trace())).epsilon(1e-9));
    // the bound certifies -c g <= h <= c g
    CHECK(check_order(c * g - h, Eigen::MatrixXd::Zero(3, 3)).psd);
    CHECK(check_order(c * g + h, Eigen::MatrixXd::Zero(3, 3)).psd);
  }
  CHECK(norm_bound(Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity()) ==
        doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("largest lower form bound via bisection") {
  const double pi = 3.14159265358979323846;
  const ModelSpace t = ModelSpace::torus({2 * pi, 2 * pi}, 2 * pi / 8);
  std::vector<int> all(t.node_count());
  for (int v = 0; v < t.node_count(); ++v) all[v] = v;

  const auto make_uniform = [](const Eigen::Matrix2d& m, bool semi) {
    return StratifiedMetricField::uniform(2, m, semi);
  };
  // conformal pairs: lambda = sqrt(a / b)
  const auto ga = make_uniform(4 * Eigen::Matrix2d::Identity(), false);
  const auto gb = make_uniform(Eigen::Matrix2d::Identity(), false);
  CHECK(lambda_sup(ga, gb, t, all) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(lambda_sup(gb, ga, t, all) == doctest::Approx(0.5).epsilon(1e-6));

  // shrinking fiber against its degenerate limit: the base direction rules
  Eigen::Matrix2d shrink, limit;
  shrink << 1, 0, 0, 1.0 / 256;
  limit << 1, 0, 0, 0;
  CHECK(lambda_sup(make_uniform(shrink, false), make_uniform(limit, true), t, all) ==
        doctest::Approx(1.0).epsilon(1e-6));

  // vanishing reference: unbounded
  CHECK(std::isinf(
      lambda_sup(gb, make_uniform(Eigen::Matrix2d::Zero(), true), t, all)));

  // sheared family: the bound decays like 1/sqrt(mu)
  for (const double mu : {4.0, 16.0, 64.0}) {
    const auto gmu = preset_counterexample(mu);
    const auto ginf = preset_counterexample_limit();
    CHECK(lambda_sup(gmu, ginf, t, all) ==
          doctest::Approx(1.0 / std::sqrt(mu)).epsilon(1e-6));
  }
}

TEST_CASE("quasinorm axiom sampling") {
  const auto euclid = [](const Eigen::VectorXd& v) { return v.norm(); };
  const QuasinormReport ok = quasinorm_axioms(euclid, 2, 64);
  CHECK(ok.positivity_violations == 0);
  CHECK(ok.max_homogeneity_residual <= 1e-12);
  CHECK(ok.modulus_k <= 1 + 1e-12);
  CHECK(ok.min_unit_value == doctest::Approx(1.0));
  CHECK(ok.samples > 0);

  const auto shifted = [](const Eigen::VectorXd& v) { return v.norm() + 1.0; };
  CHECK(quasinorm_axioms(shifted, 2, 64).max_homogeneity_residual > 0.1);

  // directions where the evaluator exactly vanishes count as violations
  const auto degenerate = [](const Eigen::VectorXd& v) {
    return std::max(std::abs(v[0]) - 0.5, 0.0);
  };
  CHECK(quasinorm_axioms(degenerate, 2, 64).positivity_violations > 0);

  // a negative value is an evaluator bug and fails loudly
  const auto broken = [](const Eigen::VectorXd& v) { return v[0]; };
  CHECK_THROWS_AS(quasinorm_axioms(broken, 2, 64), check_error);
}

TEST_CASE("fiberwise minimum matches the closed form on the three-torus") {
  for (const double lambda : {3.0, 7.0}) {
    const T3Setup t3 = make_t3(lambda, 4, 16);
    const auto closed = [lambda](double a, double b) {
      return std::sqrt(a * a + b * b + lambda * std::min(a * a, b * b));
    };
    const McLContext ctx = McLContext::make(
        std::make_shared<const DiscreteFibration>(t3.fib), t3.field);
    for (int i = 0; i < 32; ++i) {
      const double th = 2 * 3.14159265358979323846 * i / 32;
      const Eigen::Vector2d u(std::cos(th), std::sin(th));
      CHECK(ctx.eval(0, u) == doctest::Approx(closed(u[0], u[1])).epsilon(1e-9));
      CHECK(eval_mcL(t3.fib, *t3.field, 0, u) ==
            doctest::Approx(closed(u[0], u[1])).epsilon(1e-9));
    }
    // scaling
    CHECK(ctx.eval(0, Eigen::Vector2d(3, 0)) == doctest::Approx(3.0));
    CHECK(ctx.eval(0, Eigen::Vector2d::Zero()) == 0.0);
  }
}

TEST_CASE("per-node lift values bracket the fiberwise minimum") {
  const double lambda = 7;
  const T3Setup t3 = make_t3(lambda, 4, 16);
  const McLContext ctx =
      McLContext::make(std::make_shared<const DiscreteFibration>(t3.fib), t3.field);
  const Eigen::Vector2d u(1, 0);
  double best = std::numeric_limits<double>::infinity();
  for (int x : t3.fib.fibers[0]) {
    const double v = ctx.minimal_lift_value(x, u);
    best = std::min(best, v);
    // without any kernel move the chord can only be more expensive
    CHECK(ctx.value_with_lift(x, u, Eigen::VectorXd::Zero(1)) >= v - 1e-12);
  }
  CHECK(best == doctest::Approx(ctx.eval(0, u)));
  // at the alpha = 0 node the base form is diag(1 + lambda, 1)
  const int x0 = t3.fib.fibers[0].front();
  CHECK(ctx.minimal_lift_value(x0, Eigen::Vector2d(1, 0)) ==
        doctest::Approx(std::sqrt(1 + lambda)));
  CHECK(ctx.minimal_lift_value(x0, Eigen::Vector2d(0, 1)) == doctest::Approx(1.0));
}

TEST_CASE("quasi-finsler diagnostics on the three-torus") {
  const double lambda = 7;
  const T3Setup t3 = make_t3(lambda, 4, 16);
  const QuasiFinslerField qf = build_quasifinsler(
      std::make_shared<const DiscreteFibration>(t3.fib), t3.field, t3.reference);
  CHECK(qf.axioms.positivity_violations == 0);
  CHECK(qf.axioms.max_homogeneity_residual <= 1e-9);
  // the axis pair alone forces k >= sqrt(lambda + 2) / 2 = 1.5; slightly
  // tilted pairs do a little better, topping out near 1.591 for lambda = 7
  CHECK(qf.modulus_k >= std::sqrt(lambda + 2) / 2 - 1e-9);
  CHECK(qf.modulus_k <= 1.75);
  CHECK(qf.envelope_c >= 1.0);
  CHECK(qf.eval(0, Eigen::Vector2d(1, 1)) == doctest::Approx(std::sqrt(lambda + 2)));
}

TEST_CASE("tangency guards on a base with boundary strata") {
  // shrinking pillowcase: the induced structure lives on the base interval
  const CollapseScenario s = make_pillowcase_scenario(2 * 3.14159265358979323846 / 16);
  const QuasiFinslerField qf = build_quasifinsler(
      std::make_shared<const DiscreteFibration>(s.fib), s.g_inf, preset_flat(1));
  const int interior = s.base->node_count() / 2;
  CHECK(qf.ctx->base_axis_tangent(interior, 0));
  CHECK_FALSE(qf.ctx->base_axis_tangent(0, 0));  // endpoint stratum is a point
  const Eigen::VectorXd e1 = Eigen::VectorXd::Ones(1);
  CHECK(qf.eval(interior, e1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(qf.eval(0, e1), config_error);
}

TEST_CASE("field accessors") {
  Eigen::Matrix2d m;
  m << 2, 1, 1, 2;
  const auto f = StratifiedMetricField::uniform(2, m, false);
  CHECK(f.strata() == 1);
  CHECK(f.at(Eigen::Vector2d(0.3, 0.7)).isApprox(m));
  CHECK_FALSE(f.semi);

  const auto fn = StratifiedMetricField::uniform_fn(
      1,
      [](const Eigen::VectorXd& p) {
        return Eigen::MatrixXd::Constant(1, 1, 1 + p[0] * p[0]);
      },
      false);
  CHECK(fn.at(Eigen::VectorXd::Constant(1, 2.0))(0, 0) == doctest::Approx(5.0));
}
