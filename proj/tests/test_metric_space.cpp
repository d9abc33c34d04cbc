#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "collapse/metric_space.hpp"
#include "oracles.hpp"

using namespace collapse;

TEST_CASE("construction and indexing") {
  // 3 points on a line: 0, 1, 3.
  const std::vector<double> upper = {1, 3, 2};
  const SemiMetricSpace s = SemiMetricSpace::from_upper(3, upper);
  CHECK(s.size() == 3);
  CHECK(s(0, 0) == 0);
  CHECK(s(0, 1) == doctest::Approx(1));
  CHECK(s(1, 0) == doctest::Approx(1));
  CHECK(s(0, 2) == doctest::Approx(3));
  CHECK(s(2, 1) == doctest::Approx(2));
  CHECK(s.diameter() == doctest::Approx(3));

  const std::vector<double> full = {0, 1, 3, 1, 0, 2, 3, 2, 0};
  const SemiMetricSpace s2 = SemiMetricSpace::from_full(3, full);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(s2(i, j) == doctest::Approx(s(i, j)));
}

TEST_CASE("axiom violations are rejected") {
  CHECK_THROWS_AS(SemiMetricSpace::from_upper(3, {1, 3, -2}), check_error);
  // triangle: d(0,2) = 10 > 1 + 2
  CHECK_THROWS_AS(SemiMetricSpace::from_upper(3, {1, 10, 2}), check_error);
  // asymmetric full matrix
  CHECK_THROWS_AS(SemiMetricSpace::from_full(2, {0, 1, 2, 0}), check_error);
  // nonzero diagonal
  CHECK_THROWS_AS(SemiMetricSpace::from_full(2, {0.5, 1, 1, 0}), check_error);
  // violations inside the slack are tolerated
  const double tiny = 0.5 * kMetricSlack;
  const SemiMetricSpace ok = SemiMetricSpace::from_upper(3, {1, 2 + tiny, 1});
  CHECK(ok(0, 2) == doctest::Approx(2 + tiny));
}

TEST_CASE("zero distances are allowed (semi-metric)") {
  const SemiMetricSpace s = SemiMetricSpace::from_upper(3, {0, 1, 1});
  CHECK(s(0, 1) == 0);
  CHECK(s.diameter() == doctest::Approx(1));
}

TEST_CASE("hausdorff distance matches the definition") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const int n = uniform_int(rng, 5, 12);
    const SemiMetricSpace s = testutil::random_cloud_space(rng, n);
    std::vector<int> a, b;
    for (int i = 0; i < n; ++i) {
      if (uniform(rng, 0.0, 1.0) < 0.5) a.push_back(i);
      if (uniform(rng, 0.0, 1.0) < 0.5) b.push_back(i);
    }
    if (a.empty()) a.push_back(0);
    if (b.empty()) b.push_back(n - 1);
    CHECK(hausdorff_distance(s, a, b) ==
          doctest::Approx(testutil::brute_hausdorff(s, a, b)).epsilon(1e-12));
  }
}

TEST_CASE("hausdorff basics") {
  Rng rng(3);
  const SemiMetricSpace s = testutil::random_cloud_space(rng, 6);
  const std::vector<int> a = {0, 2, 4};
  CHECK(hausdorff_distance(s, a, a) == 0);
  const std::vector<int> b = {1, 3};
  CHECK(hausdorff_distance(s, a, b) == doctest::Approx(hausdorff_distance(s, b, a)));
  CHECK_THROWS_AS(hausdorff_distance(s, {}, b), config_error);
}

TEST_CASE("discrepancy of the identity is zero") {
  Rng rng(11);
  const SemiMetricSpace s = testutil::random_cloud_space(rng, 8);
  CorrespondenceMap id;
  id.target_size = 8;
  for (int i = 0; i < 8; ++i) id.to.push_back(i);
  const DiscrepancyReport rep = discrepancy(id, s, s);
  CHECK(rep.distortion == 0);
  CHECK(rep.net_defect == 0);
  CHECK(rep.epsilon == 0);
  CHECK(rep.gh_upper == 0);
}

TEST_CASE("discrepancy matches the definition") {
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    const int na = uniform_int(rng, 4, 9), nb = uniform_int(rng, 4, 9);
    const SemiMetricSpace x = testutil::random_cloud_space(rng, na);
    const SemiMetricSpace y = testutil::random_cloud_space(rng, nb);
    const CorrespondenceMap f = testutil::random_map(rng, na, nb);
    const DiscrepancyReport rep = discrepancy(f, x, y);
    CHECK(rep.distortion == doctest::Approx(testutil::brute_distortion(f, x, y)).epsilon(1e-12));
    CHECK(rep.net_defect == doctest::Approx(testutil::brute_net_defect(f, y)).epsilon(1e-12));
    CHECK(rep.epsilon == doctest::Approx(std::max(rep.distortion, rep.net_defect)));
    CHECK(rep.gh_upper == doctest::Approx(2 * rep.epsilon));
  }
}

TEST_CASE("composition bound holds on random data") {
  Rng rng(17);
  for (int t = 0; t < 100; ++t) {
    const int na = uniform_int(rng, 4, 9), nb = uniform_int(rng, 4, 9),
              nc = uniform_int(rng, 4, 9);
    const SemiMetricSpace x = testutil::random_cloud_space(rng, na);
    const SemiMetricSpace y = testutil::random_cloud_space(rng, nb);
    const SemiMetricSpace z = testutil::random_cloud_space(rng, nc);
    const CorrespondenceMap f = testutil::random_map(rng, na, nb);
    const CorrespondenceMap fp = testutil::random_map(rng, nb, nc);
    const DiscrepancyReport rf = discrepancy(f, x, y);
    const DiscrepancyReport rp = discrepancy(fp, y, z);
    const DiscrepancyReport rc = compose_discrepancy(f, fp, x, y, z);
    CHECK(rc.epsilon <= rf.epsilon + 2 * rp.epsilon + 1e-12);
  }
}

TEST_CASE("free quotient merges exactly the zero classes") {
  Rng rng(19);
  for (int t = 0; t < 30; ++t) {
    const int k = uniform_int(rng, 3, 6);
    const auto pts = testutil::random_cloud(rng, k, 10.0);
    std::vector<Eigen::Vector3d> blown;
    std::vector<int> truth;
    for (int c = 0; c < k; ++c) {
      const int reps = uniform_int(rng, 1, 3);
      for (int i = 0; i < reps; ++i) {
        blown.push_back(pts[c]);
        truth.push_back(c);
      }
    }
    const SemiMetricSpace space = testutil::space_of_cloud(blown);
    const QuotientResult q = free_quotient(space, 0.0);
    REQUIRE(q.quotient.size() == k);
    // same class iff same source point
    for (size_t i = 0; i < truth.size(); ++i)
      for (size_t j = 0; j < truth.size(); ++j)
        CHECK((q.projection[i] == q.projection[j]) == (truth[i] == truth[j]));
    // class distance equals the distance of representatives
    for (int i = 0; i < k; ++i) {
      CHECK(q.representative[i] >= 0);
      for (int j = 0; j < k; ++j)
        CHECK(q.quotient(i, j) ==
              doctest::Approx(space(q.representative[i], q.representative[j])));
    }
    // idempotent
    CHECK(free_quotient(q.quotient, 0.0).quotient.size() == k);
  }
}

TEST_CASE("free quotient single-linkage merging at positive tolerance") {
  // 0 -- 0.5 -- 1.0 -- 5.0: tol 0.6 chains the first three together.
  const SemiMetricSpace s =
      SemiMetricSpace::from_upper(4, {0.5, 1.0, 5.0, 0.5, 4.5, 4.0});
  const QuotientResult q = free_quotient(s, 0.6);
  CHECK(q.quotient.size() == 2);
  CHECK(q.projection[0] == q.projection[1]);
  CHECK(q.projection[1] == q.projection[2]);
  CHECK(q.projection[3] != q.projection[0]);
  CHECK(q.representative[q.projection[0]] == 0);
  CHECK(q.quotient(q.projection[0], q.projection[3]) == doctest::Approx(4.0));
}

TEST_CASE("min discrepancy search picks the best candidate") {
  Rng rng(23);
  const SemiMetricSpace x = testutil::random_cloud_space(rng, 6);
  const SemiMetricSpace y = testutil::random_cloud_space(rng, 6);
  std::vector<CorrespondenceMap> cands;
  for (int c = 0; c < 8; ++c) cands.push_back(testutil::random_map(rng, 6, 6));
  const DiscrepancyReport best = min_discrepancy_search(x, y, cands);
  REQUIRE(best.winner >= 0);
  REQUIRE(best.winner < 8);
  for (int c = 0; c < 8; ++c) {
    const DiscrepancyReport rep = discrepancy(cands[c], x, y);
    CHECK(best.epsilon <= rep.epsilon + 1e-15);
  }
  CHECK(best.epsilon == doctest::Approx(discrepancy(cands[best.winner], x, y).epsilon));
}

TEST_CASE("json round trip and csv output") {
  Rng rng(29);
  const SemiMetricSpace s = testutil::random_cloud_space(rng, 5);
  const SemiMetricSpace back = SemiMetricSpace::from_json(s.to_json());
  REQUIRE(back.size() == s.size());
  for (int i = 0; i < s.size(); ++i)
    for (int j = 0; j < s.size(); ++j) CHECK(back(i, j) == s(i, j));

  std::ostringstream a, b;
  s.write_csv(a);
  s.write_csv(b);
  CHECK(a.str() == b.str());  // byte-identical on repeat
  CHECK(a.str().find(',') != std::string::npos);
}
