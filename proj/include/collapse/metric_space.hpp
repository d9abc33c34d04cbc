// Finite semi-metric spaces and Gromov--Hausdorff style comparison tools.
//
// A SemiMetricSpace is a finite point set with a symmetric, nonnegative
// distance matrix obeying the triangle inequality; distinct points at
// distance zero are allowed.  On top of that sit Hausdorff distance between
// subsets, the forwards discrepancy of a map between two spaces (the least
// eps for which the map is an eps-isometry), composition bounds, and metric
// quotients by the zero-distance (or a tolerance) relation.
#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "collapse/common.hpp"

namespace collapse {

// Comparison slack for all metric-axiom assertions.
inline constexpr double kMetricSlack = 1e-9;

class SemiMetricSpace {
 public:
  SemiMetricSpace() = default;

  // Builds from a full row-major n*n matrix. Checks symmetry, zero diagonal,
  // nonnegativity and the triangle inequality (within kMetricSlack).
  static SemiMetricSpace from_full(int n, const std::vector<double>& full);

  // Builds from the strict upper triangle, row-major: (0,1),(0,2),...,(n-2,n-1).
  static SemiMetricSpace from_upper(int n, std::vector<double> upper);

  int size() const { return n_; }

  double operator()(int i, int j) const {
    if (i == j) return 0.0;
    if (i > j) std::swap(i, j);
    return upper_[static_cast<size_t>(i) * (2 * n_ - i - 1) / 2 + (j - i - 1)];
  }

  double diameter() const;

  // JSON form: {"n": int, "dist": strict upper triangle, row-major}.
  nlohmann::json to_json() const;
  static SemiMetricSpace from_json(const nlohmann::json& j);

  // Full matrix, one row per line, comma separated.
  void write_csv(std::ostream& os) const;

 private:
  int n_ = 0;
  std::vector<double> upper_;

  void validate() const;
};

// A map between the index sets of two finite spaces.
struct CorrespondenceMap {
  std::vector<int> to;  // to[i] = image of source point i
  int target_size = 0;
};

struct DiscrepancyReport {
  double distortion = 0;  // max |d'(f x, f y) - d(x, y)|
  double net_defect = 0;  // max over targets of distance to the image set
  double epsilon = 0;     // max(distortion, net_defect): least eps-isometry eps
  double gh_upper = 0;    // 2 * epsilon, an upper bound for the GH distance
  int winner = -1;        // index of the best candidate (search ops only)
};

// Hausdorff distance between two nonempty subsets of one ambient space.
double hausdorff_distance(const SemiMetricSpace& ambient, std::span<const int> a,
                          std::span<const int> b);

// Forwards discrepancy of f : X -> X'.
DiscrepancyReport discrepancy(const CorrespondenceMap& f, const SemiMetricSpace& x,
                              const SemiMetricSpace& xp);

// Discrepancy of f' o f with the two-stage bound checked:
// epsilon(f' o f) <= epsilon(f) + 2 epsilon(f').
DiscrepancyReport compose_discrepancy(const CorrespondenceMap& f, const CorrespondenceMap& fp,
                                      const SemiMetricSpace& x, const SemiMetricSpace& xp,
                                      const SemiMetricSpace& xpp);

struct QuotientResult {
  SemiMetricSpace quotient;
  std::vector<int> projection;      // original point -> class id
  std::vector<int> representative;  // class id -> least original point
};

// Quotient by single-linkage classes of the relation d <= tol; class distance
// is the min over member pairs.  For tol = 0 this is the free metric space of
// X.  Fails loudly (check_error) if the quotient violates the triangle
// inequality, which can happen for tol > 0.
QuotientResult free_quotient(const SemiMetricSpace& x, double tol);

// Evaluates every candidate map and returns the report of the best one
// (least epsilon; first wins ties), with `winner` set.
DiscrepancyReport min_discrepancy_search(const SemiMetricSpace& x, const SemiMetricSpace& xp,
                                         const std::vector<CorrespondenceMap>& candidates);

}  // namespace collapse
