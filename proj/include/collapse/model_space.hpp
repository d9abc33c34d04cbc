// Discrete model spaces: grids on tori and on global finite quotients of
// tori/patches, with per-node orbifold group tags, stratifications by tag,
// and fibrations (coordinate projections) onto lower-dimensional models.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "collapse/common.hpp"

namespace collapse {

enum class OrbifoldTag : uint8_t { trivial = 0, z2 = 1, z2xz2 = 2 };
const char* tag_name(OrbifoldTag t);

// How raw grid points are identified: not at all, by the global point
// reflection x ~ -x, or by independent reflections in every axis.
enum class Identification : uint8_t { none, antipodal, axis_reflections };

class ModelSpace {
 public:
  struct Axis {
    int count = 0;        // number of grid indices
    bool periodic = true;
    int lo = 0;           // least index (negative for symmetric patches)
    double step = 0;      // grid spacing
  };

  // Torus with the given periods, uniform spacing h (must divide each period).
  static ModelSpace torus(const std::vector<double>& periods, double h);
  // Torus with an explicit per-axis subdivision count.
  static ModelSpace torus_counts(const std::vector<double>& periods,
                                 const std::vector<int>& counts);
  // 2-torus of period 2*pi modulo the point reflection; h must divide pi.
  static ModelSpace pillowcase_total(double h);
  // Circle of the given period modulo reflection: an interval [0, period/2]
  // whose endpoint nodes carry a Z/2 tag.
  static ModelSpace interval_orbifold(double period, double h);
  // Symmetric patch [-L_a, L_a]^d modulo reflections in all axes.
  static ModelSpace quadrant(const std::vector<double>& extents, double h);

  int dim() const { return static_cast<int>(axes_.size()); }
  int node_count() const { return static_cast<int>(node_raw_.size()); }
  const Axis& axis(int a) const { return axes_[a]; }
  Identification identification() const { return ident_; }
  double max_step() const;

  Eigen::VectorXd coord(int node) const;
  std::vector<int> index_of(int node) const;
  OrbifoldTag tag(int node) const { return tags_[node]; }

  // Canonical node for an arbitrary index tuple (wraps periodic axes, then
  // maps to the lexicographically least orbit representative); -1 off-grid.
  int node_from_index(std::span<const int> idx) const;
  int neighbor(int node, std::span<const int> offset) const;

  // Geometric step for an index offset, in chart coordinates of the cover.
  Eigen::VectorXd displacement(std::span<const int> offset) const;
  // Wraps a chart point into the fundamental periods (identifications are
  // not applied; fields are expected to be invariant under them).
  Eigen::VectorXd wrap(Eigen::VectorXd p) const;

 private:
  std::vector<Axis> axes_;
  Identification ident_ = Identification::none;
  std::vector<uint8_t> group_;  // axis-negation bitmasks; element 0 is identity
  std::vector<int> canon_;      // raw linear index -> node id
  std::vector<int> node_raw_;   // node id -> raw linear index of its least rep
  std::vector<OrbifoldTag> tags_;

  static ModelSpace build(std::vector<Axis> axes, Identification ident);
  int raw_linear(std::span<const int> norm) const;
  std::vector<int> raw_to_norm(int raw) const;
  bool negate_norm(std::vector<int>& norm, uint8_t mask) const;
};

struct StratificationLabel {
  std::vector<int> label;                  // node -> stratum id
  int count = 0;
  std::vector<std::vector<int>> frontier;  // stratum -> sorted adjacent strata
};

// Connected components of constant orbifold tag, using axis adjacency.
StratificationLabel canonical_stratification(const ModelSpace& m);

// A surjection onto a base model whose fibers partition the total space.
struct DiscreteFibration {
  std::shared_ptr<const ModelSpace> total, base;
  std::vector<int> proj;                  // total node -> base node
  std::vector<std::vector<int>> fibers;   // base node -> sorted total nodes
  std::vector<int> base_axes, fiber_axes;
};

// Projection onto the first n_base_axes coordinates; those axes of the two
// models must agree exactly.
DiscreteFibration product_fibration(std::shared_ptr<const ModelSpace> total,
                                    std::shared_ptr<const ModelSpace> base, int n_base_axes);

// Structural checks; with base strata also checks that fiber cardinality is
// constant across base nodes sharing a stratum and a tag.
void validate_fibration(const DiscreteFibration& fib,
                        const StratificationLabel* base_strata = nullptr);

// Strata of the total space: connected components of constant
// (base stratum of the projected node, orbifold tag), using axis adjacency.
// Components merge across base nodes inside one base stratum.
StratificationLabel induced_stratification(const DiscreteFibration& fib,
                                           const StratificationLabel& base_strata);

// Fiber nodes having exactly one distinct same-fiber neighbor along fiber
// axes; detects interval ends (circles yield none).
std::vector<int> fiber_endpoint_nodes(const DiscreteFibration& fib, int base_node);

struct Pillowcase {
  std::shared_ptr<const ModelSpace> total, base;
  DiscreteFibration fib;
};
Pillowcase make_pillowcase(double h);

// CSV rows: node, stratum, tag, coordinates...
void write_stratification_csv(const ModelSpace& m, const StratificationLabel& s,
                              std::ostream& os);

}  // namespace collapse
