// Stratified Riemannian (semi-)metric fields on model spaces, partial-order
// and norm comparisons of symmetric forms, quasinorm diagnostics, and the
// quasi-Finslerian length evaluator induced on the base of a fibration:
//
//   L(b, u) = min over total-space strata meeting the fiber over b,
//             min over fiber nodes x in that stratum,
//             min over lifts u' of u tangent to the stratum at x
//             of sqrt(g(x)(u', u')),
//
// where the inner minimum over lifts u' = u0 + w, w in the fiber kernel, is a
// closed-form quadratic minimization.  For fields vanishing on the fiber
// directions every lift gives the same value.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "collapse/model_space.hpp"

namespace collapse {

using MatFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// A metric field given per stratum, with continuous extensions defined
// everywhere.  `stratum_of` classifies arbitrary chart points; `tangential`
// and `extension` agree on each stratum's own points.
struct StratifiedMetricField {
  int dim = 0;
  bool semi = false;     // semi-metric: a nontrivial kernel is allowed
  bool regular = false;  // vanishes exactly on the declared kernel distribution
  std::function<int(const Eigen::VectorXd&)> stratum_of;  // -> [0, strata())
  std::vector<MatFn> tangential;
  std::vector<MatFn> extension;
  std::optional<MatFn> kernel;  // columns span the kernel distribution

  int strata() const { return static_cast<int>(extension.size()); }
  Eigen::MatrixXd at(const Eigen::VectorXd& p) const;  // extension in p's stratum

  // One-stratum field with a constant form.
  static StratifiedMetricField uniform(int dim, const Eigen::MatrixXd& g, bool semi,
                                       bool regular = false,
                                       std::optional<Eigen::MatrixXd> kernel_basis = {});
  // One-stratum field with a position-dependent form.
  static StratifiedMetricField uniform_fn(int dim, MatFn g, bool semi, bool regular = false,
                                          std::optional<MatFn> kernel_basis = {});
};

struct PSDReport {
  double min_eigenvalue = 0;
  bool psd = false;          // min eigenvalue >= -kPsdSlack
  Eigen::VectorXd witness;   // eigenvector of the least eigenvalue if not psd
};

inline constexpr double kPsdSlack = 1e-10;

// Is g >= h in the form order?  Reports the least eigenvalue of g - h.
PSDReport check_order(const Eigen::MatrixXd& g, const Eigen::MatrixXd& h);

// Least c with -c g <= h <= c g: the Frobenius norm of h written in a
// g-orthonormal frame (g must be positive definite).
double norm_bound(const Eigen::MatrixXd& h, const Eigen::MatrixXd& g);

// Largest L >= 0 with g_mu(p) >= L^2 g_inf(p) at every region node and every
// stratum, by bisection (40 iterations on [0, 2 * max eigenvalue ratio]).
// Returns +infinity when g_inf vanishes identically on the region.
double lambda_sup(const StratifiedMetricField& g_mu, const StratifiedMetricField& g_inf,
                  const ModelSpace& model, std::span<const int> region);

struct QuasinormReport {
  int positivity_violations = 0;
  double max_homogeneity_residual = 0;
  double modulus_k = 0;  // max L(a+b) / (L(a)+L(b)) over sampled pairs
  Eigen::VectorXd worst_pair_a, worst_pair_b;
  double min_unit_value = 0;
  int samples = 0;
};

// Samples unit directions (2 in 1D, `samples` on the circle/sphere in 2D/3D)
// and sweeps all pairs; homogeneity is probed with a fixed factor list.
QuasinormReport quasinorm_axioms(const std::function<double(const Eigen::VectorXd&)>& L,
                                 int dim, int samples);

// Precomputed per-node data for the fiberwise evaluator: the form of each
// node's stratum at the node, its products with the kernel directions, and
// the tangency pattern of each stratum (the axes along which it extends).
class McLContext {
 public:
  static McLContext make(std::shared_ptr<const DiscreteFibration> fib,
                         std::shared_ptr<const StratifiedMetricField> field,
                         std::optional<StratificationLabel> total_strata = {});

  const DiscreteFibration& fib() const { return *fib_; }
  const StratifiedMetricField& field() const { return *field_; }
  const StratificationLabel& strata() const { return strata_; }

  // L(b, u) for u tangent to the base stratum of b (config_error otherwise;
  // u is in base chart coordinates).  Exactly homogeneous by construction.
  double eval(int base_node, const Eigen::VectorXd& u) const;

  // Inner value at one fiber node for one explicit kernel coefficient vector;
  // used by the lift-independence diagnostics.
  double value_with_lift(int total_node, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& kernel_coeffs) const;

  // sqrt of the kernel-minimized form of one total node applied to a base
  // vector (no tangency constraints); the per-node ingredient of eval.
  double minimal_lift_value(int total_node, const Eigen::VectorXd& u) const;

  bool stratum_tangent_axis(int stratum, int axis) const {
    return tangent_axes_[stratum][axis];
  }

 private:
  std::shared_ptr<const DiscreteFibration> fib_;
  std::shared_ptr<const StratifiedMetricField> field_;
  StratificationLabel strata_;                    // node-level strata of the total space
  StratificationLabel base_strata_;               // node-level strata of the base
  std::vector<std::vector<char>> tangent_axes_;   // total stratum -> axis -> tangent?
  std::vector<std::vector<char>> base_tangent_;   // base stratum -> base axis -> tangent?
  int d_ = 0, nb_ = 0, m_ = 0;   // ambient dim, #base axes, #fiber axes
  std::vector<double> G_;        // node -> d*d form (row-major)
  std::vector<double> Rb_;       // node -> nb*nb kernel-minimized form on base axes
  std::vector<std::uint32_t> base_feasible_;  // total stratum -> tangent-base-axis bitmask
  std::vector<char> kernel_free_;             // node -> |G K| ~ 0 (lift-independent)

  double eval_unit(int base_node, const Eigen::VectorXd& u) const;

 public:
  const StratificationLabel& base_strata() const { return base_strata_; }
  bool base_axis_tangent(int base_node, int axis) const {
    return base_tangent_[base_strata_.label[base_node]][axis];
  }
};

// Convenience wrapper building a throwaway context (prefer McLContext::make
// and repeated eval for hot loops).
double eval_mcL(const DiscreteFibration& fib, const StratifiedMetricField& field, int base_node,
                const Eigen::VectorXd& u);

// The induced length structure on the base, with sampled diagnostics.
struct QuasiFinslerField {
  std::shared_ptr<McLContext> ctx;
  StratificationLabel base_strata;
  double modulus_k = 1;           // worst sampled relaxed-triangle factor
  double envelope_c = 1;          // (1/C)|u|_h <= L <= C|u|_h on samples
  QuasinormReport axioms;         // from the largest-dimensional base stratum

  double eval(int base_node, const Eigen::VectorXd& u) const { return ctx->eval(base_node, u); }
};

// Builds the evaluator and samples k (quasinorm modulus) and the envelope
// constant against `reference` (a positive-definite field on the base),
// including nodes on stratum frontiers.  `samples`: directions per node.
QuasiFinslerField build_quasifinsler(std::shared_ptr<const DiscreteFibration> fib,
                                     std::shared_ptr<const StratifiedMetricField> field,
                                     const StratifiedMetricField& reference, int samples = 0);

}  // namespace collapse
