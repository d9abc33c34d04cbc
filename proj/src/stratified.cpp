#include "collapse/stratified.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "collapse/common.hpp"

namespace collapse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

void require_symmetric(const Eigen::MatrixXd& m, const char* what) {
  require(m.rows() == m.cols(), std::string(what) + ": matrix not square");
  if (m.rows() == 0) return;
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          std::string(what) + ": matrix not symmetric");
}

// Pseudo-inverse of a small symmetric PSD matrix (eigenvalue thresholding).
Eigen::MatrixXd psd_pinv(const Eigen::MatrixXd& a) {
  if (a.rows() == 0) return a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const double cut = 1e-12 * std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd inv = es.eigenvalues();
  for (int i = 0; i < inv.size(); ++i) inv[i] = inv[i] > cut ? 1.0 / inv[i] : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

// Deterministic unit direction sample: signs in 1D, an even angle grid in 2D,
// a Fibonacci sphere in 3D, seeded Gaussian directions beyond.
std::vector<Eigen::VectorXd> unit_directions(int dim, int samples) {
  std::vector<Eigen::VectorXd> dirs;
  if (dim == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
  } else if (dim == 2) {
    dirs.reserve(samples);
    for (int t = 0; t < samples; ++t) {
      const double th = 2.0 * std::numbers::pi * t / samples;
      Eigen::VectorXd v(2);
      v << std::cos(th), std::sin(th);
      dirs.push_back(std::move(v));
    }
  } else if (dim == 3) {
    dirs.reserve(samples);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int t = 0; t < samples; ++t) {
      const double z = 1.0 - 2.0 * (t + 0.5) / samples;
      const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
      Eigen::VectorXd v(3);
      v << rad * std::cos(golden * t), rad * std::sin(golden * t), z;
      dirs.push_back(std::move(v));
    }
  } else {
    Rng rng(0x51c0deULL);
    std::normal_distribution<double> nd;
    dirs.reserve(samples);
    while (static_cast<int>(dirs.size()) < samples) {
      Eigen::VectorXd v(dim);
      for (int i = 0; i < dim; ++i) v[i] = nd(rng);
      const double n = v.norm();
      if (n > 1e-3) dirs.push_back(v / n);
    }
  }
  return dirs;
}

// Per-stratum axis tangency: axis a is tangent to a stratum when some node of
// the stratum has a distinct +-1 neighbor along a with the same label.
std::vector<std::vector<char>> stratum_tangency(const ModelSpace& m,
                                                const StratificationLabel& s) {
  std::vector<std::vector<char>> tang(s.count, std::vector<char>(m.dim(), 0));
  std::vector<int> off(m.dim(), 0);
  for (int node = 0; node < m.node_count(); ++node) {
    const int lab = s.label[node];
    for (int a = 0; a < m.dim(); ++a) {
      if (tang[lab][a]) continue;
      for (int sgn : {-1, 1}) {
        off[a] = sgn;
        const int nb = m.neighbor(node, off);
        if (nb >= 0 && nb != node && s.label[nb] == lab) tang[lab][a] = 1;
      }
      off[a] = 0;
    }
  }
  return tang;
}

}  // namespace

Eigen::MatrixXd StratifiedMetricField::at(const Eigen::VectorXd& p) const {
  require(static_cast<bool>(stratum_of), "metric field: missing stratum classifier");
  const int s = stratum_of(p);
  require(s >= 0 && s < strata(), "metric field: point classified outside declared strata");
  return extension[static_cast<size_t>(s)](p);
}

StratifiedMetricField StratifiedMetricField::uniform_fn(int dim, MatFn g, bool semi, bool regular,
                                                        std::optional<MatFn> kernel_basis) {
  require(dim >= 1, "uniform field: dimension must be positive");
  require(static_cast<bool>(g), "uniform field: null form function");
  StratifiedMetricField f;
  f.dim = dim;
  f.semi = semi;
  f.regular = regular;
  f.stratum_of = [](const Eigen::VectorXd&) { return 0; };
  f.tangential = {g};
  f.extension = {std::move(g)};
  f.kernel = std::move(kernel_basis);
  return f;
}

StratifiedMetricField StratifiedMetricField::uniform(int dim, const Eigen::MatrixXd& g, bool semi,
                                                     bool regular,
                                                     std::optional<Eigen::MatrixXd> kernel_basis) {
  require(g.rows() == dim && g.cols() == dim, "uniform field: form dimension mismatch");
  Eigen::MatrixXd gg = symmetrized(g);
  std::optional<MatFn> kfn;
  if (kernel_basis) kfn = [k = *kernel_basis](const Eigen::VectorXd&) { return k; };
  return uniform_fn(
      dim, [gg](const Eigen::VectorXd&) { return gg; }, semi, regular, std::move(kfn));
}

PSDReport check_order(const Eigen::MatrixXd& g, const Eigen::MatrixXd& h) {
  require(g.rows() == h.rows() && g.cols() == h.cols(), "check_order: dimension mismatch");
  require_symmetric(g, "check_order(g)");
  require_symmetric(h, "check_order(h)");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(g - h));
  PSDReport r;
  r.min_eigenvalue = es.eigenvalues()[0];  // ascending order
  r.psd = r.min_eigenvalue >= -kPsdSlack;
  r.witness = es.eigenvectors().col(0);
  return r;
}

double norm_bound(const Eigen::MatrixXd& h, const Eigen::MatrixXd& g) {
  require(g.rows() == h.rows() && g.cols() == h.cols(), "norm_bound: dimension mismatch");
  require_symmetric(h, "norm_bound(h)");
  require_symmetric(g, "norm_bound(g)");
  const Eigen::MatrixXd gs = symmetrized(g);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(gs);
  require(eg.eigenvalues()[0] > 0, "norm_bound: g is not positive-definite");
  Eigen::LLT<Eigen::MatrixXd> llt(gs);
  require(llt.info() == Eigen::Success, "norm_bound: g is not positive-definite");
  const auto lower = llt.matrixL();
  const Eigen::MatrixXd a = lower.solve(symmetrized(h));          // L^-1 h
  const Eigen::MatrixXd m = lower.solve(a.transpose()).transpose();  // L^-1 h L^-T
  const double c = m.norm();
  ensure(check_order(c * gs, symmetrized(h)).psd, "norm_bound: bound failed the order check");
  return c;
}

double lambda_sup(const StratifiedMetricField& g_mu, const StratifiedMetricField& g_inf,
                  const ModelSpace& model, std::span<const int> region) {
  require(!region.empty(), "lambda_sup: empty region");
  require(g_mu.strata() == g_inf.strata(), "lambda_sup: stratum count mismatch");
  require(g_mu.dim == model.dim() && g_inf.dim == model.dim(), "lambda_sup: dimension mismatch");

  std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> pairs;
  pairs.reserve(region.size() * static_cast<size_t>(g_mu.strata()));
  for (int node : region) {
    require(node >= 0 && node < model.node_count(), "lambda_sup: region node out of range");
    const Eigen::VectorXd p = model.coord(node);
    for (int s = 0; s < g_mu.strata(); ++s)
      pairs.emplace_back(symmetrized(g_mu.extension[s](p)), symmetrized(g_inf.extension[s](p)));
  }

  // Bracket: if g_mu >= L^2 g_inf then testing the top eigenvector of g_inf
  // gives L^2 <= max_eig(g_mu) / max_eig(g_inf) for every constrained pair.
  double hi = kInf;
  for (const auto& [gm, gi] : pairs) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(gm, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(gi, Eigen::EigenvaluesOnly);
    const double mu_max = em.eigenvalues().maxCoeff();
    const double inf_max = ei.eigenvalues().maxCoeff();
    if (inf_max <= 1e-12 * std::max(1.0, std::abs(mu_max))) continue;  // no constraint
    hi = std::min(hi, 2.0 * std::sqrt(std::max(0.0, mu_max) / inf_max));
  }
  if (std::isinf(hi)) return hi;  // g_inf vanishes across the region
  if (hi <= 0) return 0.0;

  const auto feasible = [&pairs](double lam) {
    const double l2 = lam * lam;
    for (const auto& [gm, gi] : pairs) {
      const double scale =
          std::max({1e-300, gm.cwiseAbs().maxCoeff(), l2 * gi.cwiseAbs().maxCoeff()});
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gm - l2 * gi, Eigen::EigenvaluesOnly);
      if (es.eigenvalues()[0] < -1e-14 * scale) return false;
    }
    return true;
  };

  for (int grow = 0; grow < 60 && feasible(hi); ++grow) hi *= 2;
  double lo = 0.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

QuasinormReport quasinorm_axioms(const std::function<double(const Eigen::VectorXd&)>& L, int dim,
                                 int samples) {
  require(dim >= 1, "quasinorm_axioms: dimension must be positive");
  require(samples >= 2, "quasinorm_axioms: need at least 2 samples");

  const std::vector<Eigen::VectorXd> dirs = unit_directions(dim, samples);
  QuasinormReport rep;
  rep.samples = static_cast<int>(dirs.size());
  rep.min_unit_value = kInf;

  std::vector<double> val(dirs.size());
  for (size_t i = 0; i < dirs.size(); ++i) {
    val[i] = L(dirs[i]);
    ensure(!(val[i] < 0), "quasinorm evaluator returned a negative value");
    ensure(std::isfinite(val[i]), "quasinorm evaluator returned a non-finite value");
    if (val[i] <= 0) ++rep.positivity_violations;
    rep.min_unit_value = std::min(rep.min_unit_value, val[i]);
  }

  for (size_t i = 0; i < dirs.size(); ++i) {
    for (const double f : {0.5, -1.25, 3.0}) {
      const double got = L(f * dirs[i]);
      rep.max_homogeneity_residual =
          std::max(rep.max_homogeneity_residual, std::abs(got - std::abs(f) * val[i]));
    }
  }

  for (size_t i = 0; i < dirs.size(); ++i) {
    for (size_t j = i; j < dirs.size(); ++j) {
      const double denom = val[i] + val[j];
      if (denom <= 0) continue;
      const double ratio = L(dirs[i] + dirs[j]) / denom;
      if (ratio > rep.modulus_k) {
        rep.modulus_k = ratio;
        rep.worst_pair_a = dirs[i];
        rep.worst_pair_b = dirs[j];
      }
    }
  }
  return rep;
}

McLContext McLContext::make(std::shared_ptr<const DiscreteFibration> fib,
                            std::shared_ptr<const StratifiedMetricField> field,
                            std::optional<StratificationLabel> total_strata) {
  require(fib != nullptr && field != nullptr, "fiber evaluator: null inputs");
  McLContext ctx;
  ctx.fib_ = std::move(fib);
  ctx.field_ = std::move(field);
  const ModelSpace& total = *ctx.fib_->total;
  const ModelSpace& base = *ctx.fib_->base;
  require(ctx.field_->dim == total.dim(), "fiber evaluator: field/total dimension mismatch");

  ctx.d_ = total.dim();
  ctx.nb_ = static_cast<int>(ctx.fib_->base_axes.size());
  ctx.m_ = static_cast<int>(ctx.fib_->fiber_axes.size());
  require(ctx.nb_ == base.dim(), "fiber evaluator: base axis count mismatch");

  ctx.base_strata_ = canonical_stratification(base);
  ctx.strata_ = total_strata ? std::move(*total_strata)
                             : induced_stratification(*ctx.fib_, ctx.base_strata_);
  require(static_cast<int>(ctx.strata_.label.size()) == total.node_count(),
          "fiber evaluator: stratification size mismatch");

  ctx.tangent_axes_ = stratum_tangency(total, ctx.strata_);
  ctx.base_tangent_ = stratum_tangency(base, ctx.base_strata_);
  ctx.base_feasible_.assign(ctx.strata_.count, 0);
  for (int s = 0; s < ctx.strata_.count; ++s)
    for (int i = 0; i < ctx.nb_; ++i)
      if (ctx.tangent_axes_[s][ctx.fib_->base_axes[i]]) ctx.base_feasible_[s] |= (1u << i);

  const int n = total.node_count();
  ctx.G_.resize(static_cast<size_t>(n) * ctx.d_ * ctx.d_);
  ctx.Rb_.resize(static_cast<size_t>(n) * ctx.nb_ * ctx.nb_);
  ctx.kernel_free_.assign(n, 0);

  for (int x = 0; x < n; ++x) {
    const Eigen::VectorXd p = total.coord(x);
    const Eigen::MatrixXd g = symmetrized(ctx.field_->at(p));
    ensure(g.rows() == ctx.d_, "fiber evaluator: form dimension mismatch at a node");
    const double gscale = 1.0 + g.cwiseAbs().maxCoeff();

    if (ctx.field_->regular) {
      // A regular field pairs to zero with every fiber direction and stays
      // positive-definite transverse to them.
      for (const int f : ctx.fib_->fiber_axes)
        ensure(g.col(f).cwiseAbs().maxCoeff() <= 1e-12 * gscale,
               "regular field pairs nontrivially with a fiber direction");
      Eigen::MatrixXd bb(ctx.nb_, ctx.nb_);
      for (int i = 0; i < ctx.nb_; ++i)
        for (int j = 0; j < ctx.nb_; ++j)
          bb(i, j) = g(ctx.fib_->base_axes[i], ctx.fib_->base_axes[j]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(bb, Eigen::EigenvaluesOnly);
      ensure(eb.eigenvalues()[0] > 1e-12 * gscale,
             "regular field degenerates transverse to the fibers");
    }

    const int s = ctx.strata_.label[x];
    std::vector<int> tk;  // fiber axes tangent to this node's stratum
    for (const int f : ctx.fib_->fiber_axes)
      if (ctx.tangent_axes_[s][f]) tk.push_back(f);
    const int t = static_cast<int>(tk.size());

    Eigen::MatrixXd gk(ctx.d_, t), a(t, t);
    for (int i = 0; i < t; ++i) gk.col(i) = g.col(tk[i]);
    for (int i = 0; i < t; ++i)
      for (int j = 0; j < t; ++j) a(i, j) = g(tk[i], tk[j]);

    const bool kfree = t == 0 || gk.cwiseAbs().maxCoeff() <= 1e-12 * gscale;
    ctx.kernel_free_[x] = kfree ? 1 : 0;
    Eigen::MatrixXd r = g;
    if (!kfree) r -= gk * psd_pinv(a) * gk.transpose();  // Schur complement: minimized lift

    double* gdst = &ctx.G_[static_cast<size_t>(x) * ctx.d_ * ctx.d_];
    for (int i = 0; i < ctx.d_; ++i)
      for (int j = 0; j < ctx.d_; ++j) gdst[i * ctx.d_ + j] = g(i, j);
    double* rdst = &ctx.Rb_[static_cast<size_t>(x) * ctx.nb_ * ctx.nb_];
    for (int i = 0; i < ctx.nb_; ++i)
      for (int j = 0; j < ctx.nb_; ++j)
        rdst[i * ctx.nb_ + j] = r(ctx.fib_->base_axes[i], ctx.fib_->base_axes[j]);
  }
  return ctx;
}

double McLContext::eval(int base_node, const Eigen::VectorXd& u) const {
  require(base_node >= 0 && base_node < static_cast<int>(fib_->fibers.size()),
          "fiber evaluator: base node out of range");
  require(u.size() == nb_, "fiber evaluator: tangent vector has wrong dimension");
  const double nrm = u.norm();
  if (nrm == 0.0) return 0.0;

  const int bs = base_strata_.label[base_node];
  for (int i = 0; i < nb_; ++i)
    require(u[i] == 0.0 || base_tangent_[bs][i],
            "fiber evaluator: vector not tangent to the base stratum");

  return nrm * eval_unit(base_node, u / nrm);
}

double McLContext::eval_unit(int base_node, const Eigen::VectorXd& uh) const {
  std::uint32_t support = 0;
  for (int i = 0; i < nb_; ++i)
    if (uh[i] != 0.0) support |= (1u << i);

  double best = kInf;
  const auto& fiber = fib_->fibers[base_node];
  if (nb_ == 2) {
    const double a = uh[0], b = uh[1];
    const double aa = a * a, ab2 = 2 * a * b, bb = b * b;
    for (const int x : fiber) {
      if ((base_feasible_[strata_.label[x]] & support) != support) continue;
      const double* r = &Rb_[static_cast<size_t>(x) * 4];
      const double v = aa * r[0] + ab2 * r[1] + bb * r[3];
      if (v < best) best = v;
    }
  } else {
    for (const int x : fiber) {
      if ((base_feasible_[strata_.label[x]] & support) != support) continue;
      const double* r = &Rb_[static_cast<size_t>(x) * nb_ * nb_];
      double v = 0;
      for (int i = 0; i < nb_; ++i)
        for (int j = 0; j < nb_; ++j) v += uh[i] * uh[j] * r[i * nb_ + j];
      if (v < best) best = v;
    }
  }
  require(std::isfinite(best), "fiber evaluator: no stratum over the base node admits the vector");
  return std::sqrt(std::max(0.0, best));
}

double McLContext::value_with_lift(int total_node, const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& kernel_coeffs) const {
  require(total_node >= 0 && total_node < static_cast<int>(strata_.label.size()),
          "fiber evaluator: total node out of range");
  require(u.size() == nb_ && kernel_coeffs.size() == m_,
          "fiber evaluator: lift component dimensions mismatch");
  Eigen::VectorXd up = Eigen::VectorXd::Zero(d_);
  for (int i = 0; i < nb_; ++i) up[fib_->base_axes[i]] = u[i];
  for (int i = 0; i < m_; ++i) up[fib_->fiber_axes[i]] += kernel_coeffs[i];
  Eigen::Map<const Eigen::MatrixXd> g(&G_[static_cast<size_t>(total_node) * d_ * d_], d_, d_);
  return std::sqrt(std::max(0.0, up.dot(g * up)));
}

double McLContext::minimal_lift_value(int total_node, const Eigen::VectorXd& u) const {
  require(total_node >= 0 && total_node < static_cast<int>(strata_.label.size()),
          "fiber evaluator: total node out of range");
  require(u.size() == nb_, "fiber evaluator: base vector dimension mismatch");
  Eigen::Map<const Eigen::MatrixXd> r(&Rb_[static_cast<size_t>(total_node) * nb_ * nb_], nb_,
                                      nb_);
  return std::sqrt(std::max(0.0, u.dot(r * u)));
}

double eval_mcL(const DiscreteFibration& fib, const StratifiedMetricField& field, int base_node,
                const Eigen::VectorXd& u) {
  const auto ctx = McLContext::make(std::make_shared<DiscreteFibration>(fib),
                                    std::make_shared<StratifiedMetricField>(field));
  return ctx.eval(base_node, u);
}

QuasiFinslerField build_quasifinsler(std::shared_ptr<const DiscreteFibration> fib,
                                     std::shared_ptr<const StratifiedMetricField> field,
                                     const StratifiedMetricField& reference, int samples) {
  auto ctx = std::make_shared<McLContext>(McLContext::make(std::move(fib), std::move(field)));
  const ModelSpace& base = *ctx->fib().base;
  const int nb = base.dim();
  require(reference.dim == nb, "build_quasifinsler: reference field dimension mismatch");
  if (samples <= 0) samples = nb >= 3 ? 1024 : (nb == 2 ? 256 : 2);

  QuasiFinslerField qf;
  qf.ctx = ctx;
  qf.base_strata = ctx->base_strata();
  const auto& bs = qf.base_strata;

  std::vector<int> rep(bs.count, -1), size(bs.count, 0);
  for (int v = 0; v < static_cast<int>(bs.label.size()); ++v) {
    if (rep[bs.label[v]] < 0) rep[bs.label[v]] = v;
    ++size[bs.label[v]];
  }

  // Quasinorm sampling per stratum (within its tangent subspace); the
  // reported axiom set comes from the largest stratum admitting directions.
  double k = 0;
  bool sampled = false;
  int best_size = -1;
  for (int s = 0; s < bs.count; ++s) {
    std::vector<int> tax;
    for (int a = 0; a < nb; ++a)
      if (ctx->base_axis_tangent(rep[s], a)) tax.push_back(a);
    if (tax.empty()) continue;
    const auto embed = [&tax, nb](const Eigen::VectorXd& v) {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(nb);
      for (size_t i = 0; i < tax.size(); ++i) u[tax[i]] = v[static_cast<int>(i)];
      return u;
    };
    const int b = rep[s];
    const auto L = [&ctx, &embed, b](const Eigen::VectorXd& v) { return ctx->eval(b, embed(v)); };
    const QuasinormReport r = quasinorm_axioms(L, static_cast<int>(tax.size()), samples);
    k = std::max(k, r.modulus_k);
    if (size[s] > best_size) {
      best_size = size[s];
      qf.axioms = r;
    }
    sampled = true;
  }
  qf.modulus_k = sampled ? k : 1.0;

  // Envelope constant against the reference: extremes of L / |.|_ref over
  // every base node (frontier nodes included) and sampled directions.
  double env = 1.0;
  for (int b = 0; b < base.node_count(); ++b) {
    std::vector<int> tax;
    for (int a = 0; a < nb; ++a)
      if (ctx->base_axis_tangent(b, a)) tax.push_back(a);
    if (tax.empty()) continue;
    const Eigen::MatrixXd h = symmetrized(reference.at(base.coord(b)));
    for (const auto& v : unit_directions(static_cast<int>(tax.size()), samples)) {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(nb);
      for (size_t i = 0; i < tax.size(); ++i) u[tax[i]] = v[static_cast<int>(i)];
      const double lv = ctx->eval(b, u);
      const double hv = std::sqrt(std::max(0.0, u.dot(h * u)));
      if (hv <= 0) {
        if (lv > 0) env = kInf;
        continue;
      }
      const double ratio = lv / hv;
      env = std::max(env, ratio);
      env = std::max(env, ratio > 0 ? 1.0 / ratio : kInf);
    }
  }
  qf.envelope_c = env;
  return qf;
}

}  // namespace collapse
