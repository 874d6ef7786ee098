#include "lrsm/reml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lrsm/instrument.hpp"
#include "lrsm/optim.hpp"
#include "lrsm/parallel.hpp"

namespace lrsm {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Cholesky with the pinned relative pivot floor; returns the lower factor.
Matrix checked_cholesky(const Matrix& system) {
  const double max_diag = system.diagonal().maxCoeff();
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success)
    throw SingularSystem("mixed-model system is not positive definite");
  Matrix l = llt.matrixL();
  const double floor = std::sqrt(1e-12 * std::max(max_diag, 1e-300));
  for (Index i = 0; i < l.rows(); ++i)
    if (!(l(i, i) > floor))
      throw SingularSystem("pivot " + std::to_string(i) +
                           " below threshold in mixed-model factorization");
  return l;
}

double log_det_from_chol(const Matrix& l) {
  double s = 0.0;
  for (Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

Vector chol_solve(const Matrix& l, const Vector& rhs) {
  Vector z = l.triangularView<Eigen::Lower>().solve(rhs);
  return l.transpose().triangularView<Eigen::Upper>().solve(z);
}

Matrix chol_inverse(const Matrix& l) {
  const Index k = l.rows();
  Matrix inv = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(k, k));
  return l.transpose().triangularView<Eigen::Upper>().solve(inv);
}

}  // namespace

// ---- naive path ----

GlsSolution gls_solve(const Matrix& xt, const Matrix& e, const Vector& sigma,
                      const Vector& y) {
  const Index kf = xt.cols(), l = e.cols();
  if (e.rows() != xt.rows() || sigma.size() != l || y.size() != xt.rows())
    throw Error("gls_solve: inconsistent dimensions");

  const Matrix es = e * sigma.asDiagonal();  // E Sigma, n×L
  Matrix h(kf + l, kf + l);
  h.topLeftCorner(kf, kf) = xt.transpose() * xt;
  h.topRightCorner(kf, l) = xt.transpose() * es;
  h.bottomLeftCorner(l, kf) = h.topRightCorner(kf, l).transpose();
  h.bottomRightCorner(l, l) =
      es.transpose() * es + Matrix::Identity(l, l);

  Vector rhs(kf + l);
  rhs.head(kf) = xt.transpose() * y;
  rhs.tail(l) = es.transpose() * y;

  GlsSolution sol;
  sol.chol_l = checked_cholesky(h);
  sol.log_det = log_det_from_chol(sol.chol_l);
  const Vector alpha = chol_solve(sol.chol_l, rhs);
  sol.beta = alpha.head(kf);
  sol.v = alpha.tail(l);
  sol.k_f = kf;
  return sol;
}

double penalized_rss(const Vector& y, const Matrix& xt, const Matrix& e,
                     const Vector& sigma, const Vector& beta, const Vector& v) {
  const Vector fitted = xt * beta + e * (sigma.asDiagonal() * v);
  return (y - fitted).squaredNorm() + v.squaredNorm();
}

double restricted_loglik_value(double log_det_h, double d, Index n, Index k_f) {
  const double df = static_cast<double>(n - k_f);
  d = std::max(d, 1e-300);
  return -0.5 * log_det_h - 0.5 * df * (1.0 + std::log(kTwoPi * d / df));
}

double restricted_loglik_dense(ModelKind kind, const ThetaPoint& theta,
                               const DesignData& data, const EigenBasis& basis,
                               const SpatialWeights& w, bool alt_intercept) {
  instrument::dense_evals().fetch_add(1, std::memory_order_relaxed);
  const double rho = uses_rho(kind) ? *theta.rho : 0.0;
  const Matrix xt = build_design(kind, data, basis, w, rho, alt_intercept);
  const Vector sigma = build_sigma(kind, theta, basis.lambdas);
  const GlsSolution sol = gls_solve(xt, basis.e, sigma, data.y);
  const double d = penalized_rss(data.y, xt, basis.e, sigma, sol.beta, sol.v);
  return restricted_loglik_value(sol.log_det, d, data.y.size(), xt.cols());
}

double estimate_tau2(double rss, Index n, Index k_f) {
  if (n <= k_f) throw Error("estimate_tau2 needs n > K");
  return std::max(rss, 0.0) / static_cast<double>(n - k_f);
}

Matrix coef_varcov(const Matrix& chol_l, double tau2) {
  return tau2 * chol_inverse(chol_l);
}

// ---- moment path ----

MomentEvaluator::MomentEvaluator(const MomentCache& cache, const Vector& lambdas)
    : cache_(&cache), lambdas_(lambdas) {
  if (lambdas_.size() != cache.l)
    throw Error("evaluator eigenvalues do not match cache rank");
}

MomentEval MomentEvaluator::evaluate(const ThetaPoint& theta) const {
  const MomentCache& c = *cache_;
  const double rho = uses_rho(c.kind) ? theta.rho.value() : 0.0;

  AssembledMoments am = assemble_moments(c, rho, lambdas_);
  MomentEval ev;
  ev.sigma = build_sigma(c.kind, theta, lambdas_);
  ev.shrink = (ev.sigma.array().square() /
               (1.0 + ev.sigma.array().square()))
                  .matrix();

  // Schur complement of the diagonal random-effects block:
  //   S = M_XX − M_EX' diag(shrink) M_EX
  Matrix weighted = am.m_ex;
  weighted.array().colwise() *= ev.shrink.array();
  Matrix s = am.m_xx;
  s.noalias() -= am.m_ex.transpose() * weighted;

  Vector rhs = am.m_xy;
  rhs.noalias() -= am.m_ex.transpose() *
                   (ev.shrink.array() * c.m_ey.array()).matrix();

  ev.schur_chol = checked_cholesky(s);
  ev.beta = chol_solve(ev.schur_chol, rhs);

  const Vector resid_e = c.m_ey - am.m_ex * ev.beta;
  ev.v = (ev.sigma.array() / (1.0 + ev.sigma.array().square()) *
          resid_e.array())
             .matrix();

  // penalized objective at its minimizer: y'y − beta'X_t'y − v'(Sigma E'y)
  ev.d = c.m_yy - ev.beta.dot(am.m_xy) -
         ev.v.dot((ev.sigma.array() * c.m_ey.array()).matrix());
  ev.d = std::max(ev.d, 0.0);
  ev.rss_noise = std::max(ev.d - ev.v.squaredNorm(), 0.0);

  ev.log_det_h = log_det_from_chol(ev.schur_chol) +
                 (1.0 + ev.sigma.array().square()).log().sum();
  ev.loglik = restricted_loglik_value(ev.log_det_h, ev.d, c.n, c.k_f());
  ev.m_ex = std::move(am.m_ex);
  return ev;
}

// ---- optimization ----

namespace {

double clamp(double x, double lo, double hi) {
  return std::min(hi, std::max(lo, x));
}

// Maps the open feasible box to unconstrained coordinates:
// dependence via scaled logistic, ratio via clipped exp.
struct Reparam {
  ModelKind kind;
  double lo, hi, bound;

  int dim() const { return dependence_dimension(kind) + 1; }

  double dep_of(double s) const {
    s = clamp(s, -40.0, 40.0);
    return lo + (hi - lo) / (1.0 + std::exp(-s));
  }
  double s_of(double dep) const {
    const double q =
        clamp((dep - lo) / (hi - lo), 1e-15, 1.0 - 1e-15);
    return std::log(q / (1.0 - q));
  }

  ThetaPoint theta(const Vector& x) const {
    ThetaPoint th;
    int i = 0;
    if (uses_rho(kind)) th.rho = dep_of(x[i++]);
    if (uses_phi(kind)) th.phi = dep_of(x[i++]);
    th.ratio = std::exp(clamp(x[i], -bound, bound));
    return th;
  }

  Vector unconstrained(const ThetaPoint& th) const {
    Vector x(dim());
    int i = 0;
    if (uses_rho(kind)) x[i++] = s_of(th.rho.value());
    if (uses_phi(kind)) x[i++] = s_of(th.phi.value());
    x[i] = clamp(std::log(th.ratio), -bound, bound);
    return x;
  }
};

struct StartResult {
  NelderMeadResult nm;
  bool failed = false;
};

FittedModel finish(const MomentEvaluator& evaluator, const ThetaPoint& theta,
                   FitDiagnostics diag) {
  const MomentCache& c = evaluator.cache();
  MomentEval ev = evaluator.evaluate(theta);
  ++diag.evaluations;

  FittedModel fm;
  fm.kind = c.kind;
  fm.alt_intercept = c.alt_intercept;
  fm.names = c.names;
  fm.theta = theta;
  fm.beta = ev.beta;
  fm.v = ev.v;
  fm.gamma = (ev.sigma.array() * ev.v.array()).matrix();
  fm.loglik_r = ev.loglik;

  double tau2 = estimate_tau2(ev.rss_noise, c.n, c.k_f());
  if (tau2 < 1e-12) {
    tau2 = 1e-12;
    diag.warnings.push_back("near-perfect fit: tau2 floored at 1e-12");
  }
  fm.tau2 = tau2;
  fm.sigma2 = tau2 * theta.ratio * theta.ratio;

  // full inverse of the mixed-model system from the Schur pieces:
  //   H = [ M_XX  B ; B'  D ],  B = M_EX' Sigma,  D = Sigma² + I
  const Index kf = c.k_f(), l = c.l;
  const Matrix s_inv = chol_inverse(ev.schur_chol);
  const Matrix b = ev.m_ex.transpose() * ev.sigma.asDiagonal();
  const Vector d_inv = (1.0 + ev.sigma.array().square()).inverse().matrix();

  Matrix hinv(kf + l, kf + l);
  hinv.topLeftCorner(kf, kf) = s_inv;
  Matrix sb = s_inv * b;  // kf×l
  sb.array().rowwise() *= d_inv.transpose().array();
  hinv.topRightCorner(kf, l) = -sb;
  hinv.bottomLeftCorner(l, kf) = -sb.transpose();
  Matrix bs = b.transpose() * sb;  // l×l
  bs.array().colwise() *= d_inv.array();
  hinv.bottomRightCorner(l, l) = Matrix(d_inv.asDiagonal()) + bs;

  fm.varcov = tau2 * hinv;
  fm.se_beta = (tau2 * s_inv.diagonal().array()).sqrt().matrix();
  fm.diagnostics = std::move(diag);
  return fm;
}

FittedModel fit_on_cache(const MomentCache& cache, const Vector& lambdas,
                         const FitOptions& opts) {
  const ModelKind kind = cache.kind;
  if (!is_lowrank(kind))
    throw Error("restricted-likelihood fit applies to low-rank kinds");
  if (cache.dep_lower >= 0.0 || cache.dep_lower <= -1.0 - 1e-9)
    throw Error("cache is missing a valid dependence lower bound (weights "
                "must be scaled)");

  MomentEvaluator evaluator(cache, lambdas);
  const Reparam rp{kind, cache.dep_lower + opts.interval_margin,
                   1.0 - opts.interval_margin, opts.log_ratio_bound};

  if (opts.fixed_theta) {
    FitDiagnostics diag;
    diag.converged = true;
    diag.starts = 0;
    return finish(evaluator, *opts.fixed_theta, diag);
  }

  std::atomic<int> eval_count{0};
  auto objective = [&](const Vector& x) -> double {
    eval_count.fetch_add(1, std::memory_order_relaxed);
    try {
      return -evaluator.evaluate(rp.theta(x)).loglik;
    } catch (const PoleProximity&) {
      return std::numeric_limits<double>::infinity();
    } catch (const SingularSystem&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  // the no-dependence, vanishing-ratio corner: the OLS-equivalent candidate
  Vector corner(rp.dim());
  {
    int i = 0;
    for (; i < rp.dim() - 1; ++i) corner[i] = rp.s_of(0.0);
    corner[i] = -opts.log_ratio_bound;
  }
  const double corner_f = objective(corner);

  std::vector<Vector> starts;
  if (opts.warm_start) {
    starts.push_back(rp.unconstrained(*opts.warm_start));
  }
  if (!opts.warm_start || !opts.warm_only) {
    for (double q : {0.5, 0.2, 0.8}) {
      Vector x(rp.dim());
      int i = 0;
      for (; i < rp.dim() - 1; ++i) x[i] = std::log(q / (1.0 - q));
      x[i] = 0.0;
      starts.push_back(x);
    }
    starts.push_back(corner);
  }

  NelderMeadOptions nm_opts;
  nm_opts.f_tolerance = opts.simplex_tolerance;
  nm_opts.max_evaluations_per_dim = opts.max_evaluations_per_dim;

  std::vector<StartResult> results(starts.size());
  parallel_for(static_cast<long long>(starts.size()), opts.threads,
               [&](long long i) {
                 results[static_cast<std::size_t>(i)].nm =
                     nelder_mead(objective, starts[static_cast<std::size_t>(i)],
                                 nm_opts);
               });

  int best = -1;
  bool any_converged = false;
  for (std::size_t i = 0; i < results.size(); ++i) {
    any_converged = any_converged || results[i].nm.converged;
    if (best < 0 || results[i].nm.f < results[static_cast<std::size_t>(best)].nm.f)
      best = static_cast<int>(i);
  }
  if (!any_converged)
    throw OptimFailure("no optimizer start converged within " +
                       std::to_string(nm_opts.max_evaluations_per_dim *
                                      rp.dim()) +
                       " evaluations");

  Vector best_x = results[static_cast<std::size_t>(best)].nm.x;
  double best_f = results[static_cast<std::size_t>(best)].nm.f;
  if (corner_f < best_f) {  // keep the nesting guarantee unconditionally
    best_x = corner;
    best_f = corner_f;
  }

  FitDiagnostics diag;
  diag.evaluations = eval_count.load();
  diag.starts = static_cast<int>(starts.size());
  diag.converged = any_converged;

  const ThetaPoint theta = rp.theta(best_x);
  const double span = rp.hi - rp.lo;
  auto near_edge = [&](double dep) {
    return dep - rp.lo < 1e-4 * span || rp.hi - dep < 1e-4 * span;
  };
  if ((theta.rho && near_edge(*theta.rho)) ||
      (theta.phi && near_edge(*theta.phi))) {
    diag.boundary = true;
    diag.warnings.push_back("dependence estimate at the feasible-box edge");
  }
  if (std::abs(std::log(theta.ratio)) >= opts.log_ratio_bound - 1e-3) {
    diag.boundary = true;
    diag.warnings.push_back("variance ratio at its clip bound");
  }
  return finish(evaluator, theta, diag);
}

}  // namespace

FittedModel fit_cached(const MomentCache& cache, const Vector& lambdas,
                       const FitOptions& opts) {
  return fit_on_cache(cache, lambdas, opts);
}

FittedModel fit_ols(const DesignData& data) {
  validate_design(data);
  const Index n = data.y.size(), k = data.x.cols();
  const Matrix xtx = data.x.transpose() * data.x;
  const Matrix chol = checked_cholesky(xtx);
  const Vector beta = chol_solve(chol, data.x.transpose() * data.y);
  const double rss = (data.y - data.x * beta).squaredNorm();
  const double s2 = rss / static_cast<double>(n - k);

  FittedModel fm;
  fm.kind = ModelKind::LM;
  fm.beta = beta;
  fm.names = data.names;
  fm.tau2 = s2;
  fm.sigma2 = 0.0;
  fm.loglik_r = restricted_loglik_value(log_det_from_chol(chol), rss, n, k);
  fm.varcov = coef_varcov(chol, s2);
  fm.se_beta = fm.varcov.diagonal().array().sqrt().matrix();
  fm.diagnostics.converged = true;
  return fm;
}

FittedModel fit(ModelKind kind, const DesignData& data, const EigenBasis& basis,
                const SpatialWeights& w, const FitOptions& opts) {
  validate_design(data);
  if (kind == ModelKind::LM) return fit_ols(data);
  if (!is_lowrank(kind))
    throw Error("full-rank kinds are fitted by the oracle module");
  if (!w.scaled) throw Error("fit requires the scaled proximity matrix");
  const MomentCache cache =
      precompute_moments(data, basis, w, kind, opts.alt_intercept);
  return fit_on_cache(cache, basis.lambdas, opts);
}

}  // namespace lrsm
