#include "lrsm/moments.hpp"

#include <cmath>

#include "lrsm/instrument.hpp"

namespace lrsm {

MomentCache precompute_moments(const DesignData& data, const EigenBasis& basis,
                               const SpatialWeights& w, ModelKind kind,
                               bool alt_intercept) {
  if (!is_lowrank(kind) && kind != ModelKind::LM)
    throw Error("moment cache applies to low-rank kinds");
  if (basis.n() != data.x.rows())
    throw Error("basis and design sample sizes differ");
  instrument::precompute_calls().fetch_add(1, std::memory_order_relaxed);

  const Index n = data.x.rows();
  const Index k = data.x.cols();
  const bool durbin = kind == ModelKind::LSDM;

  MomentCache c;
  c.kind = kind;
  c.alt_intercept = alt_intercept;
  c.n = n;
  c.l = basis.l();
  c.dep_lower = w.scaled ? w.min_eigen_ratio() : -1.0;
  c.names = coef_names(kind, data.names);

  // column split: F untransformed, G through the spillover transform
  Matrix base(n, durbin ? 2 * k - 1 : k);
  base.leftCols(k) = data.x;
  if (durbin) base.rightCols(k - 1) = w.entries * data.x.rightCols(k - 1);

  if (alt_intercept) {
    c.f = 0;
    c.g = base.cols();
    c.fcols.resize(n, 0);
    c.gcols = base;
  } else {
    c.f = 1;
    c.g = base.cols() - 1;
    c.fcols = base.leftCols(1);
    c.gcols = base.rightCols(base.cols() - 1);
  }

  c.m_ff = c.fcols.transpose() * c.fcols;
  c.m_fg = c.fcols.transpose() * c.gcols;
  c.m_gg = c.gcols.transpose() * c.gcols;
  c.m_ef = basis.e.transpose() * c.fcols;
  c.m_eg = basis.e.transpose() * c.gcols;

  if (durbin) {
    c.m_w11 = w.entries.sum();
    const Vector w1 = w.entries * Vector::Ones(n);
    c.m_ew1 = basis.e.transpose() * w1;
    const Matrix we = w.entries * basis.e;
    c.m_ewe_diag = (basis.e.array() * we.array()).colwise().sum().transpose();
  }

  refresh_y_moments(c, basis, data.y);
  return c;
}

void refresh_y_moments(MomentCache& cache, const EigenBasis& basis,
                       const Vector& y) {
  if (y.size() != cache.n) throw Error("response length does not match cache");
  instrument::y_refresh_calls().fetch_add(1, std::memory_order_relaxed);
  cache.m_yy = y.squaredNorm();
  cache.m_fy = cache.fcols.transpose() * y;
  cache.m_gy = cache.gcols.transpose() * y;
  cache.m_ey = basis.e.transpose() * y;
}

namespace {

// d_l = rho*lambda_l/(1 − rho*lambda_l), the diagonal spillover weight
Vector spillover_weights(double rho, const Vector& lambdas) {
  Vector d(lambdas.size());
  for (Index i = 0; i < lambdas.size(); ++i) {
    const double f = 1.0 - rho * lambdas[i];
    if (std::abs(f) < 1e-10)
      throw PoleProximity("spillover weight pole at eigenvalue " +
                          std::to_string(lambdas[i]));
    d[i] = rho * lambdas[i] / f;
  }
  return d;
}

}  // namespace

AssembledMoments assemble_moments(const MomentCache& cache, double rho,
                                  const Vector& lambdas) {
  if (lambdas.size() != cache.l)
    throw Error("eigenvalue vector does not match cache rank");
  instrument::moment_evals().fetch_add(1, std::memory_order_relaxed);
  const Index f = cache.f, g = cache.g, l = cache.l, kf = cache.k_f();
  instrument::note_eval_dim(kf + l);

  const Vector d = spillover_weights(rho, lambdas);

  // transformed blocks:
  //   G_t'G_t = G'G + (E'G)'(2D + D²)(E'G)
  //   F'G_t   = F'G + (E'F)'D(E'G)
  //   E'G_t   = (I + D)(E'G)
  //   G_t'y   = G'y + (E'G)'D(E'y)
  const Vector d2 = (2.0 * d.array() + d.array().square()).matrix();
  Matrix dg = cache.m_eg;
  dg.array().colwise() *= d.array();  // D(E'G)

  Matrix m_gg_t = cache.m_gg;
  {
    Matrix weighted = cache.m_eg;
    weighted.array().colwise() *= d2.array();
    m_gg_t.noalias() += cache.m_eg.transpose() * weighted;
  }
  Matrix m_fg_t = cache.m_fg;
  m_fg_t.noalias() += cache.m_ef.transpose() * dg;

  Matrix m_eg_t = cache.m_eg + dg;

  Vector m_gy_t = cache.m_gy;
  m_gy_t.noalias() += dg.transpose() * cache.m_ey;

  AssembledMoments out;
  out.m_xx.resize(kf, kf);
  out.m_xx.topLeftCorner(f, f) = cache.m_ff;
  out.m_xx.topRightCorner(f, g) = m_fg_t;
  out.m_xx.bottomLeftCorner(g, f) = m_fg_t.transpose();
  out.m_xx.bottomRightCorner(g, g) = m_gg_t;

  out.m_ex.resize(l, kf);
  out.m_ex.leftCols(f) = cache.m_ef;
  out.m_ex.rightCols(g) = m_eg_t;

  out.m_xy.resize(kf);
  out.m_xy.head(f) = cache.m_fy;
  out.m_xy.tail(g) = m_gy_t;
  return out;
}

namespace detail {

Matrix assemble_cross_moment_unweighted(const MomentCache& cache, double rho,
                                        const Vector& lambdas) {
  const Index f = cache.f, g = cache.g, l = cache.l;
  Vector d(l);
  for (Index i = 0; i < l; ++i) d[i] = rho / (1.0 - rho * lambdas[i]);
  Matrix dg = cache.m_eg;
  dg.array().colwise() *= d.array();
  Matrix out(l, f + g);
  out.leftCols(f) = cache.m_ef;
  out.rightCols(g) = cache.m_eg + dg;
  return out;
}

}  // namespace detail

}  // namespace lrsm
