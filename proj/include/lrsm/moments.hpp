#pragma once

#include <string>
#include <vector>

#include "lrsm/common.hpp"
#include "lrsm/eigenbasis.hpp"
#include "lrsm/model.hpp"
#include "lrsm/weights.hpp"

namespace lrsm {

// Fixed inner products that make likelihood evaluation and bootstrap cost
// independent of n. Columns are split into F (never transformed: the
// intercept, unless the alternative intercept form is on) and G (run through
// the spillover transform: covariates, plus lagged covariates for LSDM).
//
// The X-side column blocks themselves are retained so bootstrap replicates
// can refresh the four y-dependent groups with one pass over the data; every
// object touched after precompute during evaluation has dimensions in
// (f + g) and l only.
struct MomentCache {
  ModelKind kind = ModelKind::LSEM;
  bool alt_intercept = false;
  Index n = 0, f = 0, g = 0, l = 0;
  double dep_lower = -1.0;  // lower end of the feasible dependence interval

  // X-side data blocks (n-sized, set once)
  Matrix fcols, gcols;

  // y-dependent moments (the only fields refresh_y_moments touches)
  double m_yy = 0.0;
  Vector m_fy, m_gy, m_ey;

  // X-side moments
  Matrix m_ff, m_fg, m_gg, m_ef, m_eg;

  // lag extras (LSDM effects): 1'W1, E'(W1), diag(E'WE)
  double m_w11 = 0.0;
  Vector m_ew1, m_ewe_diag;

  std::vector<std::string> names;  // fixed-coefficient labels, F block first

  Index k_f() const { return f + g; }
  // E'1 — lives in the F block normally, in the G block under alt intercept
  Vector ones_projection() const {
    return alt_intercept ? Vector(m_eg.col(0)) : Vector(m_ef.col(0));
  }
};

MomentCache precompute_moments(const DesignData& data, const EigenBasis& basis,
                               const SpatialWeights& w, ModelKind kind,
                               bool alt_intercept = false);

// Recomputes {y'y, F'y, G'y, E'y} for a new response; everything else is
// reused. This is the entire per-replicate data pass of the bootstrap.
void refresh_y_moments(MomentCache& cache, const EigenBasis& basis,
                       const Vector& y);

// Likelihood pieces at a given lag dependence (0 disables the transform):
// X_theta'X_theta, E'X_theta, X_theta'y, assembled purely from the cache.
struct AssembledMoments {
  Matrix m_xx;
  Matrix m_ex;
  Vector m_xy;
};

AssembledMoments assemble_moments(const MomentCache& cache, double rho,
                                  const Vector& lambdas);

namespace detail {

// Incorrect cross-moment variant whose spillover weight omits the eigenvalue
// factor; kept only for the regression test that pins the corrected formula.
Matrix assemble_cross_moment_unweighted(const MomentCache& cache, double rho,
                                        const Vector& lambdas);

}  // namespace detail

}  // namespace lrsm
