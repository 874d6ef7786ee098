#pragma once

#include <string>
#include <vector>

#include "lrsm/common.hpp"
#include "lrsm/eigenbasis.hpp"
#include "lrsm/model.hpp"
#include "lrsm/reml.hpp"
#include "lrsm/weights.hpp"

namespace lrsm {

// Full-rank maximum-likelihood fit of the classical error / lag models,
// used as a correctness baseline and as a simulation competitor.
struct FullRankFit {
  ModelKind kind = ModelKind::SLM;
  Vector beta;
  double theta = 0.0;  // rho for SLM, phi for SEM
  double sigma2 = 0.0;
  double loglik = 0.0;
  Vector se_beta;
  Vector residuals;  // whitened residuals r = Z(y − Xb) resp. Zy − Xb
  std::vector<std::string> names;
  int evaluations = 0;
};

// Profile-likelihood fit over the scalar dependence parameter by bounded
// Brent search on (lambda_min/lambda_max + 1e-6, 1 − 1e-6). The first form
// computes the full spectrum of the scaled matrix internally (SizeGuard
// above n = 5000); the second reuses a caller-supplied spectrum.
FullRankFit fit_fullrank(ModelKind kind, const DesignData& data,
                         const SpatialWeights& w);
FullRankFit fit_fullrank(ModelKind kind, const DesignData& data,
                         const SpatialWeights& w, const Vector& lambdas_all);

// Profile log-likelihood at one dependence value (exposed for the
// local-maximum stencil checks).
double fullrank_profile_loglik(ModelKind kind, const DesignData& data,
                               const SpatialWeights& w,
                               const Vector& lambdas_all, double theta);

// z-score of the Moran coefficient of `residuals` under the normality
// assumption: MC = (n/S0)·(r'W0 r)/(r'r), E[MC] = −1/(n−1), Cliff–Ord
// variance. The proximity matrix may be raw or scaled (the score is
// invariant to its overall scale).
double moran_z(const Vector& residuals, const SpatialWeights& w0);

// Residuals û = y − X_θ̂ β̂ − E Σ̂ v̂ of a low-rank fit (what the residual
// diagnostic runs on).
Vector lowrank_residuals(const FittedModel& fitted, const DesignData& data,
                         const EigenBasis& basis, const SpatialWeights& w);

// OLS residuals y − X β̂.
Vector ols_residuals(const FittedModel& fitted, const DesignData& data);

}  // namespace lrsm
