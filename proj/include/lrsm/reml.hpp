#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lrsm/common.hpp"
#include "lrsm/eigenbasis.hpp"
#include "lrsm/model.hpp"
#include "lrsm/moments.hpp"
#include "lrsm/weights.hpp"

namespace lrsm {

struct FitOptions {
  bool alt_intercept = false;
  int threads = 1;  // parallel multi-starts
  // evaluate at this point instead of optimizing (diagnostic / nesting runs)
  std::optional<ThetaPoint> fixed_theta;
  // extra optimizer start (bootstrap replicates warm-start at the parent
  // estimate); warm_only drops the standard start set, keeping one run
  std::optional<ThetaPoint> warm_start;
  bool warm_only = false;
  double simplex_tolerance = 1e-8;
  int max_evaluations_per_dim = 500;
  double interval_margin = 1e-6;  // shrink applied to the open dependence box
  double log_ratio_bound = 12.0;
};

struct FitDiagnostics {
  int evaluations = 0;
  int starts = 0;
  bool converged = false;
  bool boundary = false;  // optimum pinned to the feasible-box edge
  std::vector<std::string> warnings;
};

struct FittedModel {
  ModelKind kind = ModelKind::LM;
  bool alt_intercept = false;  // design form the fit used
  Vector beta;      // fixed coefficients (intercept first; lag block for LSDM)
  Vector v;         // standardized random coefficients
  Vector gamma;     // gamma = sigma .* v
  ThetaPoint theta;
  double tau2 = 0.0;
  double sigma2 = 0.0;
  double loglik_r = 0.0;
  Vector se_beta;
  Matrix varcov;  // tau2 × inverse of the mixed-model system, fixed block first
  std::vector<std::string> names;
  FitDiagnostics diagnostics;
};

// ---- naive path (n-sized matrices; oracle for the moment path) ----

struct GlsSolution {
  Vector beta, v;
  Matrix chol_l;   // lower Cholesky factor of the mixed-model system
  double log_det;  // log-determinant of that system
  Index k_f;
};

// Solves the mixed-model normal equations
//   [X'X      X'E Sigma ] [beta]   [X'y        ]
//   [Sigma E'X  Sigma E'E Sigma + I] [v  ] = [Sigma E'y]
// by positive-definite Cholesky. SingularSystem when a pivot falls below
// 1e-12 times the largest system diagonal.
GlsSolution gls_solve(const Matrix& xt, const Matrix& e, const Vector& sigma,
                      const Vector& y);

// d(theta) = ||y − X beta − E Sigma v||² + v'v
double penalized_rss(const Vector& y, const Matrix& xt, const Matrix& e,
                     const Vector& sigma, const Vector& beta, const Vector& v);

// Restricted log-likelihood closed form given log|H| and d(theta).
double restricted_loglik_value(double log_det_h, double d, Index n, Index k_f);

// Full naive-path evaluation at one theta (design build, dense solve).
double restricted_loglik_dense(ModelKind kind, const ThetaPoint& theta,
                               const DesignData& data, const EigenBasis& basis,
                               const SpatialWeights& w,
                               bool alt_intercept = false);

double estimate_tau2(double rss, Index n, Index k_f);

// tau2 × inverse of the factorized system.
Matrix coef_varcov(const Matrix& chol_l, double tau2);

// ---- moment path ----

struct MomentEval {
  double loglik = 0.0;
  double d = 0.0;          // penalized RSS
  double rss_noise = 0.0;  // d − v'v, the residual part feeding tau2
  double log_det_h = 0.0;
  Vector beta, v, sigma;
  Matrix schur_chol;  // k_f×k_f lower factor of S = M_XX − M_EX' D M_EX
  Vector shrink;      // sigma² / (1 + sigma²)
  Matrix m_ex;        // assembled cross moment at theta (for varcov blocks)
};

// Evaluates the restricted likelihood from a MomentCache in O(L·K²) per call;
// no n-sized object is touched (instrumented).
class MomentEvaluator {
 public:
  MomentEvaluator(const MomentCache& cache, const Vector& lambdas);
  MomentEval evaluate(const ThetaPoint& theta) const;

  const MomentCache& cache() const { return *cache_; }
  const Vector& lambdas() const { return lambdas_; }

 private:
  const MomentCache* cache_;
  Vector lambdas_;
};

// Full REML fit: moment precompute, reparameterized Nelder–Mead multi-start
// (plus the no-dependence corner candidate), coefficient recovery and
// uncertainty at the optimum. kind LM runs closed-form OLS instead.
FittedModel fit(ModelKind kind, const DesignData& data, const EigenBasis& basis,
                const SpatialWeights& w, const FitOptions& opts = {});

// Same optimization over an existing cache (bootstrap replicates); LM not
// supported here.
FittedModel fit_cached(const MomentCache& cache, const Vector& lambdas,
                       const FitOptions& opts = {});

// Closed-form OLS with classical standard errors, reported in the same
// structure (theta empty, sigma2 = 0).
FittedModel fit_ols(const DesignData& data);

}  // namespace lrsm
