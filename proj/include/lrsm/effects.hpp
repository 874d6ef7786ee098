#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lrsm/common.hpp"
#include "lrsm/eigenbasis.hpp"
#include "lrsm/moments.hpp"
#include "lrsm/reml.hpp"
#include "lrsm/weights.hpp"

namespace lrsm {

// Average direct/indirect effects per non-intercept covariate.
struct EffectsEstimate {
  std::vector<std::string> names;  // covariate labels (no intercept, no lag:)
  Vector de, ie;
  // optional bootstrap percentile intervals, one (lower, upper) row per
  // covariate
  std::optional<Matrix> ci_de, ci_ie;
  double level = 0.95;
};

// Core forms over an arbitrary fixed-coefficient vector laid out like a fit
// for `kind` (intercept, covariates, then the LSDM lag block). These are what
// the bootstrap and the simulation harness call on replicate draws; nothing
// here touches an n-sized object.
Vector de_core(ModelKind kind, const Vector& beta, std::optional<double> rho,
               const MomentCache& moments, const Vector& lambdas);
Vector ie_core(ModelKind kind, const Vector& beta, std::optional<double> rho,
               const MomentCache& moments, const Vector& lambdas);

// Scalar accessors on a fitted model; k indexes non-intercept covariates
// from 0. The moment cache is the one the model was fitted from (it carries
// the lag cross-moments the LSDM terms need).
double de_lowrank(const FittedModel& fitted, const EigenBasis& basis,
                  const MomentCache& moments, Index k);
double ie_lowrank(const FittedModel& fitted, const EigenBasis& basis,
                  const MomentCache& moments, Index k);

// Whole-table convenience wrapper.
EffectsEstimate effects_table(const FittedModel& fitted,
                              const EigenBasis& basis,
                              const MomentCache& moments);

// Dense full-rank definitions (trace mean / off-diagonal row-sum mean of the
// multiplier matrix). Accepts any kind: error-side kinds return (beta_k, 0).
// SizeGuard above n = 5000.
std::pair<double, double> effects_fullrank(const FittedModel& fitted,
                                           const SpatialWeights& w, Index k);

// Same but with the inverse formed once for all covariates.
EffectsEstimate effects_fullrank_table(const FittedModel& fitted,
                                       const SpatialWeights& w);

// Number of non-intercept covariates implied by a fixed-coefficient vector.
Index covariate_count(ModelKind kind, Index k_f);

}  // namespace lrsm
