#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lrsm/common.hpp"
#include "lrsm/eigenbasis.hpp"
#include "lrsm/weights.hpp"

namespace lrsm {

enum class ModelKind {
  // low-rank kinds fitted by restricted likelihood
  LSEM,
  LSLM,
  LSDM,
  LSAC,
  // baselines / full-rank oracles
  LM,
  SEM,
  SLM,
  SDM,
  SAC,
};

bool is_lowrank(ModelKind kind);
bool uses_rho(ModelKind kind);  // lag-side dependence enters the design
bool uses_phi(ModelKind kind);  // error-side dependence enters the covariance
int dependence_dimension(ModelKind kind);
std::string to_string(ModelKind kind);
ModelKind kind_from_string(const std::string& name);

// Number of fixed coefficients: K for most kinds, 2K−1 for LSDM/SDM (the
// lagged covariates add K−1 slots).
Index fixed_coef_count(ModelKind kind, Index k_design);

// Coefficient labels in report order (lag block prefixed "lag:").
std::vector<std::string> coef_names(ModelKind kind,
                                    const std::vector<std::string>& names);

struct DesignData {
  Vector y;
  Matrix x;  // first column is the all-ones intercept
  std::vector<std::string> names;
};

// first column exactly 1, no other constant column, n > K, all finite
void validate_design(const DesignData& data);

// Dependence/variance-ratio parameter point. Fields unused by a kind stay
// disengaged; ratio is sigma/tau.
struct ThetaPoint {
  std::optional<double> rho;
  std::optional<double> phi;
  double ratio = 1.0;
};

// Diagonal of the process scale matrix; entries are positive for any theta
// inside the open feasible box.
Vector build_sigma(ModelKind kind, const ThetaPoint& theta,
                   const Vector& lambdas);

// Fixed-effects design at the given lag dependence. The spillover transform
// is applied column-block-wise through the basis, never forming an n×n
// matrix. alt_intercept routes the intercept through the transform as well
// (the documented alternative form).
Matrix build_design(ModelKind kind, const DesignData& data,
                    const EigenBasis& basis, const SpatialWeights& w,
                    double rho, bool alt_intercept = false);

}  // namespace lrsm
