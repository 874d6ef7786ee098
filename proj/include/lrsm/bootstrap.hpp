#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lrsm/common.hpp"
#include "lrsm/effects.hpp"
#include "lrsm/eigenbasis.hpp"
#include "lrsm/moments.hpp"
#include "lrsm/reml.hpp"
#include "lrsm/weights.hpp"

namespace lrsm {

struct BootstrapOptions {
  double level = 0.95;
  int threads = 1;
  // rebuild the whole moment cache per replicate instead of refreshing the
  // four y-dependent groups; exists to validate the fast path against it
  bool naive_refresh = false;
  double max_failure_fraction = 0.10;
};

// Samples are kept in replicate-index order with failed replicates dropped;
// row r of the effect matrices matches theta_samples[r].
struct BootstrapResult {
  Index m = 0;  // requested replicate count
  std::vector<ThetaPoint> theta_samples;
  Matrix de_samples, ie_samples;  // successes × (K−1)
  double level = 0.95;
  std::uint64_t seed = 0;
  Index failures = 0;
  std::vector<Index> failed_indices;
};

// Parametric bootstrap around a converged low-rank fit: replicate r draws
// v ~ N(0, tau2 I_L) then u ~ N(0, tau2 I_n) from the (seed, r) stream,
// forms y* = X_theta beta + E Sigma v + u, refits with a warm start at the
// parent estimate (multi-start fallback), and records theta*, DE*, IE*.
// Throws ConvergenceFailure when more than max_failure_fraction of the
// replicates fail.
BootstrapResult bootstrap_cached(const FittedModel& fitted,
                                 const MomentCache& cache,
                                 const EigenBasis& basis, Index m,
                                 std::uint64_t seed,
                                 const BootstrapOptions& opts = {});

// Convenience wrapper that precomputes the cache from raw data first.
BootstrapResult bootstrap(const FittedModel& fitted, const DesignData& data,
                          const EigenBasis& basis, const SpatialWeights& w,
                          Index m, std::uint64_t seed,
                          const BootstrapOptions& opts = {});

// Linear-interpolation empirical quantiles at (1−level)/2 and 1−(1−level)/2
// (the order-statistic rule with plotting position h = (m−1)p + 1).
std::pair<double, double> percentile_ci(const Vector& samples, double level);

// Fills ci_de / ci_ie of an effects table from bootstrap draws.
void attach_percentile_cis(EffectsEstimate& est, const BootstrapResult& res);

}  // namespace lrsm
