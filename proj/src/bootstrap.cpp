#include "lrsm/bootstrap.hpp"

#include <algorithm>
#include <cmath>

#include "lrsm/parallel.hpp"
#include "lrsm/rng.hpp"

namespace lrsm {

namespace {

struct ReplicateSlot {
  bool ok = false;
  ThetaPoint theta;
  Vector de, ie;
};

// X_theta beta as an n-vector, assembled from the cached column blocks and
// the basis (the only n-sized object the fast path builds, once).
Vector fitted_mean(const FittedModel& fitted, const MomentCache& cache,
                   const EigenBasis& basis) {
  const Vector beta_f = fitted.beta.head(cache.f);
  const Vector beta_g = fitted.beta.tail(cache.g);
  Vector mean = Vector::Zero(cache.n);
  if (cache.f > 0) mean += cache.fcols * beta_f;
  if (cache.g > 0) {
    Vector gb = cache.gcols * beta_g;
    if (uses_rho(cache.kind)) {
      const double rho = fitted.theta.rho.value();
      Vector d(cache.l);
      for (Index l = 0; l < cache.l; ++l) {
        const double denom = 1.0 - rho * basis.lambdas[l];
        if (std::abs(denom) < 1e-12)
          throw PoleProximity("spillover pole in the bootstrap mean");
        d[l] = rho * basis.lambdas[l] / denom;
      }
      gb += basis.e * (d.asDiagonal() * (cache.m_eg * beta_g));
    }
    mean += gb;
  }
  return mean;
}

void run_replicate(ReplicateSlot& slot, MomentCache& cache,
                   const EigenBasis& basis, const Vector& y_star,
                   const FitOptions& refit_opts) {
  try {
    refresh_y_moments(cache, basis, y_star);
    FittedModel refit;
    try {
      refit = fit_cached(cache, basis.lambdas, refit_opts);
    } catch (const OptimFailure&) {
      FitOptions wide = refit_opts;
      wide.warm_only = false;
      refit = fit_cached(cache, basis.lambdas, wide);
    }
    slot.theta = refit.theta;
    slot.de = de_core(cache.kind, refit.beta, refit.theta.rho, cache,
                      basis.lambdas);
    slot.ie = ie_core(cache.kind, refit.beta, refit.theta.rho, cache,
                      basis.lambdas);
    slot.ok = true;
  } catch (const OptimFailure&) {
  } catch (const SingularSystem&) {
  }
}

BootstrapResult aggregate(const std::vector<ReplicateSlot>& slots, Index m,
                          Index kc, std::uint64_t seed,
                          const BootstrapOptions& opts) {
  BootstrapResult res;
  res.m = m;
  res.level = opts.level;
  res.seed = seed;
  Index ok_count = 0;
  for (const auto& s : slots) ok_count += s.ok ? 1 : 0;
  res.failures = m - ok_count;
  res.theta_samples.reserve(static_cast<std::size_t>(ok_count));
  res.de_samples.resize(ok_count, kc);
  res.ie_samples.resize(ok_count, kc);
  Index row = 0;
  for (Index r = 0; r < m; ++r) {
    const ReplicateSlot& s = slots[static_cast<std::size_t>(r)];
    if (!s.ok) {
      res.failed_indices.push_back(r);
      continue;
    }
    res.theta_samples.push_back(s.theta);
    res.de_samples.row(row) = s.de.transpose();
    res.ie_samples.row(row) = s.ie.transpose();
    ++row;
  }
  if (static_cast<double>(res.failures) >
      opts.max_failure_fraction * static_cast<double>(m))
    throw ConvergenceFailure(std::to_string(res.failures) + " of " +
                             std::to_string(m) +
                             " bootstrap replicates failed to refit");
  return res;
}

void validate_parent(const FittedModel& fitted, Index m) {
  if (m < 1) throw Error("bootstrap needs m >= 1");
  if (!fitted.diagnostics.converged)
    throw Error("bootstrap requires a converged fit");
  if (!is_lowrank(fitted.kind))
    throw Error("bootstrap applies to low-rank fits");
}

FitOptions replicate_options(const FittedModel& fitted) {
  FitOptions o;
  o.alt_intercept = fitted.alt_intercept;
  o.warm_start = fitted.theta;
  o.warm_only = true;
  return o;
}

}  // namespace

BootstrapResult bootstrap_cached(const FittedModel& fitted,
                                 const MomentCache& cache,
                                 const EigenBasis& basis, Index m,
                                 std::uint64_t seed,
                                 const BootstrapOptions& opts) {
  validate_parent(fitted, m);
  if (opts.naive_refresh)
    throw Error("the naive per-replicate rebuild needs raw data; call "
                "bootstrap() instead");
  if (basis.lambdas.size() != cache.l || basis.e.rows() != cache.n)
    throw Error("basis does not match the cache");

  const Vector mean = fitted_mean(fitted, cache, basis);
  const Vector sigma = build_sigma(cache.kind, fitted.theta, basis.lambdas);
  const double noise_sd = std::sqrt(fitted.tau2);
  const Index kc = covariate_count(cache.kind, cache.k_f());
  const FitOptions refit_opts = replicate_options(fitted);

  std::vector<ReplicateSlot> slots(static_cast<std::size_t>(m));

  // Chunked so each worker clones the cache once, not per replicate. The
  // chunk layout cannot affect results: slot r depends only on (seed, r).
  const int workers =
      std::max(1, std::min<int>(opts.threads, static_cast<int>(m)));
  const Index chunk = (m + workers - 1) / workers;
  parallel_for(workers, workers, [&](long long c) {
    const Index begin = static_cast<Index>(c) * chunk;
    const Index end = std::min<Index>(begin + chunk, m);
    if (begin >= end) return;
    MomentCache local = cache;
    for (Index r = begin; r < end; ++r) {
      Rng rng(seed, static_cast<std::uint64_t>(r));
      const Vector v = rng.normal_vector(cache.l) * noise_sd;
      const Vector u = rng.normal_vector(cache.n) * noise_sd;
      const Vector y_star = mean + basis.e * sigma.cwiseProduct(v) + u;
      run_replicate(slots[static_cast<std::size_t>(r)], local, basis, y_star,
                    refit_opts);
    }
  });
  return aggregate(slots, m, kc, seed, opts);
}

BootstrapResult bootstrap(const FittedModel& fitted, const DesignData& data,
                          const EigenBasis& basis, const SpatialWeights& w,
                          Index m, std::uint64_t seed,
                          const BootstrapOptions& opts) {
  if (!opts.naive_refresh) {
    const MomentCache cache = precompute_moments(data, basis, w, fitted.kind,
                                                 fitted.alt_intercept);
    return bootstrap_cached(fitted, cache, basis, m, seed, opts);
  }

  validate_parent(fitted, m);
  const double rho = fitted.theta.rho ? *fitted.theta.rho : 0.0;
  const Matrix xt =
      build_design(fitted.kind, data, basis, w, rho, fitted.alt_intercept);
  const Vector mean = xt * fitted.beta;
  const Vector sigma = build_sigma(fitted.kind, fitted.theta, basis.lambdas);
  const double noise_sd = std::sqrt(fitted.tau2);
  const Index l = basis.lambdas.size();
  const FitOptions refit_opts = replicate_options(fitted);
  const Index kc =
      covariate_count(fitted.kind, fixed_coef_count(fitted.kind, data.x.cols()));

  std::vector<ReplicateSlot> slots(static_cast<std::size_t>(m));
  parallel_for(m, opts.threads, [&](long long r) {
    Rng rng(seed, static_cast<std::uint64_t>(r));
    const Vector v = rng.normal_vector(l) * noise_sd;
    const Vector u = rng.normal_vector(data.y.size()) * noise_sd;
    const Vector y_star = mean + basis.e * sigma.cwiseProduct(v) + u;

    DesignData replicate = data;
    replicate.y = y_star;
    ReplicateSlot& slot = slots[static_cast<std::size_t>(r)];
    try {
      MomentCache fresh = precompute_moments(replicate, basis, w, fitted.kind,
                                             fitted.alt_intercept);
      FittedModel refit;
      try {
        refit = fit_cached(fresh, basis.lambdas, refit_opts);
      } catch (const OptimFailure&) {
        FitOptions wide = refit_opts;
        wide.warm_only = false;
        refit = fit_cached(fresh, basis.lambdas, wide);
      }
      slot.theta = refit.theta;
      slot.de = de_core(fitted.kind, refit.beta, refit.theta.rho, fresh,
                        basis.lambdas);
      slot.ie = ie_core(fitted.kind, refit.beta, refit.theta.rho, fresh,
                        basis.lambdas);
      slot.ok = true;
    } catch (const OptimFailure&) {
    } catch (const SingularSystem&) {
    }
  });
  return aggregate(slots, m, kc, seed, opts);
}

std::pair<double, double> percentile_ci(const Vector& samples, double level) {
  if (samples.size() < 2)
    throw TooFewSamples("percentile interval needs at least 2 samples");
  if (!(level > 0.0 && level < 1.0))
    throw Error("interval level must lie in (0, 1)");
  std::vector<double> sorted(samples.data(), samples.data() + samples.size());
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] +
           (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double alpha = (1.0 - level) / 2.0;
  return {quantile(alpha), quantile(1.0 - alpha)};
}

void attach_percentile_cis(EffectsEstimate& est, const BootstrapResult& res) {
  const Index kc = est.de.size();
  if (res.de_samples.cols() != kc || res.ie_samples.cols() != kc)
    throw Error("bootstrap draws do not match the effects table");
  Matrix ci_de(kc, 2), ci_ie(kc, 2);
  for (Index k = 0; k < kc; ++k) {
    const auto de = percentile_ci(res.de_samples.col(k), res.level);
    const auto ie = percentile_ci(res.ie_samples.col(k), res.level);
    ci_de(k, 0) = de.first;
    ci_de(k, 1) = de.second;
    ci_ie(k, 0) = ie.first;
    ci_ie(k, 1) = ie.second;
  }
  est.ci_de = ci_de;
  est.ci_ie = ci_ie;
  est.level = res.level;
}

}  // namespace lrsm
