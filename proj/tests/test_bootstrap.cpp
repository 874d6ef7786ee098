#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lrsm/bootstrap.hpp"
#include "lrsm/instrument.hpp"
#include "lrsm/moments.hpp"
#include "lrsm/oracle.hpp"
#include "lrsm/reml.hpp"
#include "lrsm/rng.hpp"
#include "lrsm/weights.hpp"

using namespace lrsm;

namespace {

struct World {
  SpatialWeights w;
  EigenBasis basis;
  DesignData data;
  MomentCache cache;
  FittedModel fitted;
};

World make_fitted_world(Index n, Index l, std::uint64_t seed,
                        ModelKind kind = ModelKind::LSLM) {
  Rng rng(seed);
  Matrix pts(n, 2);
  for (Index i = 0; i < n; ++i) {
    pts(i, 0) = rng.normal();
    pts(i, 1) = rng.normal();
  }
  World out;
  out.w = scale_by_max_eigenvalue(build_delaunay_adjacency(pts));
  out.basis = top_l_eigenpairs(out.w, l);
  out.data.x = Matrix(n, 3);
  out.data.x.col(0).setOnes();
  out.data.x.col(1) = rng.normal_vector(n);
  out.data.x.col(2) = rng.normal_vector(n);
  out.data.names = {"intercept", "x1", "x2"};
  // smooth spatial component plus noise so every parameter is interior
  Vector coef = rng.normal_vector(l);
  for (Index i = 0; i < l; ++i)
    coef[i] *= 1.2 / (1.0 - 0.6 * out.basis.lambdas[i]);
  out.data.y = Vector::Constant(n, 1.0) + 2.0 * out.data.x.col(1) +
               0.5 * out.data.x.col(2) + out.basis.e * coef +
               rng.normal_vector(n);
  out.cache = precompute_moments(out.data, out.basis, out.w, kind);
  out.fitted = fit_cached(out.cache, out.basis.lambdas, {});
  return out;
}

}  // namespace

TEST_CASE("percentile interval on hand-checkable samples") {
  Vector v(100);
  for (Index i = 0; i < 100; ++i) v[i] = static_cast<double>(100 - i);  // unsorted
  const auto [lo, hi] = percentile_ci(v, 0.95);
  CHECK(lo == doctest::Approx(3.475).epsilon(1e-12));
  CHECK(hi == doctest::Approx(97.525).epsilon(1e-12));

  Vector five(5);
  five << 30, 10, 50, 20, 40;
  const auto [l2, h2] = percentile_ci(five, 0.5);
  CHECK(l2 == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(h2 == doctest::Approx(40.0).epsilon(1e-12));

  Vector one(1);
  one << 3.0;
  CHECK_THROWS_AS(percentile_ci(one, 0.95), TooFewSamples);
  CHECK_THROWS_AS(percentile_ci(five, 1.0), Error);
  CHECK_THROWS_AS(percentile_ci(five, 0.0), Error);
}

TEST_CASE("bootstrap replicates are deterministic in the seed") {
  World world = make_fitted_world(70, 14, 101);
  BootstrapResult a =
      bootstrap_cached(world.fitted, world.cache, world.basis, 12, 555);
  BootstrapResult b =
      bootstrap_cached(world.fitted, world.cache, world.basis, 12, 555);
  REQUIRE(a.theta_samples.size() == b.theta_samples.size());
  for (std::size_t i = 0; i < a.theta_samples.size(); ++i) {
    CHECK(*a.theta_samples[i].rho == *b.theta_samples[i].rho);
    CHECK(a.theta_samples[i].ratio == b.theta_samples[i].ratio);
  }
  CHECK(a.de_samples == b.de_samples);
  CHECK(a.seed == 555);
  CHECK(a.m == 12);

  BootstrapResult c =
      bootstrap_cached(world.fitted, world.cache, world.basis, 12, 556);
  bool any_diff = false;
  for (std::size_t i = 0; i < c.theta_samples.size(); ++i)
    any_diff = any_diff || *c.theta_samples[i].rho != *a.theta_samples[i].rho;
  CHECK(any_diff);
}

TEST_CASE("thread count does not change the replicate draws") {
  World world = make_fitted_world(60, 12, 103);
  BootstrapOptions two;
  two.threads = 2;
  BootstrapResult a =
      bootstrap_cached(world.fitted, world.cache, world.basis, 10, 7);
  BootstrapResult b =
      bootstrap_cached(world.fitted, world.cache, world.basis, 10, 7, two);
  REQUIRE(a.theta_samples.size() == b.theta_samples.size());
  for (std::size_t i = 0; i < a.theta_samples.size(); ++i)
    CHECK(*a.theta_samples[i].rho == *b.theta_samples[i].rho);
  CHECK(a.de_samples == b.de_samples);
  CHECK(a.ie_samples == b.ie_samples);
}

TEST_CASE("fast refresh equals the naive full recompute") {
  World world = make_fitted_world(100, 20, 105);
  BootstrapResult fast =
      bootstrap_cached(world.fitted, world.cache, world.basis, 20, 99);
  BootstrapOptions naive_opts;
  naive_opts.naive_refresh = true;
  BootstrapResult naive = bootstrap(world.fitted, world.data, world.basis,
                                    world.w, 20, 99, naive_opts);
  REQUIRE(fast.theta_samples.size() == 20);
  REQUIRE(naive.theta_samples.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(std::abs(*fast.theta_samples[i].rho - *naive.theta_samples[i].rho) <
          1e-10);
    CHECK(std::abs(fast.theta_samples[i].ratio - naive.theta_samples[i].ratio) <
          1e-10);
  }
  CHECK((fast.de_samples - naive.de_samples).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("per-replicate work never re-runs the x-side precompute") {
  World world = make_fitted_world(60, 10, 107);
  instrument::reset_all();
  bootstrap_cached(world.fitted, world.cache, world.basis, 8, 11);
  CHECK(instrument::precompute_calls().load() == 0);
  CHECK(instrument::y_refresh_calls().load() == 8);
}

TEST_CASE("effect samples line up with theta samples and feed the intervals") {
  World world = make_fitted_world(80, 16, 109);
  BootstrapResult res =
      bootstrap_cached(world.fitted, world.cache, world.basis, 30, 41);
  const Index s = static_cast<Index>(res.theta_samples.size());
  CHECK(res.de_samples.rows() == s);
  CHECK(res.de_samples.cols() == 2);
  CHECK(res.ie_samples.rows() == s);
  CHECK(res.failures == 30 - s);

  EffectsEstimate est;
  est.names = {"x1", "x2"};
  est.de = Vector::Zero(2);
  est.ie = Vector::Zero(2);
  attach_percentile_cis(est, res);
  REQUIRE(est.ci_de.has_value());
  REQUIRE(est.ci_ie.has_value());
  for (Index k = 0; k < 2; ++k) {
    const auto [lo, hi] = percentile_ci(res.de_samples.col(k), res.level);
    CHECK((*est.ci_de)(k, 0) == lo);
    CHECK((*est.ci_de)(k, 1) == hi);
    CHECK((*est.ci_de)(k, 0) <= (*est.ci_de)(k, 1));
    CHECK((*est.ci_ie)(k, 0) <= (*est.ci_ie)(k, 1));
  }
}

TEST_CASE("intervals bracket the generating effects most of the time") {
  World world = make_fitted_world(90, 18, 111);
  BootstrapResult res =
      bootstrap_cached(world.fitted, world.cache, world.basis, 60, 17);
  const auto [lo, hi] = percentile_ci(res.de_samples.col(0), 0.95);
  // the parent point estimate sits inside its own bootstrap interval
  const double de1 =
      de_lowrank(world.fitted, world.basis, world.cache, 0);
  CHECK(lo <= de1);
  CHECK(de1 <= hi);
}

TEST_CASE("error-side bootstrap carries phi samples") {
  World world = make_fitted_world(70, 12, 113, ModelKind::LSEM);
  BootstrapResult res =
      bootstrap_cached(world.fitted, world.cache, world.basis, 10, 23);
  REQUIRE(!res.theta_samples.empty());
  for (const auto& t : res.theta_samples) {
    CHECK(t.phi.has_value());
    CHECK_FALSE(t.rho.has_value());
  }
}

TEST_CASE("parents that cannot seed a bootstrap are rejected") {
  World world = make_fitted_world(50, 10, 115);
  FittedModel ols = fit_ols(world.data);
  CHECK_THROWS_AS(
      bootstrap_cached(ols, world.cache, world.basis, 5, 1), Error);

  FittedModel unconverged = world.fitted;
  unconverged.diagnostics.converged = false;
  CHECK_THROWS_AS(
      bootstrap_cached(unconverged, world.cache, world.basis, 5, 1), Error);

  CHECK_THROWS_AS(
      bootstrap_cached(world.fitted, world.cache, world.basis, 0, 1), Error);
}
