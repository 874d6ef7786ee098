#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <tuple>

#include "lrsm/moments.hpp"
#include "lrsm/oracle.hpp"
#include "lrsm/reml.hpp"
#include "lrsm/rng.hpp"
#include "lrsm/weights.hpp"

using namespace lrsm;

namespace {

struct World {
  SpatialWeights w;
  Matrix dense_w;
  DesignData data;  // covariates only; y filled by the caller
};

World make_world(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix pts(n, 2);
  for (Index i = 0; i < n; ++i) {
    pts(i, 0) = rng.normal();
    pts(i, 1) = rng.normal();
  }
  World out;
  out.w = scale_by_max_eigenvalue(build_delaunay_adjacency(pts));
  out.dense_w = Matrix(out.w.entries);
  out.data.x = Matrix(n, 3);
  out.data.x.col(0).setOnes();
  out.data.x.col(1) = rng.normal_vector(n);
  out.data.x.col(2) = rng.normal_vector(n);
  out.data.names = {"intercept", "x1", "x2"};
  return out;
}

Vector mean_signal(const World& w) {
  return Vector::Constant(w.data.x.rows(), 1.0) + 2.0 * w.data.x.col(1) +
         0.5 * w.data.x.col(2);
}

// Textbook profile likelihood evaluated with dense linear algebra only.
double dense_profile(ModelKind kind, const World& world, const Vector& y,
                     double theta) {
  const Index n = y.size();
  const Matrix z = Matrix::Identity(n, n) - theta * world.dense_w;
  Vector rss_resid;
  if (kind == ModelKind::SLM) {
    const Vector zy = z * y;
    const Matrix& x = world.data.x;
    Vector beta = (x.transpose() * x).ldlt().solve(x.transpose() * zy);
    rss_resid = zy - x * beta;
  } else {
    const Matrix zx = z * world.data.x;
    const Vector zy = z * y;
    Vector beta = (zx.transpose() * zx).ldlt().solve(zx.transpose() * zy);
    rss_resid = zy - zx * beta;
  }
  const double rss = rss_resid.squaredNorm();
  Eigen::SelfAdjointEigenSolver<Matrix> es(world.dense_w,
                                           Eigen::EigenvaluesOnly);
  double log_jac = 0.0;
  for (Index i = 0; i < n; ++i)
    log_jac += std::log(1.0 - theta * es.eigenvalues()[i]);
  const double dn = static_cast<double>(n);
  return -0.5 * dn * (std::log(2.0 * M_PI) + 1.0) -
         0.5 * dn * std::log(rss / dn) + log_jac;
}

}  // namespace

TEST_CASE("profile likelihood matches a dense reimplementation") {
  World world = make_world(60, 3);
  Rng rng(1000);
  Vector y = mean_signal(world) + rng.normal_vector(60);
  Eigen::SelfAdjointEigenSolver<Matrix> es(world.dense_w,
                                           Eigen::EigenvaluesOnly);
  const Vector lambdas = es.eigenvalues();
  for (ModelKind kind : {ModelKind::SLM, ModelKind::SEM}) {
    World w2 = world;
    w2.data.y = y;
    for (double theta : {-0.4, 0.0, 0.3, 0.7}) {
      const double got =
          fullrank_profile_loglik(kind, w2.data, w2.w, lambdas, theta);
      const double want = dense_profile(kind, world, y, theta);
      CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("lag model maximum likelihood recovers the generating process") {
  World world = make_world(300, 5);
  Rng rng(2000);
  const Index n = 300;
  const Vector eps = rng.normal_vector(n);
  const Matrix z = Matrix::Identity(n, n) - 0.6 * world.dense_w;
  world.data.y = z.partialPivLu().solve(Vector(mean_signal(world) + eps));

  FullRankFit fr = fit_fullrank(ModelKind::SLM, world.data, world.w);
  CHECK(std::abs(fr.theta - 0.6) < 0.12);
  CHECK(std::abs(fr.beta[1] - 2.0) < 0.3);
  CHECK(std::abs(fr.beta[2] - 0.5) < 0.3);
  CHECK(fr.sigma2 > 0.0);
  CHECK(fr.evaluations > 0);
  for (Index i = 0; i < 3; ++i) CHECK(fr.se_beta[i] > 0.0);

  // the reported optimum is a local maximum of the profile likelihood
  Eigen::SelfAdjointEigenSolver<Matrix> es(world.dense_w,
                                           Eigen::EigenvaluesOnly);
  const Vector lambdas = es.eigenvalues();
  const double at =
      fullrank_profile_loglik(ModelKind::SLM, world.data, world.w, lambdas,
                              fr.theta);
  for (double step : {-0.01, 0.01})
    CHECK(at >= fullrank_profile_loglik(ModelKind::SLM, world.data, world.w,
                                        lambdas, fr.theta + step) -
                    1e-9);

  // whitened residuals should show no leftover spatial pattern
  SpatialWeights w0 = world.w;  // any scale works for the z-score
  CHECK(std::abs(moran_z(fr.residuals, w0)) < 3.0);
}

TEST_CASE("error model maximum likelihood recovers the generating process") {
  World world = make_world(300, 7);
  Rng rng(3000);
  const Index n = 300;
  const Vector eps = rng.normal_vector(n);
  const Matrix z = Matrix::Identity(n, n) - 0.7 * world.dense_w;
  world.data.y = mean_signal(world) + z.partialPivLu().solve(eps);

  FullRankFit fr = fit_fullrank(ModelKind::SEM, world.data, world.w);
  CHECK(std::abs(fr.theta - 0.7) < 0.2);
  CHECK(std::abs(fr.beta[1] - 2.0) < 0.3);
  CHECK(std::abs(fr.beta[2] - 0.5) < 0.3);
  CHECK(std::abs(moran_z(fr.residuals, world.w)) < 3.0);
}

TEST_CASE("no-dependence data yields a small dependence estimate") {
  World world = make_world(200, 9);
  Rng rng(4000);
  world.data.y = mean_signal(world) + rng.normal_vector(200);
  FullRankFit slm = fit_fullrank(ModelKind::SLM, world.data, world.w);
  CHECK(std::abs(slm.theta) < 0.25);
  FullRankFit sem = fit_fullrank(ModelKind::SEM, world.data, world.w);
  CHECK(std::abs(sem.theta) < 0.35);
}

TEST_CASE("moran z on a hand-computed chain example") {
  SpatialWeights w = build_from_edges(
      4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}});
  Vector r(4);
  r << 1.0, -1.0, 1.0, -1.0;
  // MC = -1, E = -1/3, Var = 4/27 under normality
  CHECK(moran_z(r, w) == doctest::Approx(-std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("moran z ignores the overall scale of matrix and residuals") {
  World world = make_world(80, 11);
  Rng rng(5000);
  Vector r = rng.normal_vector(80);
  const double base = moran_z(r, world.w);

  SpatialWeights scaled_w = world.w;
  scaled_w.entries = world.w.entries * 7.3;
  CHECK(moran_z(r, scaled_w) == doctest::Approx(base).epsilon(1e-12));
  CHECK(moran_z(Vector(-2.5 * r), world.w) ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("moran z is roughly standard normal under independence") {
  World world = make_world(100, 13);
  Rng rng(6000);
  const int reps = 200;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < reps; ++i) {
    const double z = moran_z(rng.normal_vector(100), world.w);
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / reps;
  const double sd = std::sqrt(sum2 / reps - mean * mean);
  CHECK(std::abs(mean) < 0.25);
  CHECK(sd > 0.75);
  CHECK(sd < 1.25);
}

TEST_CASE("degenerate moran inputs are rejected") {
  SpatialWeights w = build_from_edges(4, {{0, 1, 1.0}, {2, 3, 1.0}});
  CHECK_THROWS_AS(moran_z(Vector::Ones(4), w), ConstantResiduals);
  CHECK_THROWS_AS(moran_z(Vector::Ones(3), w), Error);
  SpatialWeights tiny = build_from_edges(2, {{0, 1, 1.0}});
  Vector r2(2);
  r2 << 1.0, -1.0;
  CHECK_THROWS_AS(moran_z(r2, tiny), Error);
}

TEST_CASE("residual extractors reproduce their definitions") {
  World world = make_world(70, 15);
  Rng rng(7000);
  world.data.y = mean_signal(world) + rng.normal_vector(70);
  EigenBasis basis = top_l_eigenpairs(world.w, 20);

  FittedModel m = fit(ModelKind::LSLM, world.data, basis, world.w);
  Vector r = lowrank_residuals(m, world.data, basis, world.w);
  Matrix xt = build_design(ModelKind::LSLM, world.data, basis, world.w,
                           *m.theta.rho);
  Vector expect = world.data.y - xt * m.beta - basis.e * m.gamma;
  CHECK((r - expect).norm() < 1e-10);

  FittedModel ols = fit_ols(world.data);
  Vector ro = ols_residuals(ols, world.data);
  CHECK((ro - (world.data.y - world.data.x * ols.beta)).norm() < 1e-12);
  // OLS residuals are orthogonal to the design
  CHECK((world.data.x.transpose() * ro).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("full-rank fitter rejects unsupported kinds and sizes") {
  World world = make_world(30, 17);
  Rng rng(8000);
  world.data.y = mean_signal(world) + rng.normal_vector(30);
  CHECK_THROWS_AS(fit_fullrank(ModelKind::LSLM, world.data, world.w), Error);
  CHECK_THROWS_AS(fit_fullrank(ModelKind::LM, world.data, world.w), Error);
}
