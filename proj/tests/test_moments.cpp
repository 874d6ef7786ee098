#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "lrsm/instrument.hpp"
#include "lrsm/moments.hpp"
#include "lrsm/rng.hpp"
#include "lrsm/weights.hpp"

using namespace lrsm;

namespace {

struct World {
  SpatialWeights w;
  EigenBasis basis;
  DesignData data;
};

World make_world(Index n, Index l, std::uint64_t seed) {
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
  out.data.y = rng.normal_vector(n);
  out.data.names = {"intercept", "x1", "x2"};
  return out;
}

}  // namespace

TEST_CASE("cache blocks equal their dense definitions") {
  World world = make_world(60, 15, 1);
  MomentCache c =
      precompute_moments(world.data, world.basis, world.w, ModelKind::LSLM);
  CHECK(c.f == 1);
  CHECK(c.g == 2);
  CHECK(c.l == 15);
  const Matrix& e = world.basis.e;
  const Matrix& x = world.data.x;
  CHECK((c.m_ff - x.leftCols(1).transpose() * x.leftCols(1)).norm() < 1e-12);
  CHECK((c.m_gg - x.rightCols(2).transpose() * x.rightCols(2)).norm() < 1e-12);
  CHECK((c.m_ef - e.transpose() * x.leftCols(1)).norm() < 1e-12);
  CHECK((c.m_eg - e.transpose() * x.rightCols(2)).norm() < 1e-12);
  CHECK(c.m_yy == doctest::Approx(world.data.y.squaredNorm()).epsilon(1e-14));
  CHECK((c.m_ey - e.transpose() * world.data.y).norm() < 1e-12);
  CHECK((c.ones_projection() - e.transpose() * Vector::Ones(60)).norm() <
        1e-12);
}

TEST_CASE("durbin cache carries the lag block and lag cross moments") {
  World world = make_world(50, 12, 2);
  MomentCache c =
      precompute_moments(world.data, world.basis, world.w, ModelKind::LSDM);
  CHECK(c.g == 4);
  CHECK(c.k_f() == 5);
  const Matrix wd = Matrix(world.w.entries);
  Matrix gexp(50, 4);
  gexp.leftCols(2) = world.data.x.rightCols(2);
  gexp.rightCols(2) = wd * world.data.x.rightCols(2);
  CHECK((c.gcols - gexp).norm() < 1e-12);
  CHECK(c.m_w11 == doctest::Approx(wd.sum()).epsilon(1e-12));
  CHECK((c.m_ew1 - world.basis.e.transpose() * (wd * Vector::Ones(50))).norm() <
        1e-10);
  const Matrix ewe = world.basis.e.transpose() * wd * world.basis.e;
  CHECK((c.m_ewe_diag - ewe.diagonal()).norm() < 1e-10);
  CHECK(c.names.size() == 5);
  CHECK(c.names[3] == "lag:x1");
}

TEST_CASE("alternative intercept moves the ones column into the G block") {
  World world = make_world(40, 10, 3);
  MomentCache c = precompute_moments(world.data, world.basis, world.w,
                                     ModelKind::LSLM, true);
  CHECK(c.f == 0);
  CHECK(c.g == 3);
  CHECK((c.ones_projection() -
         world.basis.e.transpose() * Vector::Ones(40)).norm() < 1e-12);
}

TEST_CASE("assembled moments match the explicit transformed design") {
  for (std::uint64_t seed : {4, 5}) {
    World world = make_world(55, 55, seed);  // full rank: dense form is exact
    for (ModelKind kind : {ModelKind::LSLM, ModelKind::LSDM}) {
      MomentCache c = precompute_moments(world.data, world.basis, world.w, kind);
      for (double rho : {0.0, 0.35, 0.7, -0.2}) {
        Matrix xt =
            build_design(kind, world.data, world.basis, world.w, rho);
        AssembledMoments am = assemble_moments(c, rho, world.basis.lambdas);
        CHECK((am.m_xx - xt.transpose() * xt).norm() <
              1e-9 * std::max(1.0, xt.squaredNorm()));
        CHECK((am.m_ex - world.basis.e.transpose() * xt).norm() < 1e-9);
        CHECK((am.m_xy - xt.transpose() * world.data.y).norm() < 1e-9);
      }
    }
  }
}

TEST_CASE("truncated assembly matches the truncated transform") {
  World world = make_world(70, 18, 6);
  MomentCache c =
      precompute_moments(world.data, world.basis, world.w, ModelKind::LSLM);
  const double rho = 0.5;
  Matrix xt = build_design(ModelKind::LSLM, world.data, world.basis, world.w,
                           rho);
  AssembledMoments am = assemble_moments(c, rho, world.basis.lambdas);
  CHECK((am.m_xx - xt.transpose() * xt).norm() < 1e-9);
  CHECK((am.m_xy - xt.transpose() * world.data.y).norm() < 1e-9);
}

TEST_CASE("y refresh touches only the four response moments") {
  World world = make_world(45, 12, 7);
  MomentCache c =
      precompute_moments(world.data, world.basis, world.w, ModelKind::LSDM);
  const Matrix m_ff = c.m_ff, m_fg = c.m_fg, m_gg = c.m_gg;
  const Matrix m_ef = c.m_ef, m_eg = c.m_eg;

  Rng rng(100);
  Vector y2 = rng.normal_vector(45);
  refresh_y_moments(c, world.basis, y2);

  CHECK(m_ff == c.m_ff);
  CHECK(m_fg == c.m_fg);
  CHECK(m_gg == c.m_gg);
  CHECK(m_ef == c.m_ef);
  CHECK(m_eg == c.m_eg);

  // a cache rebuilt from scratch on the new response agrees bit for bit
  DesignData d2 = world.data;
  d2.y = y2;
  MomentCache fresh =
      precompute_moments(d2, world.basis, world.w, ModelKind::LSDM);
  CHECK(c.m_yy == fresh.m_yy);
  CHECK(c.m_fy == fresh.m_fy);
  CHECK(c.m_gy == fresh.m_gy);
  CHECK(c.m_ey == fresh.m_ey);

  CHECK_THROWS_AS(refresh_y_moments(c, world.basis, Vector::Zero(44)), Error);
}

TEST_CASE("instrument counters track precompute and refresh") {
  instrument::reset_all();
  World world = make_world(30, 8, 8);
  MomentCache c =
      precompute_moments(world.data, world.basis, world.w, ModelKind::LSLM);
  CHECK(instrument::precompute_calls().load() == 1);
  CHECK(instrument::y_refresh_calls().load() == 1);  // the one inside precompute
  refresh_y_moments(c, world.basis, world.data.y);
  CHECK(instrument::y_refresh_calls().load() == 2);
  assemble_moments(c, 0.2, world.basis.lambdas);
  CHECK(instrument::moment_evals().load() == 1);
  // assembly works on (K+L)-sized objects only
  CHECK(instrument::eval_dim_watermark().load() == c.k_f() + c.l);
}

TEST_CASE("the unweighted cross-moment variant is measurably wrong") {
  World world = make_world(50, 50, 9);
  MomentCache c =
      precompute_moments(world.data, world.basis, world.w, ModelKind::LSLM);
  const double rho = 0.6;
  Matrix xt = build_design(ModelKind::LSLM, world.data, world.basis, world.w,
                           rho);
  const Matrix truth = world.basis.e.transpose() * xt;
  const Matrix good = assemble_moments(c, rho, world.basis.lambdas).m_ex;
  const Matrix bad =
      detail::assemble_cross_moment_unweighted(c, rho, world.basis.lambdas);
  CHECK((good - truth).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((bad - truth).cwiseAbs().maxCoeff() > 1e-3);
  // the two variants coincide when there is no dependence
  const Matrix good0 = assemble_moments(c, 0.0, world.basis.lambdas).m_ex;
  const Matrix bad0 =
      detail::assemble_cross_moment_unweighted(c, 0.0, world.basis.lambdas);
  CHECK((good0 - bad0).norm() == 0.0);
}
