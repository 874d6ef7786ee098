#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "lrsm/eigenbasis.hpp"
#include "lrsm/rng.hpp"
#include "lrsm/weights.hpp"

using namespace lrsm;

namespace {

SpatialWeights random_scaled_w(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix pts(n, 2);
  for (Index i = 0; i < n; ++i) {
    pts(i, 0) = rng.normal();
    pts(i, 1) = rng.normal();
  }
  return scale_by_max_eigenvalue(build_delaunay_adjacency(pts));
}

// Reference spectrum, sorted by the requested ranking.
Vector dense_sorted(const SpatialWeights& w, EigenRanking ranking) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(w.entries),
                                           Eigen::EigenvaluesOnly);
  std::vector<double> ev(es.eigenvalues().data(),
                         es.eigenvalues().data() + w.n());
  if (ranking == EigenRanking::LargestAlgebraic)
    std::sort(ev.begin(), ev.end(), std::greater<>());
  else
    std::sort(ev.begin(), ev.end(),
              [](double a, double b) { return std::abs(a) > std::abs(b); });
  return Eigen::Map<Vector>(ev.data(), static_cast<Index>(ev.size()));
}

}  // namespace

TEST_CASE("dense path matches a reference eigensolve") {
  SpatialWeights w = random_scaled_w(60, 11);
  const Index l = 12;
  EigenBasis b = top_l_eigenpairs(w, l);
  Vector ref = dense_sorted(w, EigenRanking::LargestAlgebraic);
  for (Index i = 0; i < l; ++i)
    CHECK(b.lambdas[i] == doctest::Approx(ref[i]).epsilon(1e-10));

  // residuals W e = lambda e and orthonormal columns
  Matrix we = Matrix(w.entries) * b.e;
  for (Index i = 0; i < l; ++i)
    CHECK((we.col(i) - b.lambdas[i] * b.e.col(i)).norm() < 1e-9);
  CHECK((b.e.transpose() * b.e - Matrix::Identity(l, l)).norm() < 1e-10);
}

TEST_CASE("lanczos path agrees with the dense path") {
  SpatialWeights w = random_scaled_w(150, 5);
  const Index l = 20;
  EigenOptions dense_opts;
  dense_opts.dense_threshold = 10000;
  EigenOptions lanczos_opts;
  lanczos_opts.dense_threshold = 0;  // force the iterative path

  EigenBasis d = top_l_eigenpairs(w, l, dense_opts);
  EigenBasis z = top_l_eigenpairs(w, l, lanczos_opts);
  for (Index i = 0; i < l; ++i)
    CHECK(z.lambdas[i] == doctest::Approx(d.lambdas[i]).epsilon(1e-8));
  // compare the subspaces through their projectors (individual columns may
  // differ inside numerically repeated clusters)
  CHECK((z.e * z.e.transpose() - d.e * d.e.transpose()).norm() < 1e-6);
  CHECK((z.e.transpose() * z.e - Matrix::Identity(l, l)).norm() < 1e-9);
}

TEST_CASE("magnitude ranking orders by absolute value") {
  SpatialWeights w = random_scaled_w(80, 7);
  EigenOptions opts;
  opts.ranking = EigenRanking::LargestMagnitude;
  EigenBasis b = top_l_eigenpairs(w, 15, opts);
  Vector ref = dense_sorted(w, EigenRanking::LargestMagnitude);
  for (Index i = 0; i < 15; ++i)
    CHECK(std::abs(b.lambdas[i]) ==
          doctest::Approx(std::abs(ref[i])).epsilon(1e-10));
  for (Index i = 0; i + 1 < 15; ++i)
    CHECK(std::abs(b.lambdas[i]) >= std::abs(b.lambdas[i + 1]) - 1e-12);
}

TEST_CASE("prefix is an exact truncation") {
  SpatialWeights w = random_scaled_w(50, 13);
  EigenBasis b = top_l_eigenpairs(w, 10);
  EigenBasis p = b.prefix(4);
  CHECK(p.l() == 4);
  CHECK(p.n() == 50);
  CHECK(p.e == b.e.leftCols(4));
  CHECK(p.lambdas == b.lambdas.head(4));
  CHECK_THROWS_AS(b.prefix(11), BadRank);
  CHECK_THROWS_AS(b.prefix(0), BadRank);
}

TEST_CASE("construction is deterministic") {
  SpatialWeights w = random_scaled_w(70, 19);
  EigenBasis a = top_l_eigenpairs(w, 16);
  EigenBasis b = top_l_eigenpairs(w, 16);
  CHECK(a.e == b.e);
  CHECK(a.lambdas == b.lambdas);

  // sign convention: the largest-magnitude entry of each column is positive
  for (Index c = 0; c < a.l(); ++c) {
    Index arg = 0;
    a.e.col(c).cwiseAbs().maxCoeff(&arg);
    CHECK(a.e(arg, c) > 0.0);
  }
}

TEST_CASE("rank bounds are enforced") {
  SpatialWeights w = random_scaled_w(20, 23);
  CHECK_THROWS_AS(top_l_eigenpairs(w, 0), BadRank);
  CHECK_THROWS_AS(top_l_eigenpairs(w, 21), BadRank);
  const Matrix pts = Matrix::Random(20, 2);
  SpatialWeights raw = build_delaunay_adjacency(pts);
  CHECK_THROWS_AS(top_l_eigenpairs(raw, 5), Error);
}

TEST_CASE("threshold count follows the two rules") {
  Vector lam(6);
  lam << 1.0, 0.5, 0.25, 0.0, -0.3, -0.6;
  CHECK(select_l_by_threshold(lam, 0.2) == 3);
  CHECK(select_l_by_threshold(lam, 0.0) == 3);   // strictly positive
  CHECK(select_l_by_threshold(lam, -0.5) == 3);  // clamped at zero
  CHECK(select_l_by_threshold(lam, 0.6) == 1);
  CHECK(select_l_by_threshold(lam, 0.2, true) == 5);
  CHECK(select_l_by_threshold(lam, 0.4, true) == 3);
  CHECK(select_l_by_threshold(lam, 0.55, true) == 2);
}

TEST_CASE("threshold selection matches counting on the full spectrum") {
  SpatialWeights w = random_scaled_w(90, 29);
  Vector all = dense_sorted(w, EigenRanking::LargestAlgebraic);
  for (double t : {0.1, 0.25, 0.5}) {
    EigenBasis b = select_by_threshold(w, t);
    CHECK(b.l() == select_l_by_threshold(all, t));
    for (Index i = 0; i < b.l(); ++i) CHECK(b.lambdas[i] > t);
  }

  EigenOptions abs_opts;
  abs_opts.ranking = EigenRanking::LargestMagnitude;
  Vector all_abs = dense_sorted(w, EigenRanking::LargestMagnitude);
  EigenBasis ba = select_by_threshold(w, 0.4, abs_opts);
  CHECK(ba.l() == select_l_by_threshold(all_abs, 0.4, true));
  for (Index i = 0; i < ba.l(); ++i) CHECK(std::abs(ba.lambdas[i]) > 0.4);

  CHECK_THROWS_AS(select_by_threshold(w, 2.0), BadRank);
}

TEST_CASE("iterative threshold selection agrees with the dense rule") {
  SpatialWeights w = random_scaled_w(140, 31);
  Vector all = dense_sorted(w, EigenRanking::LargestAlgebraic);
  EigenOptions iter_opts;
  iter_opts.dense_threshold = 0;
  EigenBasis b = select_by_threshold(w, 0.3, iter_opts);
  CHECK(b.l() == select_l_by_threshold(all, 0.3));
}
