#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "lrsm/rng.hpp"
#include "lrsm/weights.hpp"

using namespace lrsm;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

// Positive when d lies strictly inside the circumcircle of (a, b, c); the
// triple is re-oriented counter-clockwise first.
double incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
  const double orient =
      (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
  Eigen::Matrix3d m;
  auto row = [&](int r, const Eigen::Vector2d& p) {
    const double dx = p.x() - d.x(), dy = p.y() - d.y();
    m(r, 0) = dx;
    m(r, 1) = dy;
    m(r, 2) = dx * dx + dy * dy;
  };
  row(0, a);
  row(1, b);
  row(2, c);
  const double det = m.determinant();
  return orient >= 0 ? det : -det;
}

// A pair is a Delaunay edge exactly when some circle through both endpoints
// is empty; for points in general position it is enough to scan circumcircles
// through each third point.
std::set<std::pair<Index, Index>> brute_force_delaunay(const Matrix& pts) {
  const Index n = pts.rows();
  std::set<std::pair<Index, Index>> edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      bool found = false;
      for (Index k = 0; k < n && !found; ++k) {
        if (k == i || k == j) continue;
        bool empty = true;
        for (Index m = 0; m < n && empty; ++m) {
          if (m == i || m == j || m == k) continue;
          if (incircle(pts.row(i), pts.row(j), pts.row(k), pts.row(m)) > 1e-9)
            empty = false;
        }
        found = empty;
      }
      if (found) edges.insert({i, j});
    }
  return edges;
}

}  // namespace

TEST_CASE("triangle gives all three edges") {
  Matrix pts(3, 2);
  pts << 0, 0, 1, 0, 0.3, 1.2;
  const auto edges = delaunay_edges(pts);
  CHECK(edges.size() == 3);
  SpatialWeights w = build_delaunay_adjacency(pts);
  CHECK(w.n() == 3);
  CHECK(w.entries.nonZeros() == 6);  // symmetric storage
  CHECK(w.entries.coeff(0, 1) == 1.0);
  CHECK(w.entries.coeff(0, 0) == 0.0);
}

TEST_CASE("convex quadrilateral picks the empty-circumcircle diagonal") {
  Matrix pts(4, 2);
  pts << 0, 0, 3, 0, 4, 2, 0.5, 2.5;
  const auto got = delaunay_edges(pts);
  const auto want = brute_force_delaunay(pts);
  std::set<std::pair<Index, Index>> got_set(got.begin(), got.end());
  CHECK(got_set == want);
  CHECK(got.size() == 5);  // hull plus exactly one diagonal
}

TEST_CASE("interior point is connected to all triangle corners") {
  Matrix pts(4, 2);
  pts << 0, 0, 4, 0, 2, 3, 2, 1;
  const auto edges = delaunay_edges(pts);
  CHECK(edges.size() == 6);
}

TEST_CASE("random point sets match the brute-force oracle") {
  Rng rng(99);
  for (int rep = 0; rep < 8; ++rep) {
    const Index n = 25;
    Matrix pts(n, 2);
    for (Index i = 0; i < n; ++i) {
      pts(i, 0) = rng.normal();
      pts(i, 1) = rng.normal();
    }
    const auto got = delaunay_edges(pts);
    std::set<std::pair<Index, Index>> got_set(got.begin(), got.end());
    CHECK(got_set == brute_force_delaunay(pts));
  }
}

TEST_CASE("delaunay construction is deterministic") {
  Rng rng(3);
  Matrix pts(40, 2);
  for (Index i = 0; i < 40; ++i) {
    pts(i, 0) = rng.normal();
    pts(i, 1) = rng.normal();
  }
  const auto a = delaunay_edges(pts);
  const auto b = delaunay_edges(pts);
  CHECK(a == b);
}

TEST_CASE("degenerate inputs are rejected") {
  Matrix two(2, 2);
  two << 0, 0, 1, 1;
  CHECK_THROWS_AS(build_delaunay_adjacency(two), TooFewPoints);

  Matrix dup(3, 2);
  dup << 0, 0, 1, 0, 1, 1e-13;
  CHECK_THROWS_AS(build_delaunay_adjacency(dup), DuplicatePoints);

  Matrix line(4, 2);
  line << 0, 0, 1, 1, 2, 2, 3, 3;
  CHECK_THROWS_AS(build_delaunay_adjacency(line), DegenerateMatrix);
}

TEST_CASE("edge list loader parses, symmetrizes, and validates") {
  const std::string path = write_temp(
      "lrsm_edges_ok.txt",
      "# comment line\n"
      "0 1 2.0\n"
      "1 0 3.0   # mirrored entry, max wins\n"
      "\n"
      "2 1 1.5\n");
  SpatialWeights w = load_edge_list(path);
  CHECK(w.n() == 3);
  CHECK(w.entries.coeff(0, 1) == 3.0);
  CHECK(w.entries.coeff(1, 0) == 3.0);
  CHECK(w.entries.coeff(1, 2) == 1.5);
  CHECK(w.entries.coeff(0, 2) == 0.0);

  // n_hint adds isolated trailing vertices
  SpatialWeights padded = load_edge_list(path, false, 5);
  CHECK(padded.n() == 5);

  const std::string one_based = write_temp("lrsm_edges_1b.txt", "1 2 1\n2 3 1\n");
  SpatialWeights wb = load_edge_list(one_based, true);
  CHECK(wb.n() == 3);
  CHECK(wb.entries.coeff(0, 1) == 1.0);

  CHECK_THROWS_AS(load_edge_list("/nonexistent/file/path"), Error);
  CHECK_THROWS_AS(
      load_edge_list(write_temp("lrsm_edges_bad.txt", "0 1\n")), ParseError);
  CHECK_THROWS_AS(
      load_edge_list(write_temp("lrsm_edges_trail.txt", "0 1 1 junk\n")),
      ParseError);
  CHECK_THROWS_AS(
      load_edge_list(write_temp("lrsm_edges_loop.txt", "2 2 1.0\n")), SelfLoop);
  CHECK_THROWS_AS(
      load_edge_list(write_temp("lrsm_edges_neg.txt", "0 1 -2.0\n")),
      ParseError);
}

TEST_CASE("power-iteration extremes match the dense spectrum") {
  Rng rng(17);
  Matrix pts(30, 2);
  for (Index i = 0; i < 30; ++i) {
    pts(i, 0) = rng.normal();
    pts(i, 1) = rng.normal();
  }
  SpatialWeights w = build_delaunay_adjacency(pts);
  Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(w.entries));
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  const auto [pmax, pmin] = extreme_eigenvalues_power(w.entries);
  CHECK(pmax == doctest::Approx(hi).epsilon(1e-7));
  CHECK(pmin == doctest::Approx(lo).epsilon(1e-7));
}

TEST_CASE("symmetric normalization divides by root degree products") {
  // path graph 0-1-2: degrees (1, 2, 1)
  SpatialWeights path = build_from_edges(3, {{0, 1, 1.0}, {1, 2, 1.0}});
  SpatialWeights norm = symmetric_normalize(path);
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  CHECK(norm.entries.coeff(0, 1) == doctest::Approx(inv_rt2));
  CHECK(norm.entries.coeff(1, 0) == doctest::Approx(inv_rt2));
  CHECK(norm.entries.coeff(1, 2) == doctest::Approx(inv_rt2));
  CHECK(norm.entries.coeff(0, 0) == 0.0);
  CHECK(!norm.scaled);

  // weighted rows: entry (i, j) / sqrt(s_i s_j) with s the absolute row sums
  SpatialWeights wted = build_from_edges(3, {{0, 1, 2.0}, {1, 2, 6.0}});
  SpatialWeights wn = symmetric_normalize(wted);
  CHECK(wn.entries.coeff(0, 1) == doctest::Approx(2.0 / std::sqrt(2.0 * 8.0)));
  CHECK(wn.entries.coeff(1, 2) == doctest::Approx(6.0 / std::sqrt(8.0 * 6.0)));

  // an isolated vertex stays isolated and breaks nothing
  SpatialWeights padded = build_from_edges(4, {{0, 1, 1.0}, {1, 2, 1.0}});
  CHECK_NOTHROW(symmetric_normalize(padded));

  // uniform rescaling of the input cancels out
  SpatialWeights doubled = build_from_edges(3, {{0, 1, 2.0}, {1, 2, 2.0}});
  SpatialWeights dn = symmetric_normalize(doubled);
  CHECK(dn.entries.coeff(0, 1) == doctest::Approx(inv_rt2));
}

TEST_CASE("normalized connected adjacency has top eigenvalue one") {
  Rng rng(29);
  Matrix pts(40, 2);
  for (Index i = 0; i < 40; ++i) {
    pts(i, 0) = rng.normal();
    pts(i, 1) = rng.normal();
  }
  SpatialWeights norm = symmetric_normalize(build_delaunay_adjacency(pts));
  // symmetry and zero diagonal survive
  const Matrix dense(norm.entries);
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(dense.diagonal().cwiseAbs().maxCoeff() == 0.0);
  // the square-root-degree vector is an eigenvector with eigenvalue 1, which
  // is also the largest in modulus
  Eigen::SelfAdjointEigenSolver<Matrix> es(dense);
  CHECK(es.eigenvalues().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(es.eigenvalues().minCoeff() > -1.0 - 1e-12);

  SpatialWeights scaled = scale_by_max_eigenvalue(norm);
  CHECK(scaled.scaled);
  CHECK(scaled.min_eigen_ratio() ==
        doctest::Approx(es.eigenvalues().minCoeff()).epsilon(1e-7));
}

TEST_CASE("scaling divides by the top eigenvalue exactly once") {
  Rng rng(21);
  Matrix pts(25, 2);
  for (Index i = 0; i < 25; ++i) {
    pts(i, 0) = rng.normal();
    pts(i, 1) = rng.normal();
  }
  SpatialWeights raw = build_delaunay_adjacency(pts);
  Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(raw.entries));
  const double dense_max = es.eigenvalues().maxCoeff();
  const double dense_min = es.eigenvalues().minCoeff();

  SpatialWeights s = scale_by_max_eigenvalue(raw);
  CHECK(s.scaled);
  CHECK(s.lambda_max == 1.0);
  CHECK(s.min_eigen_ratio() ==
        doctest::Approx(dense_min / dense_max).epsilon(1e-7));
  // entries are the raw ones divided through
  for (int k = 0; k < raw.entries.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(raw.entries, k); it; ++it)
      CHECK(s.entries.coeff(it.row(), it.col()) ==
            doctest::Approx(it.value() / dense_max).epsilon(1e-6));
  CHECK_THROWS_AS(scale_by_max_eigenvalue(s), Error);
}
