#include "lrsm/eigenbasis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lrsm/rng.hpp"

namespace lrsm {
namespace {

bool ranks_before(EigenRanking ranking, double a, double b) {
  if (ranking == EigenRanking::LargestAlgebraic) return a > b;
  if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
  return a > b;  // magnitude ties: positive branch first, deterministically
}

std::vector<int> ranked_order(EigenRanking ranking, const Vector& values) {
  std::vector<int> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return ranks_before(ranking, values[a], values[b]);
  });
  return order;
}

// Deterministic sign: the entry of largest magnitude (first index on ties)
// is made positive.
void fix_signs(Matrix& e) {
  for (Index c = 0; c < e.cols(); ++c) {
    Index arg = 0;
    double best = -1.0;
    for (Index r = 0; r < e.rows(); ++r) {
      const double a = std::abs(e(r, c));
      if (a > best) {
        best = a;
        arg = r;
      }
    }
    if (e(arg, c) < 0.0) e.col(c) = -e.col(c);
  }
}

// Numerically repeated eigenvalues span a subspace whose individual vectors
// are solver-dependent; replace each cluster's block with its column-pivoted
// QR orthonormal factor so the output is stable.
void orthonormalize_clusters(Matrix& e, const Vector& lambdas) {
  constexpr double kClusterTol = 1e-9;
  Index start = 0;
  while (start < lambdas.size()) {
    Index end = start + 1;
    while (end < lambdas.size() &&
           std::abs(lambdas[end] - lambdas[start]) <= kClusterTol)
      ++end;
    if (end - start > 1) {
      const Matrix block = e.middleCols(start, end - start);
      Eigen::ColPivHouseholderQR<Matrix> qr(block);
      Matrix q = qr.householderQ() * Matrix::Identity(e.rows(), end - start);
      e.middleCols(start, end - start) = q;
    }
    start = end;
  }
}

EigenBasis finalize(Matrix e, Vector lambdas) {
  orthonormalize_clusters(e, lambdas);
  fix_signs(e);
  EigenBasis out;
  out.e = std::move(e);
  out.lambdas = std::move(lambdas);
  return out;
}

EigenBasis dense_path(const SpatialWeights& w, Index l, const EigenOptions& opts) {
  const Matrix dense = Matrix(w.entries);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(dense);
  if (solver.info() != Eigen::Success)
    throw ConvergenceFailure("dense symmetric eigensolver failed");
  const auto order = ranked_order(opts.ranking, solver.eigenvalues());
  Matrix e(w.n(), l);
  Vector lambdas(l);
  for (Index c = 0; c < l; ++c) {
    e.col(c) = solver.eigenvectors().col(order[static_cast<std::size_t>(c)]);
    lambdas[c] = solver.eigenvalues()[order[static_cast<std::size_t>(c)]];
  }
  return finalize(std::move(e), std::move(lambdas));
}

// ---- thick-restart Lanczos with full reorthogonalization ----
//
// The projected matrix T is maintained as the exact Rayleigh quotient V'AV
// (dense, small), so restarting with an arbitrary kept set of Ritz vectors
// needs no special bookkeeping: the border coupling reappears when the next
// expansion column is projected. Residual of a Ritz pair (theta, V s) is
// beta * |last component of s|, valid because every A v_j for j < cur lies in
// span(V) after full reorthogonalization.
EigenBasis lanczos_path(const SpatialWeights& w, Index nev,
                        const EigenOptions& opts) {
  const Index n = w.n();
  const SparseMatrix& a = w.entries;
  const Index m = std::min<Index>(n, std::max<Index>(2 * nev, nev + 30));

  Matrix v(n, m);
  Matrix t = Matrix::Zero(m, m);
  Index cur = 0;

  Rng rng(0x0123456789abcdefULL ^ static_cast<std::uint64_t>(n));
  Vector r = rng.normal_vector(n);
  double beta = r.norm();

  auto append_vector = [&]() {
    if (beta <= 1e-13) {
      // invariant subspace hit; restart the residual in a fresh direction
      r = rng.normal_vector(n);
      r -= v.leftCols(cur) * (v.leftCols(cur).transpose() * r).eval();
      r -= v.leftCols(cur) * (v.leftCols(cur).transpose() * r).eval();
      beta = r.norm();
      if (beta <= 1e-13) throw ConvergenceFailure("Lanczos basis collapse");
    }
    v.col(cur) = r / beta;
    Vector av = a * v.col(cur);
    ++cur;
    // two-pass classical Gram–Schmidt against the whole basis
    Vector c = v.leftCols(cur).transpose() * av;
    av.noalias() -= v.leftCols(cur) * c;
    const Vector c2 = v.leftCols(cur).transpose() * av;
    av.noalias() -= v.leftCols(cur) * c2;
    c += c2;
    t.block(0, cur - 1, cur, 1) = c;
    t.block(cur - 1, 0, 1, cur) = c.transpose();
    r = av;
    beta = r.norm();
  };

  for (int cycle = 0; cycle < opts.max_cycles; ++cycle) {
    while (cur < m) append_vector();

    Eigen::SelfAdjointEigenSolver<Matrix> es(t.topLeftCorner(m, m));
    if (es.info() != Eigen::Success)
      throw ConvergenceFailure("projected eigensolve failed");
    const auto order = ranked_order(opts.ranking, es.eigenvalues());

    auto residual = [&](int rank_pos) {
      const int idx = order[static_cast<std::size_t>(rank_pos)];
      return beta * std::abs(es.eigenvectors()(m - 1, idx));
    };
    bool done = (m == n);
    if (!done) {
      done = true;
      for (Index i = 0; i < nev; ++i) {
        const double theta = es.eigenvalues()[order[static_cast<std::size_t>(i)]];
        if (residual(static_cast<int>(i)) >
            opts.tolerance * std::max(1.0, std::abs(theta))) {
          done = false;
          break;
        }
      }
    }

    if (done) {
      Matrix s(m, nev);
      Vector lambdas(nev);
      for (Index c = 0; c < nev; ++c) {
        const int idx = order[static_cast<std::size_t>(c)];
        s.col(c) = es.eigenvectors().col(idx);
        lambdas[c] = es.eigenvalues()[idx];
      }
      Matrix e = v.leftCols(m) * s;
      return finalize(std::move(e), std::move(lambdas));
    }

    // keep the wanted pairs plus a buffer; restart with V S_keep and T = diag
    const Index extra = std::min<Index>(nev, (m - nev) / 2);
    const Index keep = std::min<Index>(nev + extra, m - 1);
    Matrix s(m, keep);
    Vector theta(keep);
    for (Index c = 0; c < keep; ++c) {
      const int idx = order[static_cast<std::size_t>(c)];
      s.col(c) = es.eigenvectors().col(idx);
      theta[c] = es.eigenvalues()[idx];
    }
    const Matrix vk = v.leftCols(m) * s;
    v.leftCols(keep) = vk;
    t.setZero();
    t.topLeftCorner(keep, keep) = theta.asDiagonal();
    cur = keep;
    // r (the current residual vector) is orthogonal to all kept Ritz vectors
  }
  throw ConvergenceFailure("Lanczos did not converge within " +
                           std::to_string(opts.max_cycles) + " restart cycles");
}

}  // namespace

EigenBasis EigenBasis::prefix(Index l_new) const {
  if (l_new < 1 || l_new > l())
    throw BadRank("prefix rank " + std::to_string(l_new) +
                  " outside [1, " + std::to_string(l()) + "]");
  EigenBasis out;
  out.e = e.leftCols(l_new);
  out.lambdas = lambdas.head(l_new);
  return out;
}

EigenBasis top_l_eigenpairs(const SpatialWeights& w, Index l,
                            const EigenOptions& opts) {
  if (!w.scaled)
    throw Error("eigenbasis requires the scaled proximity matrix");
  if (l < 1 || l > w.n())
    throw BadRank("requested rank " + std::to_string(l) + " outside [1, " +
                  std::to_string(w.n()) + "]");
  if (w.n() <= opts.dense_threshold) return dense_path(w, l, opts);
  return lanczos_path(w, l, opts);
}

int select_l_by_threshold(const Vector& lambdas_all, double t,
                          bool absolute_rule) {
  int count = 0;
  for (Index i = 0; i < lambdas_all.size(); ++i) {
    const double lam = lambdas_all[i];
    if (absolute_rule ? (std::abs(lam) > t) : (lam > std::max(t, 0.0))) ++count;
  }
  return count;
}

EigenBasis select_by_threshold(const SpatialWeights& w, double t,
                               const EigenOptions& opts) {
  const bool absolute = opts.ranking == EigenRanking::LargestMagnitude;
  auto passes = [&](double lam) {
    return absolute ? (std::abs(lam) > t) : (lam > std::max(t, 0.0));
  };
  if (w.n() <= opts.dense_threshold) {
    const EigenBasis full = top_l_eigenpairs(w, w.n(), opts);
    const int count = select_l_by_threshold(full.lambdas, t, absolute);
    if (count == 0)
      throw BadRank("no eigenvalue passes threshold " + std::to_string(t));
    return full.prefix(count);
  }
  Index l = std::min<Index>(w.n(), 64);
  for (;;) {
    EigenBasis basis = top_l_eigenpairs(w, l, opts);
    // ranked order: once the last computed pair fails the rule, the passing
    // prefix is complete
    if (!passes(basis.lambdas[l - 1]) || l == w.n()) {
      Index count = 0;
      while (count < l && passes(basis.lambdas[count])) ++count;
      if (count == 0)
        throw BadRank("no eigenvalue passes threshold " + std::to_string(t));
      return basis.prefix(count);
    }
    l = std::min<Index>(w.n(), 2 * l);
  }
}

}  // namespace lrsm
