#pragma once

#include "lrsm/common.hpp"
#include "lrsm/weights.hpp"

namespace lrsm {

enum class EigenRanking {
  LargestAlgebraic,  // default: leading positive-autocorrelation pairs
  LargestMagnitude,  // literal |lambda| rule
};

struct EigenOptions {
  EigenRanking ranking = EigenRanking::LargestAlgebraic;
  // At or below this size the dense symmetric solver (Householder
  // tridiagonalization + implicit QL) runs; above it, thick-restart Lanczos.
  // Exposed so tests can force the Lanczos path against the dense oracle.
  Index dense_threshold = 500;
  double tolerance = 1e-11;  // Ritz residual tolerance for Lanczos
  int max_cycles = 400;
};

struct EigenBasis {
  Matrix e;        // n×L, orthonormal columns
  Vector lambdas;  // length L, ordered per the ranking used to build it

  Index n() const { return e.rows(); }
  Index l() const { return e.cols(); }

  // First l columns; exact truncation of this object (no recomputation).
  EigenBasis prefix(Index l) const;
};

// Leading l eigenpairs of the scaled proximity matrix. Deterministic: the
// sign convention makes each column's largest-magnitude entry positive
// (lowest index on ties), and numerically repeated eigenvalue clusters are
// re-orthonormalized by column-pivoted QR.
EigenBasis top_l_eigenpairs(const SpatialWeights& w, Index l,
                            const EigenOptions& opts = {});

// Count of eigenvalues passing the threshold rule. Positive-side rule counts
// lambda > max(t, 0); the absolute rule counts |lambda| > t.
int select_l_by_threshold(const Vector& lambdas_all, double t,
                          bool absolute_rule = false);

// Basis whose size is chosen by the threshold rule, growing the computed
// prefix geometrically on the iterative path until the rule's boundary is
// bracketed. absolute rule pairs with LargestMagnitude ranking.
EigenBasis select_by_threshold(const SpatialWeights& w, double t,
                               const EigenOptions& opts = {});

}  // namespace lrsm
