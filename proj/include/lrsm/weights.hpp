#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lrsm/common.hpp"

namespace lrsm {

// Symmetric zero-diagonal spatial proximity matrix. lambda_max / lambda_min
// always describe the stored entries: after scaling, lambda_max is 1 and
// lambda_min is the (negative) eigenvalue ratio.
struct SpatialWeights {
  SparseMatrix entries;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  bool scaled = false;

  Index n() const { return entries.rows(); }

  // Lower end of the open feasible interval for dependence parameters.
  double min_eigen_ratio() const {
    return scaled ? lambda_min : lambda_min / lambda_max;
  }
};

// Binary adjacency from the Delaunay triangulation of n×2 coordinates.
// Unscaled. Throws TooFewPoints (n < 3), DuplicatePoints (pairs closer than
// 1e-12), DegenerateMatrix (all points collinear).
SpatialWeights build_delaunay_adjacency(const Matrix& coords);

// Edge set of the Delaunay triangulation, each pair once with first < second.
std::vector<std::pair<Index, Index>> delaunay_edges(const Matrix& coords);

// Whitespace-separated "i j weight" lines, '#' comments. Symmetrized by
// max(w_ij, w_ji). n is inferred as max index + 1 unless n_hint > 0.
SpatialWeights load_edge_list(const std::string& path, bool one_based = false,
                              Index n_hint = 0);

// Construction from explicit undirected weighted edges (validation shared
// with the file loader).
SpatialWeights build_from_edges(
    Index n, const std::vector<std::tuple<Index, Index, double>>& edges);

// Divides all entries by the largest eigenvalue of the raw matrix, found by
// shift-free power iteration; also records the smallest eigenvalue (shifted
// iteration). Scaling twice is an error, not a no-op.
SpatialWeights scale_by_max_eigenvalue(const SpatialWeights& w);

// Symmetric degree normalization: entry (i, j) is divided by sqrt(s_i s_j),
// where s_i is the absolute row sum. Keeps symmetry and the zero diagonal;
// rows with no neighbours are left untouched. For a connected nonnegative
// matrix the normalized spectrum lies in [-1, 1] with top eigenvalue 1, so a
// subsequent scale_by_max_eigenvalue changes little besides recording the
// spectrum endpoints. Uniform scaling of the input cancels, hence the result
// is declared unscaled regardless of the input's flag.
SpatialWeights symmetric_normalize(const SpatialWeights& w);

// Extreme eigenvalues (max, min) of a symmetric sparse matrix by power
// iteration with a fixed pseudo-random start; pinned tolerance/iteration cap.
std::pair<double, double> extreme_eigenvalues_power(const SparseMatrix& a,
                                                    double tolerance = 1e-10,
                                                    int max_iterations = 10000);

}  // namespace lrsm
