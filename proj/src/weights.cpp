#include "lrsm/weights.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "lrsm/rng.hpp"

namespace lrsm {

SpatialWeights build_from_edges(
    Index n, const std::vector<std::tuple<Index, Index, double>>& edges) {
  // undirected max-symmetrization: repeated or mirrored entries collapse
  std::map<std::pair<Index, Index>, double> merged;
  for (const auto& [i, j, v] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw ParseError("edge index out of range: " + std::to_string(i) + " " +
                       std::to_string(j) + " with n=" + std::to_string(n));
    if (i == j) {
      if (v != 0.0)
        throw SelfLoop("self loop at index " + std::to_string(i));
      continue;
    }
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ParseError("edge weight must be finite and nonnegative, got " +
                       std::to_string(v));
    if (v == 0.0) continue;
    const auto key = std::minmax(i, j);
    auto [it, inserted] = merged.emplace(key, v);
    if (!inserted) it->second = std::max(it->second, v);
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(merged.size() * 2);
  for (const auto& [key, v] : merged) {
    trips.emplace_back(key.first, key.second, v);
    trips.emplace_back(key.second, key.first, v);
  }
  SpatialWeights w;
  w.entries.resize(n, n);
  w.entries.setFromTriplets(trips.begin(), trips.end());
  w.entries.makeCompressed();
  return w;
}

SpatialWeights load_edge_list(const std::string& path, bool one_based,
                              Index n_hint) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open edge list file: " + path);

  std::vector<std::tuple<Index, Index, double>> edges;
  Index max_index = -1;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    long long i, j;
    double v;
    if (!(ls >> i)) continue;  // blank or comment-only line
    if (!(ls >> j >> v))
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected \"i j weight\"");
    std::string trailing;
    if (ls >> trailing)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": trailing token \"" + trailing + "\"");
    if (one_based) {
      --i;
      --j;
    }
    if (i < 0 || j < 0)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": negative index" +
                       (one_based ? " (after 1-based adjustment)" : ""));
    if (i == j && v != 0.0)
      throw SelfLoop(path + ":" + std::to_string(line_no) + ": self loop at " +
                     std::to_string(one_based ? i + 1 : i));
    max_index = std::max({max_index, static_cast<Index>(i), static_cast<Index>(j)});
    edges.emplace_back(i, j, v);
  }
  const Index n = n_hint > 0 ? n_hint : max_index + 1;
  if (n <= 0) throw ParseError(path + ": no edges found");
  return build_from_edges(n, edges);
}

std::pair<double, double> extreme_eigenvalues_power(const SparseMatrix& a,
                                                    double tolerance,
                                                    int max_iterations) {
  const Index n = a.rows();
  if (n == 0) throw DegenerateMatrix("empty matrix");

  // Fixed pseudo-random starts: strictly positive for the top eigenvalue
  // (guaranteed overlap with the Perron vector of a nonnegative matrix),
  // signed for the shifted iteration. Rayleigh-quotient error is
  // residual²/gap, so the estimate is accepted at the iteration cap.
  auto iterate = [&](auto&& mul, Vector v) -> double {
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < max_iterations; ++it) {
      Vector av = mul(v);
      lambda = v.dot(av);
      const double resid = (av - lambda * v).norm();
      if (resid <= tolerance * std::max(1.0, std::abs(lambda))) break;
      const double norm = av.norm();
      if (norm <= 1e-300) return 0.0;  // v in the null space of a zero-ish map
      v = av / norm;
    }
    return lambda;
  };

  Rng rng(0xC0FFEEULL + static_cast<std::uint64_t>(n));
  Vector v0(n), v1(n);
  for (Index i = 0; i < n; ++i) {
    const double z = rng.normal();
    v0[i] = std::abs(z) + 1e-3;
    v1[i] = rng.normal();
  }

  const double lambda_max =
      iterate([&](const Vector& v) { return Vector(a * v); }, v0);
  const double shifted = iterate(
      [&](const Vector& v) { return Vector(a * v - lambda_max * v); }, v1);
  const double lambda_min = shifted + lambda_max;
  return {lambda_max, lambda_min};
}

SpatialWeights scale_by_max_eigenvalue(const SpatialWeights& w) {
  if (w.scaled)
    throw Error("weights already scaled; scaling twice is not permitted");
  const auto [lmax, lmin] = extreme_eigenvalues_power(w.entries);
  if (lmax <= 1e-10)
    throw DegenerateMatrix("largest eigenvalue is not positive (" +
                           std::to_string(lmax) + "); cannot scale");
  SpatialWeights out;
  out.entries = w.entries * (1.0 / lmax);
  out.entries.makeCompressed();
  out.lambda_max = 1.0;
  out.lambda_min = lmin / lmax;
  out.scaled = true;
  return out;
}

SpatialWeights symmetric_normalize(const SpatialWeights& w) {
  const Index n = w.n();
  if (n == 0) throw DegenerateMatrix("empty matrix");
  Vector row_sum = Vector::Zero(n);
  for (int k = 0; k < w.entries.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(w.entries, k); it; ++it)
      row_sum[it.row()] += std::abs(it.value());
  Vector inv_sqrt(n);
  for (Index i = 0; i < n; ++i)
    inv_sqrt[i] = row_sum[i] > 0.0 ? 1.0 / std::sqrt(row_sum[i]) : 0.0;
  SpatialWeights out;
  out.entries = w.entries;
  for (int k = 0; k < out.entries.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(out.entries, k); it; ++it)
      it.valueRef() = it.value() * inv_sqrt[it.row()] * inv_sqrt[it.col()];
  out.entries.makeCompressed();
  return out;
}

}  // namespace lrsm
