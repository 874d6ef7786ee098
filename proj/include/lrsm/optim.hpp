#pragma once

#include <functional>

#include "lrsm/common.hpp"

namespace lrsm {

struct NelderMeadResult {
  Vector x;            // best point ever evaluated
  double f = 0.0;      // objective there
  int evaluations = 0;
  bool converged = false;  // simplex spread fell below tolerance
};

struct NelderMeadOptions {
  double initial_step = 0.5;   // simplex edge length in each coordinate
  double f_tolerance = 1e-8;   // stop when max-min objective over simplex < tol
  int max_evaluations_per_dim = 500;
};

// Minimizes f over R^dim from x0. Deterministic; tracks the best point seen
// across all trial evaluations, not just accepted simplex vertices.
NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f,
                             const Vector& x0, const NelderMeadOptions& opts = {});

struct BrentResult {
  double x = 0.0;
  double f = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Scalar minimization on [a, b]: golden-section steps refined by parabolic
// interpolation (Brent). Deterministic.
BrentResult brent_minimize(const std::function<double(double)>& f, double a,
                           double b, double x_tolerance = 1e-8,
                           int max_iterations = 200);

}  // namespace lrsm
