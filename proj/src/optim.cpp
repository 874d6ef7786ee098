#include "lrsm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace lrsm {

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f,
                             const Vector& x0, const NelderMeadOptions& opts) {
  const int dim = static_cast<int>(x0.size());
  const int max_evals = opts.max_evaluations_per_dim * std::max(1, dim);

  NelderMeadResult res;
  res.x = x0;
  res.f = std::numeric_limits<double>::infinity();

  auto eval = [&](const Vector& x) {
    const double v = f(x);
    ++res.evaluations;
    if (v < res.f) {
      res.f = v;
      res.x = x;
    }
    return v;
  };

  // simplex: dim+1 vertices
  std::vector<Vector> xs(dim + 1, x0);
  std::vector<double> fs(dim + 1);
  for (int i = 0; i < dim; ++i) xs[i + 1][i] += opts.initial_step;
  for (int i = 0; i <= dim; ++i) fs[i] = eval(xs[i]);

  // standard coefficients: reflection 1, expansion 2, contraction 1/2, shrink 1/2
  const double alpha = 1.0, gamma = 2.0, beta = 0.5, delta = 0.5;

  std::vector<int> order(dim + 1);
  while (res.evaluations < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fs[a] < fs[b]; });
    const int best = order[0], worst = order[dim], second_worst = order[dim - 1];

    if (fs[worst] - fs[best] < opts.f_tolerance) {
      res.converged = true;
      break;
    }

    Vector centroid = Vector::Zero(dim);
    for (int i = 0; i <= dim; ++i)
      if (i != worst) centroid += xs[i];
    centroid /= dim;

    const Vector xr = centroid + alpha * (centroid - xs[worst]);
    const double fr = eval(xr);

    if (fr < fs[best]) {
      const Vector xe = centroid + gamma * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[worst] = xe;
        fs[worst] = fe;
      } else {
        xs[worst] = xr;
        fs[worst] = fr;
      }
    } else if (fr < fs[second_worst]) {
      xs[worst] = xr;
      fs[worst] = fr;
    } else {
      // contraction: outside if the reflection improved on the worst vertex
      const bool outside = fr < fs[worst];
      const Vector& towards = outside ? xr : xs[worst];
      const Vector xc = centroid + beta * (towards - centroid);
      const double fc = eval(xc);
      if (fc < std::min(fr, fs[worst])) {
        xs[worst] = xc;
        fs[worst] = fc;
      } else {
        for (int i = 0; i <= dim; ++i) {
          if (i == best) continue;
          xs[i] = xs[best] + delta * (xs[i] - xs[best]);
          fs[i] = eval(xs[i]);
        }
      }
    }
  }
  return res;
}

BrentResult brent_minimize(const std::function<double(double)>& f, double a,
                           double b, double x_tolerance, int max_iterations) {
  const double golden = 0.3819660112501051;  // (3 - sqrt(5)) / 2
  const double eps = 1e-12;

  BrentResult res;
  double x = a + golden * (b - a);
  double w = x, v = x;
  double fx = f(x);
  ++res.evaluations;
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int iter = 0; iter < max_iterations; ++iter) {
    const double m = 0.5 * (a + b);
    const double tol = x_tolerance + eps * std::abs(x);
    if (std::abs(x - m) <= 2.0 * tol - 0.5 * (b - a)) {
      res.converged = true;
      break;
    }
    double p = 0.0, q = 0.0, r = 0.0;
    bool parabolic = false;
    if (std::abs(e) > tol) {
      // fit a parabola through (v, fv), (w, fw), (x, fx)
      r = (x - w) * (fx - fv);
      q = (x - v) * (fx - fw);
      p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) &&
          p < q * (b - x)) {
        parabolic = true;
        d = p / q;
        const double u = x + d;
        if (u - a < 2.0 * tol || b - u < 2.0 * tol)
          d = (x < m) ? tol : -tol;
      }
    }
    if (!parabolic) {
      e = (x < m) ? b - x : a - x;
      d = golden * e;
    }
    const double u = (std::abs(d) >= tol) ? x + d : x + ((d > 0.0) ? tol : -tol);
    const double fu = f(u);
    ++res.evaluations;

    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  res.x = x;
  res.f = fx;
  return res;
}

}  // namespace lrsm
