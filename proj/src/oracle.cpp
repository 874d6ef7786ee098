#include "lrsm/oracle.hpp"

#include <cmath>

#include "lrsm/optim.hpp"

namespace lrsm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Matrix checked_spd_inverse(const Matrix& a, const char* what) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success)
    throw SingularSystem(std::string(what) + " is not positive definite");
  return llt.solve(Matrix::Identity(a.rows(), a.cols()));
}

// Scalar pieces that make each profile evaluation O(K²).
struct ProfilePieces {
  ModelKind kind;
  Index n = 0, k = 0;
  // SLM: rss(rho) = e0 − 2·rho·e1 + rho²·e2 after projecting out X
  double e0 = 0, e1 = 0, e2 = 0;
  // SEM: polynomial coefficients in phi of X'Z'ZX, X'Z'Zy, y'Z'Zy
  Matrix xx, xwx, xwwx;
  Vector xy, xwy, xwwy;
  double yy = 0, ywy = 0, ywwy = 0;
};

ProfilePieces build_pieces(ModelKind kind, const DesignData& data,
                           const SpatialWeights& w) {
  ProfilePieces p;
  p.kind = kind;
  p.n = data.y.size();
  p.k = data.x.cols();
  const Vector wy = w.entries * data.y;
  p.xx = data.x.transpose() * data.x;
  if (kind == ModelKind::SLM) {
    const Matrix xx_inv = checked_spd_inverse(p.xx, "X'X");
    auto proj = [&](const Vector& a, const Vector& b) {
      return a.dot(b) -
             (data.x.transpose() * a).dot(xx_inv * (data.x.transpose() * b));
    };
    p.e0 = proj(data.y, data.y);
    p.e1 = proj(data.y, wy);
    p.e2 = proj(wy, wy);
  } else {
    const Matrix wx = w.entries * data.x;
    p.xwx = data.x.transpose() * wx;
    p.xwwx = wx.transpose() * wx;
    p.xy = data.x.transpose() * data.y;
    p.xwy = data.x.transpose() * wy;  // equals wx' y by symmetry
    p.xwwy = wx.transpose() * wy;
    p.yy = data.y.squaredNorm();
    p.ywy = data.y.dot(wy);
    p.ywwy = wy.squaredNorm();
  }
  return p;
}

double profile_rss(const ProfilePieces& p, double theta, Vector* beta_out) {
  if (p.kind == ModelKind::SLM) {
    if (beta_out) beta_out->resize(0);  // recovered separately at the optimum
    return std::max(p.e0 - 2.0 * theta * p.e1 + theta * theta * p.e2, 0.0);
  }
  const Matrix xax = p.xx - 2.0 * theta * p.xwx + theta * theta * p.xwwx;
  const Vector xay = p.xy - 2.0 * theta * p.xwy + theta * theta * p.xwwy;
  const double yay = p.yy - 2.0 * theta * p.ywy + theta * theta * p.ywwy;
  Eigen::LLT<Matrix> llt(xax);
  if (llt.info() != Eigen::Success)
    throw SingularSystem("X'Z'ZX is not positive definite");
  const Vector beta = llt.solve(xay);
  if (beta_out) *beta_out = beta;
  return std::max(yay - xay.dot(beta), 0.0);
}

double profile_value(const ProfilePieces& p, const Vector& lambdas,
                     double theta) {
  const double rss = std::max(profile_rss(p, theta, nullptr), 1e-300);
  double log_det = 0.0;
  for (Index i = 0; i < lambdas.size(); ++i) {
    const double f = 1.0 - theta * lambdas[i];
    if (f <= 0.0)
      throw PoleProximity("I - theta*W loses positive definiteness");
    log_det += std::log(f);
  }
  const double dn = static_cast<double>(p.n);
  return -0.5 * dn * (kLog2Pi + 1.0) - 0.5 * dn * std::log(rss / dn) +
         log_det;
}

Vector dense_spectrum(const SpatialWeights& w) {
  if (w.n() > 5000)
    throw SizeGuard("full-rank oracle needs the dense spectrum; n = " +
                    std::to_string(w.n()) + " exceeds 5000");
  Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(w.entries),
                                           Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw ConvergenceFailure("dense eigenvalue solve failed");
  return es.eigenvalues();
}

}  // namespace

double fullrank_profile_loglik(ModelKind kind, const DesignData& data,
                               const SpatialWeights& w,
                               const Vector& lambdas_all, double theta) {
  const ProfilePieces p = build_pieces(kind, data, w);
  return profile_value(p, lambdas_all, theta);
}

FullRankFit fit_fullrank(ModelKind kind, const DesignData& data,
                         const SpatialWeights& w, const Vector& lambdas_all) {
  if (kind != ModelKind::SEM && kind != ModelKind::SLM)
    throw Error("full-rank oracle supports SEM and SLM only");
  validate_design(data);
  if (!w.scaled) throw Error("full-rank oracle requires the scaled matrix");
  if (lambdas_all.size() != w.n())
    throw Error("oracle needs the full spectrum (one eigenvalue per unit)");

  const ProfilePieces p = build_pieces(kind, data, w);
  const double lo = w.min_eigen_ratio() + 1e-6;
  const double hi = 1.0 - 1e-6;

  const BrentResult br = brent_minimize(
      [&](double t) { return -profile_value(p, lambdas_all, t); }, lo, hi,
      1e-8);
  if (!br.converged)
    throw ConvergenceFailure("profile-likelihood search did not converge");

  FullRankFit fit;
  fit.kind = kind;
  fit.theta = br.x;
  fit.loglik = -br.f;
  fit.evaluations = br.evaluations;
  fit.names = data.names;

  const Index n = p.n;
  if (kind == ModelKind::SLM) {
    const Vector zy = data.y - fit.theta * (w.entries * data.y);
    const Matrix xx_inv = checked_spd_inverse(p.xx, "X'X");
    fit.beta = xx_inv * (data.x.transpose() * zy);
    fit.residuals = zy - data.x * fit.beta;
    fit.sigma2 = fit.residuals.squaredNorm() / static_cast<double>(n);
    fit.se_beta = (fit.sigma2 * xx_inv.diagonal().array()).sqrt().matrix();
  } else {
    Vector beta;
    const double rss = profile_rss(p, fit.theta, &beta);
    fit.beta = beta;
    const Vector u = data.y - data.x * beta;
    fit.residuals = u - fit.theta * (w.entries * u);
    fit.sigma2 = rss / static_cast<double>(n);
    const Matrix xax = p.xx - 2.0 * fit.theta * p.xwx +
                       fit.theta * fit.theta * p.xwwx;
    fit.se_beta =
        (fit.sigma2 * checked_spd_inverse(xax, "X'Z'ZX").diagonal().array())
            .sqrt()
            .matrix();
  }
  return fit;
}

FullRankFit fit_fullrank(ModelKind kind, const DesignData& data,
                         const SpatialWeights& w) {
  return fit_fullrank(kind, data, w, dense_spectrum(w));
}

double moran_z(const Vector& residuals, const SpatialWeights& w0) {
  const Index n = residuals.size();
  if (n != w0.n()) throw Error("residual length does not match the matrix");
  if (n < 3) throw Error("Moran z needs at least 3 observations");

  const double scale = residuals.cwiseAbs().maxCoeff();
  const double mean = residuals.mean();
  if ((residuals.array() - mean).abs().maxCoeff() <=
      1e-12 * std::max(1.0, scale))
    throw ConstantResiduals("residuals are (numerically) constant");

  double s0 = 0.0, s1 = 0.0;
  Vector row_sums = Vector::Zero(n);
  for (int outer = 0; outer < w0.entries.outerSize(); ++outer)
    for (SparseMatrix::InnerIterator it(w0.entries, outer); it; ++it) {
      s0 += it.value();
      s1 += 2.0 * it.value() * it.value();
      row_sums[it.row()] += it.value();
    }
  if (s0 <= 0.0) throw Error("proximity matrix has no edges");
  const double s2 = 4.0 * row_sums.squaredNorm();

  const double rr = residuals.squaredNorm();
  const double rwr = residuals.dot(w0.entries * residuals);
  const double dn = static_cast<double>(n);
  const double mc = (dn / s0) * (rwr / rr);
  const double e_mc = -1.0 / (dn - 1.0);
  const double var = (dn * dn * s1 - dn * s2 + 3.0 * s0 * s0) /
                         ((dn * dn - 1.0) * s0 * s0) -
                     e_mc * e_mc;
  return (mc - e_mc) / std::sqrt(var);
}

Vector lowrank_residuals(const FittedModel& fitted, const DesignData& data,
                         const EigenBasis& basis, const SpatialWeights& w) {
  if (!is_lowrank(fitted.kind))
    throw Error("lowrank_residuals expects a low-rank fit");
  const double rho = fitted.theta.rho ? *fitted.theta.rho : 0.0;
  const Matrix xt = build_design(fitted.kind, data, basis, w, rho,
                                 fitted.alt_intercept);
  return data.y - xt * fitted.beta - basis.e * fitted.gamma;
}

Vector ols_residuals(const FittedModel& fitted, const DesignData& data) {
  if (fitted.beta.size() != data.x.cols())
    throw Error("coefficient count does not match the design");
  return data.y - data.x * fitted.beta;
}

}  // namespace lrsm
