#include "lrsm/effects.hpp"

#include <cmath>

namespace lrsm {

namespace {

bool has_lag_block(ModelKind kind) {
  return kind == ModelKind::LSDM || kind == ModelKind::SDM;
}

// ρλ_l/(1−ρλ_l), the diagonal of the low-rank multiplier correction.
Vector pole_weights(double rho, const Vector& lambdas) {
  Vector d(lambdas.size());
  for (Index l = 0; l < lambdas.size(); ++l) {
    const double denom = 1.0 - rho * lambdas[l];
    if (std::abs(denom) < 1e-12)
      throw PoleProximity("effect multiplier pole at eigenvalue " +
                          std::to_string(lambdas[l]));
    d[l] = rho * lambdas[l] / denom;
  }
  return d;
}

void check_layout(ModelKind kind, const Vector& beta, const MomentCache& m,
                  const Vector& lambdas) {
  if (beta.size() != m.k_f())
    throw Error("coefficient vector does not match the cache layout");
  if (lambdas.size() != m.l)
    throw Error("eigenvalue count does not match the cache rank");
  if (covariate_count(kind, beta.size()) < 1)
    throw Error("effects need at least one non-intercept covariate");
}

struct CorePieces {
  double trace_part = 0.0;  // (1/n)Σ d_l                  → DE scale
  double total_part = 0.0;  // (1/n)Σ d_l (1'E_l)²          → TE scale
  double lag_trace = 0.0;   // (1/n)Σ d_l diag(E'WE)_l      → LSDM DE add-on
  double lag_total = 0.0;   // (1/n)(1'W1 + Σ d_l (1'E_l)(E'W1)_l)
};

CorePieces core_pieces(ModelKind kind, std::optional<double> rho,
                       const MomentCache& m, const Vector& lambdas) {
  CorePieces p;
  if (!uses_rho(kind)) return p;  // LSEM: identity multiplier
  if (!rho) throw Error("lag-side kind requires a dependence value");
  const double n = static_cast<double>(m.n);
  const Vector d = pole_weights(*rho, lambdas);
  const Vector ones_proj = m.ones_projection();
  p.trace_part = d.sum() / n;
  p.total_part = d.dot(ones_proj.cwiseProduct(ones_proj)) / n;
  if (has_lag_block(kind)) {
    if (m.m_ewe_diag.size() != m.l || m.m_ew1.size() != m.l)
      throw Error("cache is missing the lag cross-moments");
    p.lag_trace = d.dot(m.m_ewe_diag) / n;
    p.lag_total = (m.m_w11 + d.dot(ones_proj.cwiseProduct(m.m_ew1))) / n;
  }
  return p;
}

}  // namespace

Index covariate_count(ModelKind kind, Index k_f) {
  return has_lag_block(kind) ? (k_f - 1) / 2 : k_f - 1;
}

Vector de_core(ModelKind kind, const Vector& beta, std::optional<double> rho,
               const MomentCache& moments, const Vector& lambdas) {
  check_layout(kind, beta, moments, lambdas);
  const CorePieces p = core_pieces(kind, rho, moments, lambdas);
  const Index kc = covariate_count(kind, beta.size());
  Vector de(kc);
  for (Index k = 0; k < kc; ++k) {
    de[k] = beta[1 + k] * (1.0 + p.trace_part);
    if (has_lag_block(kind)) de[k] += beta[1 + kc + k] * p.lag_trace;
  }
  return de;
}

Vector ie_core(ModelKind kind, const Vector& beta, std::optional<double> rho,
               const MomentCache& moments, const Vector& lambdas) {
  check_layout(kind, beta, moments, lambdas);
  const CorePieces p = core_pieces(kind, rho, moments, lambdas);
  const Index kc = covariate_count(kind, beta.size());
  Vector ie(kc);
  for (Index k = 0; k < kc; ++k) {
    // total minus direct; the shared "+beta_k" of both cancels
    ie[k] = beta[1 + k] * (p.total_part - p.trace_part);
    if (has_lag_block(kind))
      ie[k] += beta[1 + kc + k] * (p.lag_total - p.lag_trace);
  }
  return ie;
}

double de_lowrank(const FittedModel& fitted, const EigenBasis& basis,
                  const MomentCache& moments, Index k) {
  const Vector de =
      de_core(fitted.kind, fitted.beta, fitted.theta.rho, moments,
              basis.lambdas);
  if (k < 0 || k >= de.size()) throw Error("covariate index out of range");
  return de[k];
}

double ie_lowrank(const FittedModel& fitted, const EigenBasis& basis,
                  const MomentCache& moments, Index k) {
  const Vector ie =
      ie_core(fitted.kind, fitted.beta, fitted.theta.rho, moments,
              basis.lambdas);
  if (k < 0 || k >= ie.size()) throw Error("covariate index out of range");
  return ie[k];
}

EffectsEstimate effects_table(const FittedModel& fitted,
                              const EigenBasis& basis,
                              const MomentCache& moments) {
  EffectsEstimate est;
  est.de = de_core(fitted.kind, fitted.beta, fitted.theta.rho, moments,
                   basis.lambdas);
  est.ie = ie_core(fitted.kind, fitted.beta, fitted.theta.rho, moments,
                   basis.lambdas);
  const Index kc = est.de.size();
  for (Index k = 0; k < kc; ++k)
    est.names.push_back(1 + k < static_cast<Index>(fitted.names.size())
                            ? fitted.names[1 + k]
                            : "x" + std::to_string(k + 1));
  return est;
}

EffectsEstimate effects_fullrank_table(const FittedModel& fitted,
                                       const SpatialWeights& w) {
  const Index n = w.n();
  if (n > 5000)
    throw SizeGuard("dense effect inverse limited to n <= 5000, got " +
                    std::to_string(n));
  const ModelKind kind = fitted.kind;
  const Index kc = covariate_count(kind, fitted.beta.size());
  if (kc < 1) throw Error("effects need at least one non-intercept covariate");

  EffectsEstimate est;
  est.de.resize(kc);
  est.ie.resize(kc);
  for (Index k = 0; k < kc; ++k)
    est.names.push_back(1 + k < static_cast<Index>(fitted.names.size())
                            ? fitted.names[1 + k]
                            : "x" + std::to_string(k + 1));

  if (!uses_rho(kind)) {  // error-side kinds: identity multiplier
    for (Index k = 0; k < kc; ++k) {
      est.de[k] = fitted.beta[1 + k];
      est.ie[k] = 0.0;
    }
    return est;
  }
  if (!fitted.theta.rho) throw Error("fitted model is missing rho");

  const double rho = *fitted.theta.rho;
  const Matrix dense_w = Matrix(w.entries);
  const Matrix s =
      (Matrix::Identity(n, n) - rho * dense_w).partialPivLu().inverse();
  const double tr_s = s.trace();
  const double tot_s = s.sum();
  double tr_sw = 0.0, tot_sw = 0.0;
  if (has_lag_block(kind)) {
    const Matrix sw = s * dense_w;
    tr_sw = sw.trace();
    tot_sw = sw.sum();
  }
  const double dn = static_cast<double>(n);
  for (Index k = 0; k < kc; ++k) {
    double de = fitted.beta[1 + k] * tr_s / dn;
    double te = fitted.beta[1 + k] * tot_s / dn;
    if (has_lag_block(kind)) {
      de += fitted.beta[1 + kc + k] * tr_sw / dn;
      te += fitted.beta[1 + kc + k] * tot_sw / dn;
    }
    est.de[k] = de;
    est.ie[k] = te - de;
  }
  return est;
}

std::pair<double, double> effects_fullrank(const FittedModel& fitted,
                                           const SpatialWeights& w, Index k) {
  const EffectsEstimate est = effects_fullrank_table(fitted, w);
  if (k < 0 || k >= est.de.size())
    throw Error("covariate index out of range");
  return {est.de[k], est.ie[k]};
}

}  // namespace lrsm
