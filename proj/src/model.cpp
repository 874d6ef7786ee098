#include "lrsm/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace lrsm {

bool is_lowrank(ModelKind kind) {
  switch (kind) {
    case ModelKind::LSEM:
    case ModelKind::LSLM:
    case ModelKind::LSDM:
    case ModelKind::LSAC:
      return true;
    default:
      return false;
  }
}

bool uses_rho(ModelKind kind) {
  switch (kind) {
    case ModelKind::LSLM:
    case ModelKind::LSDM:
    case ModelKind::LSAC:
    case ModelKind::SLM:
    case ModelKind::SDM:
    case ModelKind::SAC:
      return true;
    default:
      return false;
  }
}

bool uses_phi(ModelKind kind) {
  switch (kind) {
    case ModelKind::LSEM:
    case ModelKind::LSAC:
    case ModelKind::SEM:
    case ModelKind::SAC:
      return true;
    default:
      return false;
  }
}

int dependence_dimension(ModelKind kind) {
  return (uses_rho(kind) ? 1 : 0) + (uses_phi(kind) ? 1 : 0);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LSEM: return "LSEM";
    case ModelKind::LSLM: return "LSLM";
    case ModelKind::LSDM: return "LSDM";
    case ModelKind::LSAC: return "LSAC";
    case ModelKind::LM: return "LM";
    case ModelKind::SEM: return "SEM";
    case ModelKind::SLM: return "SLM";
    case ModelKind::SDM: return "SDM";
    case ModelKind::SAC: return "SAC";
  }
  return "?";
}

ModelKind kind_from_string(const std::string& name) {
  std::string u;
  u.reserve(name.size());
  for (char c : name) u.push_back(static_cast<char>(std::toupper(c)));
  if (u == "LSEM") return ModelKind::LSEM;
  if (u == "LSLM") return ModelKind::LSLM;
  if (u == "LSDM") return ModelKind::LSDM;
  if (u == "LSAC") return ModelKind::LSAC;
  if (u == "LM") return ModelKind::LM;
  if (u == "SEM") return ModelKind::SEM;
  if (u == "SLM") return ModelKind::SLM;
  if (u == "SDM") return ModelKind::SDM;
  if (u == "SAC") return ModelKind::SAC;
  throw Error("unknown model kind: " + name);
}

Index fixed_coef_count(ModelKind kind, Index k_design) {
  return (kind == ModelKind::LSDM || kind == ModelKind::SDM) ? 2 * k_design - 1
                                                             : k_design;
}

std::vector<std::string> coef_names(ModelKind kind,
                                    const std::vector<std::string>& names) {
  std::vector<std::string> out = names;
  if (kind == ModelKind::LSDM || kind == ModelKind::SDM) {
    for (std::size_t i = 1; i < names.size(); ++i)
      out.push_back("lag:" + names[i]);
  }
  return out;
}

void validate_design(const DesignData& data) {
  const Index n = data.y.size();
  const Index k = data.x.cols();
  if (data.x.rows() != n)
    throw Error("design rows (" + std::to_string(data.x.rows()) +
                ") do not match response length (" + std::to_string(n) + ")");
  if (k < 1) throw Error("design needs at least the intercept column");
  if (n <= k)
    throw Error("need n > K, got n=" + std::to_string(n) +
                " K=" + std::to_string(k));
  if (!data.names.empty() && static_cast<Index>(data.names.size()) != k)
    throw Error("covariate name count does not match design columns");
  if (!data.y.allFinite() || !data.x.allFinite())
    throw Error("non-finite value in response or design");
  for (Index i = 0; i < n; ++i)
    if (data.x(i, 0) != 1.0)
      throw Error("first design column must be the all-ones intercept");
  for (Index c = 1; c < k; ++c)
    if (data.x.col(c).maxCoeff() == data.x.col(c).minCoeff())
      throw Error("design column " + std::to_string(c) +
                  " is constant; only the intercept may be");
}

namespace {

// (1 − theta*lambda) with the pole guard shared by sigma and the transform
double pole_factor(double theta, double lambda) {
  const double f = 1.0 - theta * lambda;
  if (std::abs(f) < 1e-10)
    throw PoleProximity("dependence parameter " + std::to_string(theta) +
                        " within 1e-10 of the pole at eigenvalue " +
                        std::to_string(lambda));
  return f;
}

}  // namespace

Vector build_sigma(ModelKind kind, const ThetaPoint& theta,
                   const Vector& lambdas) {
  if (!is_lowrank(kind))
    throw Error("sigma diagonal is defined for low-rank kinds only");
  if (!(theta.ratio > 0.0) || !std::isfinite(theta.ratio))
    throw Error("ratio sigma/tau must be positive and finite");
  if (uses_rho(kind) && !theta.rho)
    throw Error(to_string(kind) + " requires rho");
  if (uses_phi(kind) && !theta.phi)
    throw Error(to_string(kind) + " requires phi");

  const Index l = lambdas.size();
  Vector sigma(l);
  for (Index i = 0; i < l; ++i) {
    double denom = 1.0;
    switch (kind) {
      case ModelKind::LSEM:
        denom = pole_factor(*theta.phi, lambdas[i]);
        break;
      case ModelKind::LSLM:
      case ModelKind::LSDM:
        denom = pole_factor(*theta.rho, lambdas[i]);
        break;
      case ModelKind::LSAC:
        denom = pole_factor(*theta.phi, lambdas[i]) *
                pole_factor(*theta.rho, lambdas[i]);
        break;
      default:
        break;
    }
    sigma[i] = theta.ratio / denom;
    if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i]))
      throw PoleProximity("process scale entry " + std::to_string(i) +
                          " is not positive finite");
  }
  return sigma;
}

Matrix build_design(ModelKind kind, const DesignData& data,
                    const EigenBasis& basis, const SpatialWeights& w,
                    double rho, bool alt_intercept) {
  const Index n = data.x.rows();
  const Index k = data.x.cols();

  if (kind == ModelKind::LM || kind == ModelKind::LSEM || kind == ModelKind::SEM)
    return data.x;

  // spillover weights d_l = rho*lambda_l / (1 − rho*lambda_l)
  const Index l = basis.l();
  Vector d(l);
  for (Index i = 0; i < l; ++i)
    d[i] = rho * basis.lambdas[i] / pole_factor(rho, basis.lambdas[i]);

  auto transform = [&](const Matrix& block) -> Matrix {
    // block + E diag(d) E' block, assembled through the basis
    Matrix proj = basis.e.transpose() * block;
    proj.array().colwise() *= d.array();
    return block + basis.e * proj;
  };

  const bool durbin = (kind == ModelKind::LSDM || kind == ModelKind::SDM);
  Matrix base(n, durbin ? 2 * k - 1 : k);
  base.leftCols(k) = data.x;
  if (durbin)
    base.rightCols(k - 1) = w.entries * data.x.rightCols(k - 1);

  Matrix out(n, base.cols());
  if (alt_intercept) {
    out = transform(base);
  } else {
    out.col(0) = base.col(0);
    if (base.cols() > 1)
      out.rightCols(base.cols() - 1) = transform(base.rightCols(base.cols() - 1));
  }
  return out;
}

}  // namespace lrsm
