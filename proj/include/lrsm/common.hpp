#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <stdexcept>
#include <string>

namespace lrsm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

// ---- error taxonomy ----
//
// Every failure mode callers are expected to branch on gets its own type;
// anything else surfaces as the base Error.

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : Error { using Error::Error; };
struct DuplicatePoints : Error { using Error::Error; };
struct TooFewPoints : Error { using Error::Error; };
struct SelfLoop : Error { using Error::Error; };
struct DegenerateMatrix : Error { using Error::Error; };
struct BadRank : Error { using Error::Error; };
struct ConvergenceFailure : Error { using Error::Error; };
struct PoleProximity : Error { using Error::Error; };
struct SingularSystem : Error { using Error::Error; };
struct OptimFailure : Error { using Error::Error; };
struct SizeGuard : Error { using Error::Error; };
struct ConstantResiduals : Error { using Error::Error; };
struct TooFewSamples : Error { using Error::Error; };

}  // namespace lrsm
