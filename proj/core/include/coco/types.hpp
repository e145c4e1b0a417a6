#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace coco {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Symmetric matrices share storage with Matrix; symmetry is checked at the
// API boundary (see linalg::require_symmetric).
using SymMatrix = Eigen::MatrixXd;

// One step of x_{t+1} = A x_t + B u_t + w_t.
struct Dynamics {
  Matrix A;
  Matrix B;
};

// Every error raised by the library carries a short machine-readable kind so
// the CLI can print a stable `error: kind=<kind> ...` line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define COCO_DEFINE_ERROR(Name, kind_str)                                   \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(kind_str, what) {}       \
  }

COCO_DEFINE_ERROR(InvalidInput, "invalid-input");
COCO_DEFINE_ERROR(NotPsd, "not-psd");
COCO_DEFINE_ERROR(NotPd, "not-pd");
COCO_DEFINE_ERROR(UnstableMatrix, "unstable-matrix");
COCO_DEFINE_ERROR(InvalidProblem, "invalid-problem");
COCO_DEFINE_ERROR(ExtractionError, "extraction");
COCO_DEFINE_ERROR(NotFullRowRank, "not-full-row-rank");
COCO_DEFINE_ERROR(NotStabilizable, "not-stabilizable");
COCO_DEFINE_ERROR(OutOfRange, "out-of-range");
COCO_DEFINE_ERROR(InfeasibleLift, "infeasible-lift");
COCO_DEFINE_ERROR(ConfigError, "config");

#undef COCO_DEFINE_ERROR

}  // namespace coco
