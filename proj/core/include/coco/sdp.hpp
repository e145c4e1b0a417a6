#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "coco/types.hpp"

namespace coco::sdp {

// Standard-form block SDP:
//
//   minimize   sum_b <C_b, X_b>
//   subject to sum_b <A_kb, X_b> = b_k   for every row k
//              X_b PSD                   for every block b
//
// with dual  maximize b^T y  s.t.  C_b - sum_k y_k A_kb = S_b PSD.

enum class PresolveMode {
  Reject,  // dependent but consistent rows raise PresolveError
  Drop,    // dependent but consistent rows are removed silently
};

struct Settings {
  double tol_gap = 1e-8;
  double tol_feas = 1e-8;
  int max_iter = 200;
  PresolveMode presolve = PresolveMode::Reject;
};

struct ConstraintRow {
  std::vector<SymMatrix> coeffs;  // one per block; size must match the block
  double rhs = 0.0;
};

struct Problem {
  std::vector<int> block_dims;
  std::vector<SymMatrix> objective;
  std::vector<ConstraintRow> constraints;
  Settings settings;
};

enum class Status { Optimal, PrimalInfeasible, DualInfeasible, MaxIterations };

const char* to_string(Status s);

struct Metrics {
  double gap = 0.0;              // |<C,X> - b^T y|
  double primal_residual = 0.0;  // max_k |<A_k,X> - b_k|
  double dual_residual = 0.0;    // max entry of C - A^*(y) - S
  int iterations = 0;
};

struct Solution {
  Status status = Status::MaxIterations;
  std::vector<SymMatrix> primal;      // X per block
  Vector dual;                        // y, one per original row (0 for dropped rows)
  std::vector<SymMatrix> dual_slack;  // S per block
  Metrics metrics;
  double objective = 0.0;             // <C, X>
  // Infeasibility certificate quality. For PrimalInfeasible, `dual` holds a
  // ray normalised to b^T y = 1 and this is max(0, lambda_max(A^*(y))); for
  // DualInfeasible, `primal` holds a ray with <C,X> = -1 and this is
  // max_k |<A_k,X>|. Zero otherwise.
  double certificate_residual = 0.0;
  std::vector<int> dropped_rows;      // rows removed by presolve
};

/// Dependent constraint rows found by presolve (mode Reject).
class PresolveError : public Error {
 public:
  PresolveError(const std::string& what, std::vector<int> rows)
      : Error("presolve", what), rows_(std::move(rows)) {}

  const std::vector<int>& rows() const noexcept { return rows_; }

 private:
  std::vector<int> rows_;
};

/// Throws InvalidProblem on shape or symmetry errors.
void validate(const Problem& problem);

/// Homogeneous self-dual interior-point solve with Nesterov-Todd scaling and a
/// Mehrotra predictor-corrector.
Solution solve(const Problem& problem);

/// Recomputes gap and residuals of `solution` against `problem` from scratch.
/// Missing dual slacks are taken as C - A^*(y); the dual residual then
/// measures how far that matrix is from PSD.
Metrics verify(const Problem& problem, const Solution& solution);

/// Plain-text dump:
///
///   blocks: d1 d2 ...
///   objective
///   <d1 rows of block 0> <d2 rows of block 1> ...
///   constraint <k> rhs <b_k>
///   <block matrices as above>
///
/// Rows are whitespace-separated numbers printed with 17 significant digits.
void write_problem(std::ostream& os, const Problem& problem);
Problem read_problem(std::istream& is);

}  // namespace coco::sdp
