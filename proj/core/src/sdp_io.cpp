#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "coco/sdp.hpp"

namespace coco::sdp {

namespace {

void write_blocks(std::ostream& os, const std::vector<SymMatrix>& blocks) {
  for (const auto& B : blocks) {
    for (Eigen::Index i = 0; i < B.rows(); ++i) {
      for (Eigen::Index j = 0; j < B.cols(); ++j) {
        os << (j == 0 ? "" : " ") << B(i, j);
      }
      os << '\n';
    }
  }
}

// Reads the next non-empty line.
bool next_line(std::istream& is, std::string& line) {
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      return true;
    }
  }
  return false;
}

std::vector<SymMatrix> read_blocks(std::istream& is, const std::vector<int>& dims, const std::string& where) {
  std::vector<SymMatrix> out;
  std::string line;
  for (int n : dims) {
    SymMatrix B(n, n);
    for (int i = 0; i < n; ++i) {
      if (!next_line(is, line)) {
        throw InvalidProblem("read_problem: truncated " + where);
      }
      std::istringstream row(line);
      for (int j = 0; j < n; ++j) {
        if (!(row >> B(i, j))) {
          throw InvalidProblem("read_problem: short row in " + where);
        }
      }
    }
    out.push_back(std::move(B));
  }
  return out;
}

}  // namespace

void write_problem(std::ostream& os, const Problem& problem) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "blocks:";
  for (int n : problem.block_dims) {
    os << ' ' << n;
  }
  os << "\nobjective\n";
  write_blocks(os, problem.objective);
  for (std::size_t k = 0; k < problem.constraints.size(); ++k) {
    os << "constraint " << k << " rhs " << problem.constraints[k].rhs << '\n';
    write_blocks(os, problem.constraints[k].coeffs);
  }
  os.precision(old_precision);
}

Problem read_problem(std::istream& is) {
  Problem problem;
  std::string line;
  if (!next_line(is, line) || line.rfind("blocks:", 0) != 0) {
    throw InvalidProblem("read_problem: expected 'blocks:' header");
  }
  std::istringstream header(line.substr(7));
  int n = 0;
  while (header >> n) {
    problem.block_dims.push_back(n);
  }
  if (problem.block_dims.empty()) {
    throw InvalidProblem("read_problem: no block dimensions");
  }
  if (!next_line(is, line) || line.find("objective") == std::string::npos) {
    throw InvalidProblem("read_problem: expected 'objective'");
  }
  problem.objective = read_blocks(is, problem.block_dims, "objective");
  while (next_line(is, line)) {
    std::istringstream tag(line);
    std::string word;
    std::string rhs_word;
    std::size_t index = 0;
    ConstraintRow row;
    if (!(tag >> word >> index >> rhs_word >> row.rhs) || word != "constraint" || rhs_word != "rhs") {
      throw InvalidProblem("read_problem: malformed constraint header: " + line);
    }
    if (index != problem.constraints.size()) {
      throw InvalidProblem("read_problem: constraints out of order at " + std::to_string(index));
    }
    row.coeffs = read_blocks(is, problem.block_dims, "constraint " + std::to_string(index));
    problem.constraints.push_back(std::move(row));
  }
  validate(problem);
  return problem;
}

}  // namespace coco::sdp
