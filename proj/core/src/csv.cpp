#include "coco/csv.hpp"

#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace coco::csv {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

double to_double(const std::string& cell, int line) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw InvalidInput("csv line " + std::to_string(line) + ": bad number '" + cell + "'");
  }
  return v;
}

// Errors may contain commas; keep the field parseable.
std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') {
      c = ';';
    }
  }
  return s;
}

}  // namespace

void write_trajectory(std::ostream& os, const harness::Trajectory& tr) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << 't';
  for (int i = 0; i < tr.state_dim; ++i) {
    os << ",x" << i;
  }
  for (int i = 0; i < tr.input_dim; ++i) {
    os << ",u" << i;
  }
  for (int i = 0; i < tr.state_dim; ++i) {
    os << ",w" << i;
  }
  os << ",stage_cost,status,alpha_used\n";
  for (const auto& row : tr.rows) {
    os << row.t;
    for (const Vector* v : {&row.x, &row.u, &row.w}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) {
        os << ',' << (*v)(i);
      }
    }
    os << ',' << row.stage_cost << ',' << row.status << ',' << row.alpha_used << '\n';
  }
  os.precision(old_precision);
}

harness::Trajectory read_trajectory(std::istream& is) {
  harness::Trajectory tr;
  std::string line;
  if (!std::getline(is, line)) {
    throw InvalidInput("csv: missing header");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  const auto header = split(line);
  auto count_prefix = [&](char prefix) {
    int n = 0;
    for (const auto& h : header) {
      if (h.size() > 1 && h[0] == prefix && h.find_first_not_of("0123456789", 1) == std::string::npos) {
        ++n;
      }
    }
    return n;
  };
  tr.state_dim = count_prefix('x');
  tr.input_dim = count_prefix('u');
  const std::size_t expected = 1 + 2 * static_cast<std::size_t>(tr.state_dim) +
                               static_cast<std::size_t>(tr.input_dim) + 3;
  if (header.empty() || header[0] != "t" || header.size() != expected || count_prefix('w') != tr.state_dim ||
      header[expected - 3] != "stage_cost" || header[expected - 2] != "status" ||
      header[expected - 1] != "alpha_used") {
    throw InvalidInput("csv: unexpected header '" + line + "'");
  }
  int number = 1;
  while (std::getline(is, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != expected) {
      throw InvalidInput("csv line " + std::to_string(number) + ": expected " + std::to_string(expected) +
                         " fields");
    }
    harness::StepRow row;
    row.t = static_cast<int>(to_double(cells[0], number));
    std::size_t k = 1;
    auto read_vec = [&](int n) {
      Vector v(n);
      for (int i = 0; i < n; ++i) {
        v(i) = to_double(cells[k++], number);
      }
      return v;
    };
    row.x = read_vec(tr.state_dim);
    row.u = read_vec(tr.input_dim);
    row.w = read_vec(tr.state_dim);
    row.stage_cost = to_double(cells[k++], number);
    row.status = cells[k++];
    row.alpha_used = to_double(cells[k++], number);
    tr.states.push_back(row.x);
    tr.rows.push_back(std::move(row));
  }
  return tr;
}

void write_sweep(std::ostream& os, const std::vector<harness::SweepRow>& rows) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "alpha,avg_cost,normalized,sup_state_norm,sup_noise_norm,steps,diverged,error\n";
  for (const auto& r : rows) {
    os << r.alpha << ',';
    if (r.error.empty()) {
      os << r.report.avg_cost;
    }
    os << ',';
    if (r.report.normalized) {
      os << *r.report.normalized;
    }
    os << ',' << r.report.sup_state_norm << ',' << r.report.sup_noise_norm << ',' << r.report.steps_completed << ','
       << (r.report.diverged ? 1 : 0) << ',' << sanitize(r.error) << '\n';
  }
  os.precision(old_precision);
}

}  // namespace coco::csv
