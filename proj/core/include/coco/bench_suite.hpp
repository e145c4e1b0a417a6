#pragma once

#include <string>
#include <vector>

namespace coco::bench {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteOptions {
  int seeds = 5;
  std::string artifact_dir;  // sweep and trajectory CSVs are written here when non-empty
};

/// Criterion ids in run order (1..10).
std::vector<int> criterion_ids();

/// Runs one acceptance check. Unexpected library errors are reported as a
/// failing result rather than propagated. Raises InvalidInput on an unknown id.
CriterionResult run_criterion(int id, const SuiteOptions& options = {});

std::vector<CriterionResult> run_suite(const SuiteOptions& options = {});

/// `[PASS] 3 sequential-stability (0.41 s): detail`
std::string format_line(const CriterionResult& result);

}  // namespace coco::bench
