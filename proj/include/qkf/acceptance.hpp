#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qkf {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  // Runs only criteria whose name contains this substring (empty = all).
  std::string filter;
  // Negative control: flips the sign of D in every model used by the
  // random-population criteria.
  bool inject_d_sign_fault = false;
  unsigned threads = 0;
  unsigned long long seed = 20240611ULL;
};

// Criterion names, in order.
const std::vector<std::string>& acceptance_names();

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts);

// One line per criterion: "[pass] 4 theorem  ..." and a summary line.
void print_acceptance(std::ostream& os, const std::vector<CriterionResult>& results);

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace qkf
