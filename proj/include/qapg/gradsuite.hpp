#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qapg/gradcheck.hpp"

namespace qapg::diff {

struct GradCase {
  std::string name;
  std::function<GradCheckReport(std::uint64_t seed)> run;
};

// Every differentiable op and the composed model losses, in 64-bit.
const std::vector<GradCase>& gradcheck_cases();

// Throws ContractViolation for a name with no registered case.
GradCheckReport run_grad_check(const std::string& name, std::uint64_t seed);

struct GradSuiteRow {
  std::string name;
  double max_rel_error = 0.0;  // worst over seeds
  std::size_t entries = 0;
  bool passed = false;
};

// Runs each case for seeds 1..num_seeds.
std::vector<GradSuiteRow> run_grad_suite(std::size_t num_seeds = 10, double tolerance = 1e-4);

}  // namespace qapg::diff
