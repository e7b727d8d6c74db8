#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kinlang::selftest {

enum class Budget { fast, full };

struct SuiteResult {
  std::string name;
  bool passed = false;
  /// One line per failed check, each starting with the invariant's name.
  std::vector<std::string> failures;
  std::string summary;
};

/// brownian-identities, brownian-distribution, exp-pair-covariance, order,
/// phase-volume.
const std::vector<std::string>& suite_names();

/// Runs one suite by name; throws std::invalid_argument for unknown names.
SuiteResult run_suite(std::string_view name, Budget budget);

/// Runs `only` if non-empty, else every suite.
std::vector<SuiteResult> run(std::string_view only, Budget budget);

}  // namespace kinlang::selftest
