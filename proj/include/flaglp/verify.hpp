#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flaglp/kernels.hpp"
#include "json.hpp"

namespace flaglp {

struct VerifyOptions {
  int L = 0;  // 0 selects each suite's own resolution
  std::uint64_t seed = 1;
};

struct SuiteResult {
  std::string suite;
  bool passed = false;
  std::string summary;  // one line, human readable
  nlohmann::ordered_json details;
};

/// partition, plancherel, remainder, roundtrip, pp-stability, cz, duality,
/// kernels, flag-convolution.
std::vector<std::string> suite_names();

nlohmann::ordered_json report_json(const KernelReport& report);

/// Throws ConfigError for an unknown suite.
SuiteResult run_suite(const std::string& name, const VerifyOptions& options = {});

}  // namespace flaglp
