// csasr/gradcheck.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#ifndef CSASR_GRADCHECK_HPP
#define CSASR_GRADCHECK_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace csasr {

/// Verification of every analytic gradient against central finite
/// differences on random instances. Tolerances are fixed: 1e-4 relative for
/// the loss operations, 1e-3 for the end-to-end model check.
struct GradCheckResult {
  std::string name;
  std::size_t trials = 0;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::vector<GradCheckResult> checks;
  bool pass = false;
};

GradCheckReport run_gradcheck(std::size_t trials, std::uint64_t seed);

}  // namespace csasr

#endif  // CSASR_GRADCHECK_HPP
