#pragma once

// Reference performance bands for the two shipped scenarios, used by
// `margeff simulate --check` and the acceptance suite.

#include <cstddef>
#include <string>
#include <vector>

#include "margeff/harness.hpp"

namespace margeff {

struct BandCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Desk-scale bands (R = 200, B = 200, n = 10,000). Also requires
/// n_valid >= 0.99 R for every method.
std::vector<BandCheck> check_desk_bands(Family family, const std::vector<PerformanceSummary>& summaries,
                                        std::size_t replicates);

/// Full-scale bands (R = 2,000, B = 1,000): every published bias, MSE and
/// coverage value reproduced within 3 x (half a unit in its last reported
/// digit + the computed MCSE).
std::vector<BandCheck> check_full_bands(Family family, const std::vector<PerformanceSummary>& summaries,
                                        std::size_t replicates);

bool all_pass(const std::vector<BandCheck>& checks) noexcept;

}  // namespace margeff
