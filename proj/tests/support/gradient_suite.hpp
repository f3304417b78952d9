#pragma once

#include <string>
#include <vector>

namespace s2p::testing {

struct GradientCase {
  std::string name;
  double worst_relative_error = 0.0;
  double tolerance = 0.0;
  int entries_checked = 0;
  std::string detail;

  bool passed() const { return entries_checked > 0 && worst_relative_error < tolerance; }
};

// Finite-difference checks of every differentiable primitive (tolerance 1e-4)
// and of the game losses on tiny configurations (tolerance 1e-3).
std::vector<GradientCase> run_gradient_suite();

}  // namespace s2p::testing
