#include "doctest.h"
#include "gradient_suite.hpp"

TEST_CASE("finite differences agree with analytic gradients") {
  for (const auto& c : s2p::testing::run_gradient_suite()) {
    INFO(c.name << " worst=" << c.worst_relative_error << " at " << c.detail);
    CHECK(c.entries_checked > 0);
    CHECK(c.worst_relative_error < c.tolerance);
  }
}
