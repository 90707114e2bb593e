// Randomized property checks for the quantile and geometry layers.
//
// Each suite draws a large batch of randomized instances from a fixed seed and
// verifies an exact structural invariant (Lipschitz bounds, ordering,
// equivariance, fallback agreement).  The suites themselves live in
// property_suites.hpp so the acceptance binary can reuse them; here we assert
// that every suite reports zero violations.

#include <catch2/catch_amalgamated.hpp>

#include "property_suites.hpp"

TEST_CASE("randomized property suites hold with zero violations", "[properties]") {
  const auto results = qoe_props::run_all_property_suites(/*seed=*/7, /*cases=*/10000);
  REQUIRE(results.size() == 8);
  for (const auto& suite : results) {
    INFO("suite: " << suite.name << "  cases: " << suite.cases
                   << "  worst_slack: " << suite.worst_slack);
    CHECK(suite.cases == 10000);
    CHECK(suite.violations == 0);
  }
}
