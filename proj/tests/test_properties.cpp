#include <gtest/gtest.h>

#include "properties.hpp"

namespace hmest::properties {
namespace {

constexpr int kCases = 1000;

void expect_ok(const Tally& t) {
  EXPECT_EQ(t.cases, kCases);
  EXPECT_EQ(t.failures, 0) << "first failure: " << t.first_failure << ", worst " << t.worst;
}

TEST(Properties, DispersionReductionIsPsd) { expect_ok(dispersion_reduction(101, kCases)); }
TEST(Properties, ZeroResidualIdentity) { expect_ok(zero_residual(202, kCases)); }
TEST(Properties, ScaleEquivariance) { expect_ok(scale_equivariance(303, kCases)); }
TEST(Properties, RowPermutationInvariance) { expect_ok(permutation_invariance(404, kCases)); }
TEST(Properties, FisherAdditivity) { expect_ok(fisher_additivity(505, kCases)); }

}  // namespace
}  // namespace hmest::properties
