#include <gtest/gtest.h>

#include "safety_draw.hpp"

namespace scalegraph::simnet {
namespace {

class RandomizedSafety : public ::testing::TestWithParam<std::size_t> {};

TEST_P(RandomizedSafety, NoConflictsNoOverdrafts) {
  const std::size_t r = GetParam();
  std::size_t faulty = 0;
  for (std::uint64_t seed = 1; seed <= 80; ++seed) {
    const auto drawn = testing::draw_adversarial(seed, r);
    faulty += drawn.byzantine;
    const auto result = Simulator(drawn.scenario).run();
    EXPECT_TRUE(result.safety.conflicts.empty()) << "seed " << seed << ": " << result.safety.conflicts.front();
    EXPECT_TRUE(result.safety.overdrafts.empty()) << "seed " << seed << ": " << result.safety.overdrafts.front();
  }
  EXPECT_GT(faulty, 80u) << "the draw should place faults in most runs";
}

INSTANTIATE_TEST_SUITE_P(ShardSizes, RandomizedSafety, ::testing::Values(3, 5, 7));

}  // namespace
}  // namespace scalegraph::simnet
