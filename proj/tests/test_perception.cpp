#include "perception_trials.hpp"
#include "test_support.hpp"

using namespace lta;

TEST_CASE("bbox localization without noise or outlier removal is within 0.1 mm") {
  const auto st = test::run_perception_trials(10, 7, 0.0, 3, 0);
  CHECK(st.objects > 10);
  CHECK(st.max_error < 1e-4);
}

TEST_CASE("bbox localization under depth noise and box jitter") {
  const auto st = test::run_perception_trials(30, 11, 0.001, 3);
  MESSAGE("max error " << st.max_error << " mean " << st.mean_error);
  CHECK(st.max_error < 0.005);
}
