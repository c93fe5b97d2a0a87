#include <doctest.h>

#include "diverid/pose_filter.hpp"
#include "filter_cases.hpp"
#include "helpers.hpp"

using namespace diverid;
using diverid::testing::canonical_joints;
using diverid::testing::make_frame;
using diverid::testing::single_violations;

TEST_CASE("canonical pose passes every condition") {
  const auto r = filter_pose(diverid::testing::canonical_pose());
  CHECK(r.accepted);
  CHECK(r.violated.empty());
}

TEST_CASE("each single-condition violation is flagged alone") {
  const auto cases = single_violations();
  REQUIRE(cases.size() == kNumConditions);
  for (const auto& c : cases) {
    auto joints = canonical_joints();
    c.edit(joints);
    const auto r = filter_pose(make_frame(joints));
    CAPTURE(condition_name(c.condition));
    CHECK_FALSE(r.accepted);
    REQUIRE(r.violated.size() == 1);
    CHECK(r.violated[0] == c.condition);
  }
}

TEST_CASE("filter reports every violation without short circuit") {
  auto joints = canonical_joints();
  single_violations()[1].edit(joints);   // knees above hips
  single_violations()[10].edit(joints);  // arms longer than the torso
  const auto r = filter_pose(make_frame(joints));
  CHECK(r.violated == std::vector<FilterCondition>{FilterCondition::C2, FilterCondition::C11});
}

TEST_CASE("thresholds are configurable") {
  FilterConfig cfg;
  cfg.sw_min = 50.0;
  const auto r = filter_pose(diverid::testing::canonical_pose(), cfg);
  CHECK(r.violated == std::vector<FilterCondition>{FilterCondition::C10});
  cfg = {};
  cfg.similarity_band = 0.9;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("collapsed pose is rejected, not thrown") {
  std::map<Joint, Keypoint> p;
  for (auto j : kAllJoints) p[j] = {5, 5};
  const auto r = filter_pose(make_frame(p));
  CHECK_FALSE(r.accepted);
  CHECK(r.violated.size() == kNumConditions);
}

TEST_CASE("filter_stream keeps order") {
  auto bad = canonical_joints();
  single_violations()[0].edit(bad);
  const std::vector<PoseFrame> frames = {diverid::testing::canonical_pose().with_frame_id(1),
                                         make_frame(bad, 2), diverid::testing::canonical_pose().with_frame_id(3)};
  const auto kept = filter_stream(frames);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].frame_id() == 1);
  CHECK(kept[1].frame_id() == 3);
}
