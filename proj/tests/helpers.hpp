#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "diverid/types.hpp"

namespace diverid::testing {

/// Upright frontal pose (pixels) that passes every filter condition.
inline std::map<Joint, Keypoint> canonical_joints() {
  return {
      {Joint::LeftShoulder, {0, 0}},   {Joint::RightShoulder, {40, 0}}, {Joint::LeftHip, {0, 60}},
      {Joint::RightHip, {40, 60}},     {Joint::LeftKnee, {0, 110}},     {Joint::RightKnee, {40, 110}},
      {Joint::LeftElbow, {-18, 24}},   {Joint::LeftWrist, {-33, 44}},   {Joint::RightElbow, {58, 24}},
      {Joint::RightWrist, {73, 44}},
  };
}

inline PoseFrame make_frame(const std::map<Joint, Keypoint>& joints, std::int64_t id = 0) {
  std::array<Keypoint, kNumJoints> arr{};
  for (const auto& [j, k] : joints) arr[static_cast<std::size_t>(j)] = k;
  return PoseFrame(arr, id);
}

inline PoseFrame canonical_pose() { return make_frame(canonical_joints()); }

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::path(DIVERID_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace diverid::testing
