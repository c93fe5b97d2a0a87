#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "diverid/config.hpp"
#include "diverid/types.hpp"

namespace diverid {

/// The eleven anthropometric sanity checks applied to a pose estimate.
enum class FilterCondition : std::uint8_t {
  C1 = 1,  // both hips below both shoulders
  C2,      // both knees below both hips
  C3,      // hip width > hw_min
  C4,      // left/right thighs similar
  C5,      // left/right lower arms similar
  C6,      // each upper arm slightly longer than its lower arm
  C7,      // knee-to-knee distance > k_th
  C8,      // each torso side slightly longer than shoulder width
  C9,      // each torso side < 2 x same-side thigh
  C10,     // shoulder width > sw_min
  C11,     // each torso side longer than every arm segment
};

inline constexpr int kNumConditions = 11;

std::string_view condition_name(FilterCondition c);

struct FilterConfig {
  double hw_min = 10.0;
  double k_th = 10.0;
  double sw_min = 10.0;
  /// Largest allowed max/min ratio of two lengths that must be "similar".
  double similarity_band = 1.43;
  /// "Slightly longer" means lower < longer/shorter < upper.
  double slight_lower = 1.0;
  double slight_upper = 1.6;

  void validate() const;
  static FilterConfig from_config(const Config& cfg);
};

struct FilterReport {
  bool accepted = true;
  std::vector<FilterCondition> violated;  // ascending
};

/// Evaluates all eleven conditions (no short circuit).
FilterReport filter_pose(const PoseFrame& frame, const FilterConfig& cfg = {});

/// Accepted frames in input order.
std::vector<PoseFrame> filter_stream(const std::vector<PoseFrame>& frames, const FilterConfig& cfg = {});

}  // namespace diverid
