#include "diverid/pose_filter.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace diverid {

std::string_view condition_name(FilterCondition c) {
  static constexpr std::array<std::string_view, kNumConditions> names = {
      "C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10", "C11"};
  return names[static_cast<int>(c) - 1];
}

void FilterConfig::validate() const {
  if (!(hw_min > 0 && k_th > 0 && sw_min > 0)) throw InvalidArgument("filter minimums must be positive");
  if (!(similarity_band >= 1.0)) throw InvalidArgument("filter.similarity_band must be >= 1");
  if (!(slight_lower >= 1.0 && slight_lower < slight_upper)) {
    throw InvalidArgument("filter slight band must satisfy 1 <= lower < upper");
  }
}

FilterConfig FilterConfig::from_config(const Config& cfg) {
  FilterConfig f;
  f.hw_min = cfg.get_double("filter.hw_min", f.hw_min);
  f.k_th = cfg.get_double("filter.k_th", f.k_th);
  f.sw_min = cfg.get_double("filter.sw_min", f.sw_min);
  f.similarity_band = cfg.get_double("filter.similarity_band", f.similarity_band);
  f.slight_lower = cfg.get_double("filter.slight_lower", f.slight_lower);
  f.slight_upper = cfg.get_double("filter.slight_upper", f.slight_upper);
  f.validate();
  return f;
}

namespace {

bool similar(double a, double b, double band) {
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  if (!(lo > 0.0)) return false;
  return hi / lo <= band;
}

// Zero-length denominators count as a violation.
bool slightly_longer(double longer, double shorter, const FilterConfig& cfg) {
  if (!(shorter > 0.0)) return false;
  const double r = longer / shorter;
  return r > cfg.slight_lower && r < cfg.slight_upper;
}

}  // namespace

FilterReport filter_pose(const PoseFrame& f, const FilterConfig& cfg) {
  using J = Joint;
  const auto d = [&](J a, J b) { return joint_distance(f, a, b); };

  const double sw = d(J::LeftShoulder, J::RightShoulder);
  const double hw = d(J::LeftHip, J::RightHip);
  const double ua_l = d(J::LeftShoulder, J::LeftElbow);
  const double ua_r = d(J::RightShoulder, J::RightElbow);
  const double la_l = d(J::LeftElbow, J::LeftWrist);
  const double la_r = d(J::RightElbow, J::RightWrist);
  const double t_l = d(J::LeftShoulder, J::LeftHip);
  const double t_r = d(J::RightShoulder, J::RightHip);
  const double th_l = d(J::LeftHip, J::LeftKnee);
  const double th_r = d(J::RightHip, J::RightKnee);
  const double kk = d(J::LeftKnee, J::RightKnee);

  const double hip_top = std::min(f[J::LeftHip].y, f[J::RightHip].y);
  const double shoulder_bottom = std::max(f[J::LeftShoulder].y, f[J::RightShoulder].y);
  const double knee_top = std::min(f[J::LeftKnee].y, f[J::RightKnee].y);
  const double hip_bottom = std::max(f[J::LeftHip].y, f[J::RightHip].y);

  const std::array<bool, kNumConditions> ok = {
      hip_top > shoulder_bottom,
      knee_top > hip_bottom,
      hw > cfg.hw_min,
      similar(th_l, th_r, cfg.similarity_band),
      similar(la_l, la_r, cfg.similarity_band),
      slightly_longer(ua_l, la_l, cfg) && slightly_longer(ua_r, la_r, cfg),
      kk > cfg.k_th,
      slightly_longer(t_l, sw, cfg) && slightly_longer(t_r, sw, cfg),
      th_l > 0.0 && th_r > 0.0 && t_l < 2.0 * th_l && t_r < 2.0 * th_r,
      sw > cfg.sw_min,
      std::min(t_l, t_r) > std::max({ua_l, ua_r, la_l, la_r}),
  };

  FilterReport report;
  for (int i = 0; i < kNumConditions; ++i) {
    if (!ok[i]) report.violated.push_back(static_cast<FilterCondition>(i + 1));
  }
  report.accepted = report.violated.empty();
  return report;
}

std::vector<PoseFrame> filter_stream(const std::vector<PoseFrame>& frames, const FilterConfig& cfg) {
  std::vector<PoseFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    if (filter_pose(f, cfg).accepted) out.push_back(f);
  }
  return out;
}

}  // namespace diverid
