#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

#include <Eigen/Core>

#include "diverid/types.hpp"

namespace diverid {

/// True segment lengths (meters, AD1..AD10 order) of one person.
struct AnthropometrySpec {
  IdentityLabel label;
  std::array<double, kNumAd> segments{};

  void validate() const;
};

/// Ideal pinhole camera looking along the robot heading.
struct Camera {
  double focal_px = 800.0;
  double cx = 640.0;
  double cy = 360.0;

  double half_fov() const;
};

/// Limb angles (radians, measured outward from straight down) for one frame.
struct LimbAngles {
  double left_upper = 0.3;
  double right_upper = 0.3;
  double left_lower = 0.4;
  double right_lower = 0.4;
  double left_leg = 0.0;
  double right_leg = 0.0;
};

LimbAngles random_limb_angles(std::mt19937_64& rng);

/// Joint positions in the frontal body plane (meters; u to the image right,
/// v downward, origin between the shoulders). Every segment length equals
/// the matching entry of `spec.segments` exactly.
std::array<Eigen::Vector2d, kNumJoints> body_points(const AnthropometrySpec& spec, const LimbAngles& limbs);

/// Vertical shoulder-to-knee extent of the body points (meters).
double body_extent(const std::array<Eigen::Vector2d, kNumJoints>& pts);

/// Project an upright, camera-facing body at range `distance` and `bearing`
/// (radians, positive to the image right). The body-plane to pixel map is a
/// uniform scale focal/distance plus a translation.
PoseFrame project_body(const std::array<Eigen::Vector2d, kNumJoints>& pts, double distance, double bearing,
                       const Camera& cam, std::int64_t frame_id, std::optional<int> label);

enum class CorruptionMode : std::uint8_t {
  /// Displace one elbow or wrist, or swap the two wrists.
  ArmGlitch,
  /// Mirror both knees above the hips.
  KneesAboveHips,
};

std::string_view corruption_name(CorruptionMode m);
/// Throws FormatError for unknown names.
CorruptionMode corruption_from_name(std::string_view name);

struct NoiseModel {
  double pixel_sigma = 2.0;
  double p_corrupt = 0.1;
  CorruptionMode mode = CorruptionMode::ArmGlitch;

  void validate() const;
};

/// Gaussian pixel noise on every joint, then corruption with probability
/// p_corrupt.
PoseFrame apply_noise(const PoseFrame& clean, const NoiseModel& noise, std::mt19937_64& rng);

}  // namespace diverid
