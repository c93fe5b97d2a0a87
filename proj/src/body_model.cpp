#include "diverid/body_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace diverid {

void AnthropometrySpec::validate() const {
  for (double s : segments) {
    if (!std::isfinite(s) || s <= 0.0) throw InvalidArgument("anthropometric segments must be positive");
  }
  const double half_gap = std::abs(segments[ad::kShoulderWidth] - segments[ad::kHipWidth]) / 2.0;
  if (segments[ad::kLeftTorso] <= half_gap || segments[ad::kRightTorso] <= half_gap) {
    throw InvalidArgument("torso sides too short to join shoulders and hips");
  }
}

double Camera::half_fov() const { return std::atan(cx / focal_px); }

LimbAngles random_limb_angles(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> upper(0.1, 0.7);
  std::uniform_real_distribution<double> bend(-0.2, 0.5);
  std::uniform_real_distribution<double> leg(0.0, 0.12);
  LimbAngles a;
  a.left_upper = upper(rng);
  a.right_upper = upper(rng);
  a.left_lower = a.left_upper + bend(rng);
  a.right_lower = a.right_upper + bend(rng);
  a.left_leg = leg(rng);
  a.right_leg = leg(rng);
  return a;
}

std::array<Eigen::Vector2d, kNumJoints> body_points(const AnthropometrySpec& spec, const LimbAngles& limbs) {
  spec.validate();
  const auto& s = spec.segments;
  std::array<Eigen::Vector2d, kNumJoints> p;
  auto at = [&](Joint j) -> Eigen::Vector2d& { return p[static_cast<std::size_t>(j)]; };

  const double sw = s[ad::kShoulderWidth];
  const double hw = s[ad::kHipWidth];
  at(Joint::LeftShoulder) = {-sw / 2.0, 0.0};
  at(Joint::RightShoulder) = {sw / 2.0, 0.0};

  const double dx = (sw - hw) / 2.0;
  at(Joint::LeftHip) = {-hw / 2.0, std::sqrt(s[ad::kLeftTorso] * s[ad::kLeftTorso] - dx * dx)};

  // Right hip: hip width away from the left hip and right-torso away from
  // the right shoulder; take the lower of the two circle intersections.
  {
    const Eigen::Vector2d c0 = at(Joint::LeftHip);
    const Eigen::Vector2d c1 = at(Joint::RightShoulder);
    const double r0 = hw;
    const double r1 = s[ad::kRightTorso];
    const double d = (c1 - c0).norm();
    const double a = (r0 * r0 - r1 * r1 + d * d) / (2.0 * d);
    const double h2 = r0 * r0 - a * a;
    if (!(h2 >= 0.0)) throw InvalidArgument("inconsistent torso and hip lengths");
    const double h = std::sqrt(h2);
    const Eigen::Vector2d e = (c1 - c0) / d;
    const Eigen::Vector2d mid = c0 + a * e;
    const Eigen::Vector2d perp(-e.y(), e.x());
    const Eigen::Vector2d q1 = mid + h * perp;
    const Eigen::Vector2d q2 = mid - h * perp;
    at(Joint::RightHip) = q1.y() >= q2.y() ? q1 : q2;
  }

  const auto limb = [](const Eigen::Vector2d& from, double len, double angle, double side) {
    return Eigen::Vector2d(from.x() + side * len * std::sin(angle), from.y() + len * std::cos(angle));
  };
  at(Joint::LeftElbow) = limb(at(Joint::LeftShoulder), s[ad::kLeftUpperArm], limbs.left_upper, -1.0);
  at(Joint::RightElbow) = limb(at(Joint::RightShoulder), s[ad::kRightUpperArm], limbs.right_upper, 1.0);
  at(Joint::LeftWrist) = limb(at(Joint::LeftElbow), s[ad::kLeftLowerArm], limbs.left_lower, -1.0);
  at(Joint::RightWrist) = limb(at(Joint::RightElbow), s[ad::kRightLowerArm], limbs.right_lower, 1.0);
  at(Joint::LeftKnee) = limb(at(Joint::LeftHip), s[ad::kLeftThigh], limbs.left_leg, -1.0);
  at(Joint::RightKnee) = limb(at(Joint::RightHip), s[ad::kRightThigh], limbs.right_leg, 1.0);
  return p;
}

double body_extent(const std::array<Eigen::Vector2d, kNumJoints>& pts) {
  const double top = std::min(pts[static_cast<std::size_t>(Joint::LeftShoulder)].y(),
                              pts[static_cast<std::size_t>(Joint::RightShoulder)].y());
  const double bottom = std::max(pts[static_cast<std::size_t>(Joint::LeftKnee)].y(),
                                 pts[static_cast<std::size_t>(Joint::RightKnee)].y());
  return bottom - top;
}

PoseFrame project_body(const std::array<Eigen::Vector2d, kNumJoints>& pts, double distance, double bearing,
                       const Camera& cam, std::int64_t frame_id, std::optional<int> label) {
  if (!(distance > 0.0) || !std::isfinite(distance)) throw InvalidArgument("projection distance must be positive");
  const double scale = cam.focal_px / distance;
  const double u0 = cam.cx + cam.focal_px * std::tan(bearing);
  const double v_mid = 0.5 * body_extent(pts);
  std::array<Keypoint, kNumJoints> k{};
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    k[i] = {u0 + scale * pts[i].x(), cam.cy + scale * (pts[i].y() - v_mid), 1.0};
  }
  return PoseFrame(k, frame_id, label);
}

void NoiseModel::validate() const {
  if (!(pixel_sigma >= 0.0)) throw InvalidArgument("pixel noise sigma must be >= 0");
  if (!(p_corrupt >= 0.0 && p_corrupt <= 1.0)) throw InvalidArgument("corruption probability must lie in [0, 1]");
}

std::string_view corruption_name(CorruptionMode m) {
  return m == CorruptionMode::ArmGlitch ? "arm_glitch" : "knees_above_hips";
}

CorruptionMode corruption_from_name(std::string_view name) {
  if (name == "arm_glitch") return CorruptionMode::ArmGlitch;
  if (name == "knees_above_hips") return CorruptionMode::KneesAboveHips;
  throw FormatError("unknown corruption mode '" + std::string(name) + "'");
}

PoseFrame apply_noise(const PoseFrame& clean, const NoiseModel& noise, std::mt19937_64& rng) {
  noise.validate();
  auto joints = clean.joints();
  if (noise.pixel_sigma > 0.0) {
    std::normal_distribution<double> n(0.0, noise.pixel_sigma);
    for (auto& k : joints) {
      k.x += n(rng);
      k.y += n(rng);
    }
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (noise.p_corrupt > 0.0 && unit(rng) < noise.p_corrupt) {
    auto at = [&](Joint j) -> Keypoint& { return joints[static_cast<std::size_t>(j)]; };
    if (noise.mode == CorruptionMode::KneesAboveHips) {
      for (auto [hip, knee] : {std::pair{Joint::LeftHip, Joint::LeftKnee}, std::pair{Joint::RightHip, Joint::RightKnee}}) {
        at(knee).y = at(hip).y - std::abs(at(knee).y - at(hip).y);
      }
    } else {
      const double sw = std::hypot(at(Joint::LeftShoulder).x - at(Joint::RightShoulder).x,
                                   at(Joint::LeftShoulder).y - at(Joint::RightShoulder).y);
      std::uniform_int_distribution<int> which(0, 4);
      const int w = which(rng);
      if (w == 4) {
        std::swap(at(Joint::LeftWrist), at(Joint::RightWrist));
      } else {
        static constexpr std::array<Joint, 4> arm = {Joint::LeftElbow, Joint::RightElbow, Joint::LeftWrist,
                                                     Joint::RightWrist};
        std::uniform_real_distribution<double> mag(0.3, 1.0);
        std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
        const double m = mag(rng) * sw;
        const double a = ang(rng);
        auto& k = at(arm[static_cast<std::size_t>(w)]);
        k.x += m * std::cos(a);
        k.y += m * std::sin(a);
        k.confidence = 0.3;
      }
    }
  }
  return PoseFrame(joints, clean.frame_id(), clean.label());
}

}  // namespace diverid
