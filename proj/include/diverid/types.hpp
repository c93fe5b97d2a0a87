#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "diverid/errors.hpp"

namespace diverid {

inline constexpr std::size_t kNumJoints = 10;
inline constexpr std::size_t kNumAd = 10;
inline constexpr std::size_t kNumAdr = kNumAd * (kNumAd - 1) / 2;
inline constexpr std::size_t kEmbeddingDim = 16;

/// The ten body joints kept from a 17-keypoint pose estimate.
enum class Joint : std::uint8_t {
  LeftShoulder,
  RightShoulder,
  LeftElbow,
  RightElbow,
  LeftWrist,
  RightWrist,
  LeftHip,
  RightHip,
  LeftKnee,
  RightKnee,
};

inline constexpr std::array<Joint, kNumJoints> kAllJoints = {
    Joint::LeftShoulder, Joint::RightShoulder, Joint::LeftElbow, Joint::RightElbow,
    Joint::LeftWrist,    Joint::RightWrist,    Joint::LeftHip,   Joint::RightHip,
    Joint::LeftKnee,     Joint::RightKnee,
};

std::string_view joint_name(Joint j);
std::optional<Joint> joint_from_name(std::string_view name);

/// Anthropometric segment AD1..AD10 as a pair of joints.
struct Segment {
  Joint a;
  Joint b;
  std::string_view name;
};

/// Segment table indexed 0..9 for AD1..AD10.
inline constexpr std::array<Segment, kNumAd> kSegments = {{
    {Joint::LeftShoulder, Joint::RightShoulder, "shoulder_width"},
    {Joint::LeftHip, Joint::RightHip, "hip_width"},
    {Joint::LeftShoulder, Joint::LeftElbow, "left_upper_arm"},
    {Joint::RightShoulder, Joint::RightElbow, "right_upper_arm"},
    {Joint::LeftElbow, Joint::LeftWrist, "left_lower_arm"},
    {Joint::RightElbow, Joint::RightWrist, "right_lower_arm"},
    {Joint::LeftShoulder, Joint::LeftHip, "left_torso"},
    {Joint::RightShoulder, Joint::RightHip, "right_torso"},
    {Joint::LeftHip, Joint::LeftKnee, "left_thigh"},
    {Joint::RightHip, Joint::RightKnee, "right_thigh"},
}};

namespace ad {
inline constexpr std::size_t kShoulderWidth = 0;
inline constexpr std::size_t kHipWidth = 1;
inline constexpr std::size_t kLeftUpperArm = 2;
inline constexpr std::size_t kRightUpperArm = 3;
inline constexpr std::size_t kLeftLowerArm = 4;
inline constexpr std::size_t kRightLowerArm = 5;
inline constexpr std::size_t kLeftTorso = 6;
inline constexpr std::size_t kRightTorso = 7;
inline constexpr std::size_t kLeftThigh = 8;
inline constexpr std::size_t kRightThigh = 9;
}  // namespace ad

/// (i, j) with i < j for ADR slot `k`, lexicographic order.
std::pair<std::size_t, std::size_t> adr_pair(std::size_t k);
/// Inverse of adr_pair; requires i < j < kNumAd.
std::size_t adr_index(std::size_t i, std::size_t j);

struct Keypoint {
  double x = 0.0;
  double y = 0.0;  // image convention: grows downward
  double confidence = 1.0;

  /// Throws InvalidArgument on non-finite coordinates or confidence outside [0, 1].
  void validate() const;
};

/// Ten keypoints of one diver in one frame. Always holds exactly the ten
/// selected joints.
class PoseFrame {
 public:
  PoseFrame() = default;
  PoseFrame(const std::array<Keypoint, kNumJoints>& joints, std::int64_t frame_id,
            std::optional<int> label = std::nullopt);

  /// Build from a name-keyed map; throws InvalidArgument on a missing or
  /// unknown joint name.
  static PoseFrame from_named(const std::map<std::string, Keypoint>& joints, std::int64_t frame_id,
                              std::optional<int> label = std::nullopt);

  const Keypoint& operator[](Joint j) const { return joints_[static_cast<std::size_t>(j)]; }
  const std::array<Keypoint, kNumJoints>& joints() const { return joints_; }
  std::int64_t frame_id() const { return frame_id_; }
  const std::optional<int>& label() const { return label_; }

  PoseFrame with_joint(Joint j, Keypoint k) const;
  PoseFrame with_label(std::optional<int> label) const;
  PoseFrame with_frame_id(std::int64_t id) const;

  bool operator==(const PoseFrame& other) const;

 private:
  std::array<Keypoint, kNumJoints> joints_{};
  std::int64_t frame_id_ = 0;
  std::optional<int> label_;
};

double joint_distance(const PoseFrame& f, Joint a, Joint b);

/// Multiply every coordinate by `s` about the image origin.
PoseFrame pose_scale(const PoseFrame& frame, double s);

/// Ten segment lengths in pixels, all strictly positive.
class AdVector {
 public:
  explicit AdVector(const std::array<double, kNumAd>& values);
  const std::array<double, kNumAd>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::array<double, kNumAd> values_;
};

/// 45 pairwise segment ratios AD_i / AD_j (i < j).
class AdrVector {
 public:
  explicit AdrVector(const std::array<double, kNumAdr>& values);
  const std::array<double, kNumAdr>& values() const { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }

 private:
  std::array<double, kNumAdr> values_;
};

class Embedding {
 public:
  explicit Embedding(const std::array<double, kEmbeddingDim>& values);
  const std::array<double, kEmbeddingDim>& values() const { return values_; }

 private:
  std::array<double, kEmbeddingDim> values_;
};

enum class IdentityKind : std::uint8_t { Diver, Swimmer };

std::string_view kind_name(IdentityKind k);
IdentityKind kind_from_name(std::string_view name);

struct IdentityLabel {
  int id = 0;
  IdentityKind kind = IdentityKind::Diver;
};

}  // namespace diverid
