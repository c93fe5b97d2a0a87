#include "diverid/types.hpp"

#include <cmath>

namespace diverid {

namespace {

constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_wrist",
    "right_wrist",   "left_hip",       "right_hip",  "left_knee",  "right_knee",
};

}  // namespace

std::string_view joint_name(Joint j) { return kJointNames[static_cast<std::size_t>(j)]; }

std::optional<Joint> joint_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    if (kJointNames[i] == name) return kAllJoints[i];
  }
  return std::nullopt;
}

std::pair<std::size_t, std::size_t> adr_pair(std::size_t k) {
  if (k >= kNumAdr) throw InvalidArgument("ADR index out of range");
  std::size_t i = 0;
  std::size_t row = kNumAd - 1;
  while (k >= row) {
    k -= row;
    ++i;
    --row;
  }
  return {i, i + 1 + k};
}

std::size_t adr_index(std::size_t i, std::size_t j) {
  if (!(i < j && j < kNumAd)) throw InvalidArgument("ADR pair must satisfy i < j < 10");
  // rows before i contribute (9 + 8 + ... ) entries
  return i * (2 * kNumAd - i - 1) / 2 + (j - i - 1);
}

void Keypoint::validate() const {
  if (!std::isfinite(x) || !std::isfinite(y)) throw InvalidArgument("keypoint coordinates must be finite");
  if (!(confidence >= 0.0 && confidence <= 1.0)) throw InvalidArgument("keypoint confidence must lie in [0, 1]");
}

PoseFrame::PoseFrame(const std::array<Keypoint, kNumJoints>& joints, std::int64_t frame_id,
                     std::optional<int> label)
    : joints_(joints), frame_id_(frame_id), label_(label) {
  for (const auto& k : joints_) k.validate();
  if (label_ && *label_ < 0) throw InvalidArgument("identity labels are non-negative");
}

PoseFrame PoseFrame::from_named(const std::map<std::string, Keypoint>& joints, std::int64_t frame_id,
                                std::optional<int> label) {
  std::array<Keypoint, kNumJoints> arr{};
  std::array<bool, kNumJoints> seen{};
  for (const auto& [name, kp] : joints) {
    auto j = joint_from_name(name);
    if (!j) throw InvalidArgument("unknown joint '" + name + "'");
    arr[static_cast<std::size_t>(*j)] = kp;
    seen[static_cast<std::size_t>(*j)] = true;
  }
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    if (!seen[i]) throw InvalidArgument("missing joint '" + std::string(kJointNames[i]) + "'");
  }
  return PoseFrame(arr, frame_id, label);
}

PoseFrame PoseFrame::with_joint(Joint j, Keypoint k) const {
  auto arr = joints_;
  arr[static_cast<std::size_t>(j)] = k;
  return PoseFrame(arr, frame_id_, label_);
}

PoseFrame PoseFrame::with_label(std::optional<int> label) const { return PoseFrame(joints_, frame_id_, label); }

PoseFrame PoseFrame::with_frame_id(std::int64_t id) const { return PoseFrame(joints_, id, label_); }

bool PoseFrame::operator==(const PoseFrame& other) const {
  if (frame_id_ != other.frame_id_ || label_ != other.label_) return false;
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    const auto& a = joints_[i];
    const auto& b = other.joints_[i];
    if (a.x != b.x || a.y != b.y || a.confidence != b.confidence) return false;
  }
  return true;
}

double joint_distance(const PoseFrame& f, Joint a, Joint b) {
  return std::hypot(f[a].x - f[b].x, f[a].y - f[b].y);
}

PoseFrame pose_scale(const PoseFrame& frame, double s) {
  if (!std::isfinite(s) || s <= 0.0) throw InvalidArgument("scale must be finite and positive");
  auto joints = frame.joints();
  for (auto& k : joints) {
    k.x *= s;
    k.y *= s;
  }
  return PoseFrame(joints, frame.frame_id(), frame.label());
}

AdVector::AdVector(const std::array<double, kNumAd>& values) : values_(values) {
  for (double v : values_) {
    if (!std::isfinite(v) || v <= 0.0) throw InvalidArgument("AD values must be finite and positive");
  }
}

AdrVector::AdrVector(const std::array<double, kNumAdr>& values) : values_(values) {
  for (double v : values_) {
    if (!std::isfinite(v) || v <= 0.0) throw InvalidArgument("ADR values must be finite and positive");
  }
}

Embedding::Embedding(const std::array<double, kEmbeddingDim>& values) : values_(values) {
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidArgument("embedding values must be finite");
  }
}

std::string_view kind_name(IdentityKind k) { return k == IdentityKind::Diver ? "diver" : "swimmer"; }

IdentityKind kind_from_name(std::string_view name) {
  if (name == "diver") return IdentityKind::Diver;
  if (name == "swimmer") return IdentityKind::Swimmer;
  throw InvalidArgument("unknown identity kind '" + std::string(name) + "'");
}

}  // namespace diverid
