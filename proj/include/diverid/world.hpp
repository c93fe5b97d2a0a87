#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "diverid/body_model.hpp"
#include "diverid/datagen.hpp"

namespace diverid {

struct RobotPose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;  // radians, counter-clockwise from +x
};

struct DiverPlacement {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  AnthropometrySpec body;
};

/// Simulated divers around a robot. Divers hover in place and face the
/// camera; the camera looks along the robot heading.
struct WorldScene {
  std::vector<DiverPlacement> divers;
  RobotPose robot;
  Camera camera;
  NoiseModel noise;
  std::uint64_t seed = 0;

  double half_fov() const { return camera.half_fov(); }
  /// Throws InvalidArgument on repeated identities or non-finite placements.
  void validate() const;
};

/// Range and bearing (positive to the image right) of a point seen from `robot`.
struct RelativePosition {
  double range = 0.0;
  double bearing = 0.0;
};
RelativePosition relative_position(const RobotPose& robot, const Eigen::Vector2d& p);
bool in_view(const WorldScene& scene, const RobotPose& robot, std::size_t diver, double max_range);

enum class DrpSource : std::uint8_t { BoundingBox, Pose };
std::string_view drp_source_name(DrpSource s);

struct DrpConfig {
  /// Distance proxy uses these nominal body sizes (meters).
  double assumed_shoulder_width = 0.38;
  double assumed_body_height = 0.90;  // shoulder-to-knee
  /// Pose keypoints are trusted inside this range; the box proxy beyond it.
  double pose_range = 3.0;
  double detect_range = 12.0;
};

struct DrpEstimate {
  bool available = false;
  double distance = 0.0;  // meters
  double bearing = 0.0;   // radians
  DrpSource source = DrpSource::BoundingBox;
  /// Scene index of the diver the estimate refers to (simulator bookkeeping).
  std::size_t diver = 0;
};

/// Estimate the diver-relative position of the nearest visible diver, or of
/// `lock` when given. Divers in `exclude` are ignored. With `rng` null the
/// measurement is noise-free; otherwise the scene's pixel noise is applied.
DrpEstimate drp_update(const WorldScene& scene, const RobotPose& robot, const DrpConfig& cfg = {},
                       std::mt19937_64* rng = nullptr, std::optional<std::size_t> lock = std::nullopt,
                       const std::set<std::size_t>& exclude = {});

/// `n` noisy, unlabelled keypoint frames of one diver seen from `robot`.
/// Throws InvalidArgument when the diver is outside the field of view.
std::vector<PoseFrame> generate_diver_frames(const WorldScene& scene, std::size_t diver, const RobotPose& robot,
                                             int n, const NoiseModel& noise, std::mt19937_64& rng,
                                             std::int64_t first_frame_id = 0);

/// Scene with `n_divers` identities drawn from the diver members of
/// `population`, spread around the robot at ranges in [min_range, max_range].
struct SceneLayout {
  int n_divers = 3;
  double min_range = 4.0;
  double max_range = 7.0;
  /// Divers sit at evenly spaced angles around the robot, each perturbed
  /// by up to this much (radians).
  double bearing_jitter = 0.25;
};
WorldScene make_random_scene(const std::vector<AnthropometrySpec>& population, const SceneLayout& layout,
                             const NoiseModel& noise, std::uint64_t seed, const Camera& camera = {});

// Scene file (JSON):
//   {"format": "diverid-scene", "version": 1, "seed": n,
//    "robot": {"x":, "y":, "yaw":}, "camera": {...}, "noise": {...},
//    "divers": [{"label": id, "kind": "diver", "x":, "y":, "segments_m": [10 values]?}, ...]}
// A diver without "segments_m" takes its body from `population` by label.
std::string scene_to_json(const WorldScene& scene);
WorldScene scene_from_json(const std::string& text, const std::vector<AnthropometrySpec>& population = {});
void write_scene_file(const std::filesystem::path& path, const WorldScene& scene);
WorldScene read_scene_file(const std::filesystem::path& path, const std::vector<AnthropometrySpec>& population = {});

}  // namespace diverid
