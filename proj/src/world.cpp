#include "diverid/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace diverid {

void WorldScene::validate() const {
  std::set<int> ids;
  for (const auto& d : divers) {
    if (!d.position.allFinite()) throw InvalidArgument("diver placement must be finite");
    if (!ids.insert(d.body.label.id).second) {
      throw InvalidArgument("diver identity " + std::to_string(d.body.label.id) + " appears twice in the scene");
    }
    d.body.validate();
  }
  if (!std::isfinite(robot.x) || !std::isfinite(robot.y) || !std::isfinite(robot.yaw)) {
    throw InvalidArgument("robot pose must be finite");
  }
  noise.validate();
}

RelativePosition relative_position(const RobotPose& robot, const Eigen::Vector2d& p) {
  const Eigen::Vector2d d = p - Eigen::Vector2d(robot.x, robot.y);
  const Eigen::Vector2d fwd(std::cos(robot.yaw), std::sin(robot.yaw));
  const Eigen::Vector2d right(std::sin(robot.yaw), -std::cos(robot.yaw));
  return {d.norm(), std::atan2(d.dot(right), d.dot(fwd))};
}

bool in_view(const WorldScene& scene, const RobotPose& robot, std::size_t diver, double max_range) {
  const auto rel = relative_position(robot, scene.divers.at(diver).position);
  return rel.range > 0.0 && rel.range <= max_range && std::abs(rel.bearing) < scene.half_fov();
}

std::string_view drp_source_name(DrpSource s) { return s == DrpSource::Pose ? "pose" : "bounding_box"; }

DrpEstimate drp_update(const WorldScene& scene, const RobotPose& robot, const DrpConfig& cfg, std::mt19937_64* rng,
                       std::optional<std::size_t> lock, const std::set<std::size_t>& exclude) {
  DrpEstimate est;
  std::optional<std::size_t> best;
  double best_range = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.divers.size(); ++i) {
    if (lock && *lock != i) continue;
    if (exclude.count(i) != 0) continue;
    if (!in_view(scene, robot, i, cfg.detect_range)) continue;
    const double r = relative_position(robot, scene.divers[i].position).range;
    if (r < best_range) {
      best_range = r;
      best = i;
    }
  }
  if (!best) return est;

  const auto rel = relative_position(robot, scene.divers[*best].position);
  const auto pts = body_points(scene.divers[*best].body, LimbAngles{});
  PoseFrame frame = project_body(pts, rel.range, rel.bearing, scene.camera, 0, std::nullopt);
  if (rng != nullptr) {
    NoiseModel measure = scene.noise;
    measure.p_corrupt = 0.0;
    frame = apply_noise(frame, measure, *rng);
  }

  double v_lo = std::numeric_limits<double>::infinity();
  double v_hi = -v_lo;
  double u_lo = v_lo;
  double u_hi = -v_lo;
  for (Joint j : kAllJoints) {
    v_lo = std::min(v_lo, frame[j].y);
    v_hi = std::max(v_hi, frame[j].y);
    u_lo = std::min(u_lo, frame[j].x);
    u_hi = std::max(u_hi, frame[j].x);
  }
  const double f = scene.camera.focal_px;
  const double box_h = v_hi - v_lo;
  if (!(box_h > 0.0)) return est;
  const double box_distance = f * cfg.assumed_body_height / box_h;

  if (box_distance <= cfg.pose_range) {
    const double sw_px = joint_distance(frame, Joint::LeftShoulder, Joint::RightShoulder);
    if (!(sw_px > 0.0)) return est;
    const double mid_u = 0.5 * (frame[Joint::LeftShoulder].x + frame[Joint::RightShoulder].x);
    est.distance = f * cfg.assumed_shoulder_width / sw_px;
    est.bearing = std::atan((mid_u - scene.camera.cx) / f);
    est.source = DrpSource::Pose;
  } else {
    est.distance = box_distance;
    est.bearing = std::atan((0.5 * (u_lo + u_hi) - scene.camera.cx) / f);
    est.source = DrpSource::BoundingBox;
  }
  est.available = std::isfinite(est.distance) && est.distance > 0.0;
  est.diver = *best;
  return est;
}

std::vector<PoseFrame> generate_diver_frames(const WorldScene& scene, std::size_t diver, const RobotPose& robot,
                                             int n, const NoiseModel& noise, std::mt19937_64& rng,
                                             std::int64_t first_frame_id) {
  if (n < 0) throw InvalidArgument("frame count must be >= 0");
  if (!in_view(scene, robot, diver, std::numeric_limits<double>::infinity())) {
    throw InvalidArgument("diver " + std::to_string(diver) + " is outside the field of view");
  }
  const auto rel = relative_position(robot, scene.divers[diver].position);
  std::vector<PoseFrame> frames;
  frames.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto pts = body_points(scene.divers[diver].body, random_limb_angles(rng));
    const auto clean = project_body(pts, rel.range, rel.bearing, scene.camera, first_frame_id + i, std::nullopt);
    frames.push_back(apply_noise(clean, noise, rng));
  }
  return frames;
}

WorldScene make_random_scene(const std::vector<AnthropometrySpec>& population, const SceneLayout& layout,
                             const NoiseModel& noise, std::uint64_t seed, const Camera& camera) {
  if (layout.n_divers < 1) throw InvalidArgument("a scene needs at least one diver");
  if (!(layout.min_range > 0.0 && layout.min_range <= layout.max_range)) throw InvalidArgument("bad range bounds");
  std::vector<AnthropometrySpec> pool;
  for (const auto& p : population) {
    if (p.label.kind == IdentityKind::Diver) pool.push_back(p);
  }
  if (static_cast<int>(pool.size()) < layout.n_divers) {
    throw InvalidArgument("population has only " + std::to_string(pool.size()) + " divers");
  }
  auto rng = derive_rng(seed, 0x5ce4e);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double base = 2.0 * std::numbers::pi * unit(rng);
  WorldScene scene;
  scene.camera = camera;
  scene.noise = noise;
  scene.seed = seed;
  for (int k = 0; k < layout.n_divers; ++k) {
    const double angle = base + 2.0 * std::numbers::pi * k / layout.n_divers +
                         layout.bearing_jitter * (2.0 * unit(rng) - 1.0);
    const double range = layout.min_range + (layout.max_range - layout.min_range) * unit(rng);
    scene.divers.push_back({Eigen::Vector2d(range * std::cos(angle), range * std::sin(angle)),
                            pool[static_cast<std::size_t>(k)]});
  }
  scene.validate();
  return scene;
}

std::string scene_to_json(const WorldScene& scene) {
  nlohmann::ordered_json j;
  j["format"] = "diverid-scene";
  j["version"] = 1;
  j["seed"] = scene.seed;
  j["robot"] = {{"x", scene.robot.x}, {"y", scene.robot.y}, {"yaw", scene.robot.yaw}};
  j["camera"] = {{"focal_px", scene.camera.focal_px}, {"cx", scene.camera.cx}, {"cy", scene.camera.cy}};
  j["noise"] = {{"pixel_sigma", scene.noise.pixel_sigma},
                {"p_corrupt", scene.noise.p_corrupt},
                {"mode", std::string(corruption_name(scene.noise.mode))}};
  auto divers = nlohmann::ordered_json::array();
  for (const auto& d : scene.divers) {
    nlohmann::ordered_json e;
    e["label"] = d.body.label.id;
    e["kind"] = std::string(kind_name(d.body.label.kind));
    e["x"] = d.position.x();
    e["y"] = d.position.y();
    e["segments_m"] = d.body.segments;
    divers.push_back(e);
  }
  j["divers"] = divers;
  return j.dump(2);
}

WorldScene scene_from_json(const std::string& text, const std::vector<AnthropometrySpec>& population) {
  WorldScene scene;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "diverid-scene" || j.at("version") != 1) throw FormatError("not a scene file (v1)");
    scene.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("robot")) {
      const auto& r = j.at("robot");
      scene.robot = {r.value("x", 0.0), r.value("y", 0.0), r.value("yaw", 0.0)};
    }
    if (j.contains("camera")) {
      const auto& c = j.at("camera");
      scene.camera.focal_px = c.value("focal_px", scene.camera.focal_px);
      scene.camera.cx = c.value("cx", scene.camera.cx);
      scene.camera.cy = c.value("cy", scene.camera.cy);
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      scene.noise.pixel_sigma = n.value("pixel_sigma", scene.noise.pixel_sigma);
      scene.noise.p_corrupt = n.value("p_corrupt", scene.noise.p_corrupt);
      if (n.contains("mode")) scene.noise.mode = corruption_from_name(n.at("mode").get<std::string>());
    }
    for (const auto& e : j.at("divers")) {
      DiverPlacement d;
      const int label = e.at("label").get<int>();
      d.position = {e.at("x").get<double>(), e.at("y").get<double>()};
      if (e.contains("segments_m")) {
        d.body.label = {label, kind_from_name(e.value("kind", std::string("diver")))};
        d.body.segments = e.at("segments_m").get<std::array<double, kNumAd>>();
      } else {
        auto it = std::find_if(population.begin(), population.end(),
                               [&](const AnthropometrySpec& p) { return p.label.id == label; });
        if (it == population.end()) {
          throw FormatError("scene diver " + std::to_string(label) + " has no segments and no population entry");
        }
        d.body = *it;
      }
      scene.divers.push_back(d);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad scene: ") + e.what());
  }
  try {
    scene.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("bad scene: ") + e.what());
  }
  return scene;
}

void write_scene_file(const std::filesystem::path& path, const WorldScene& scene) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << scene_to_json(scene) << '\n';
}

WorldScene read_scene_file(const std::filesystem::path& path, const std::vector<AnthropometrySpec>& population) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str(), population);
}

}  // namespace diverid
