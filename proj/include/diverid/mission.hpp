#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "diverid/classify.hpp"
#include "diverid/pid.hpp"
#include "diverid/world.hpp"

namespace diverid {

enum class MissionState : std::uint8_t {
  Init,
  Search,
  Approach,
  DataCollection,
  AngleYaw,
  ModelTraining,
  Identification,
  Conclusion,
};
inline constexpr std::size_t kNumMissionStates = 8;

std::string_view state_name(MissionState s);
/// Throws FormatError for unknown names.
MissionState state_from_name(std::string_view name);

using Transition = std::pair<MissionState, MissionState>;
/// Every legal edge of the mission state machine.
const std::vector<Transition>& transitions();
bool is_legal(MissionState from, MissionState to);

enum class MissionMode : std::uint8_t { Offline, Online };
std::string_view mode_name(MissionMode m);

struct MissionConfig {
  MissionMode mode = MissionMode::Offline;
  int frames = 50;  // F
  double desired_distance = 2.0;
  /// APPROACH ends once |distance - desired| <= band * desired.
  double distance_band = 0.1;
  /// Number of divers the robot knows are present; 0 means the scene size.
  int n_divers_known = 0;
  /// Offline: the label to look for (required). Online: overrides the
  /// randomly assigned target.
  std::optional<int> target;
  double dt = 0.1;
  double search_rate = 0.4;  // rad/s, counter-clockwise
  double yaw_step = 0.35;    // rad
  double yaw_rate = 0.5;     // rad/s
  double state_timeout = 60.0;
  double global_timeout = 900.0;
  int frames_per_tick = 3;
  PidGains distance_pid{0.8, 0.05, 0.1, -0.6, 0.6};
  PidGains heading_pid{1.5, 0.0, 0.1, -0.8, 0.8};
  DrpConfig drp;
  FilterConfig filter;
  ClassifierConfig classifiers;
  /// Variants fitted in MODEL_TRAINING and the one that makes decisions.
  std::vector<std::string> online_variants = {"All_NN_SVM", "All_NN_KNN", "All_KNN", "All_SVM"};
  std::string decision_variant = "All_NN_SVM";
  std::uint64_t seed = 0;

  void validate() const;
  static MissionConfig from_config(const Config& cfg);
};

/// Trained models the mission may use: the identification model (offline)
/// or the frozen embedding (online).
struct MissionModels {
  std::shared_ptr<const IdentModel> offline;
  std::shared_ptr<const EmbedNet> embed;
};

enum class Outcome : std::uint8_t { TruePositive, TrueNegative, FalsePositive, FalseNegative };
std::string_view outcome_name(Outcome o);
/// Prediction vs. target, judged against the true label.
Outcome classify_outcome(int predicted, int truth, int target);

struct Tally {
  int tp = 0;
  int tn = 0;
  int fp = 0;
  int fn = 0;

  void add(Outcome o);
  Tally& operator+=(const Tally& o);
  int total() const { return tp + tn + fp + fn; }
  /// (TP + TN) / (TP + TN + FP + FN); 0 when empty.
  double accuracy() const;
};

struct TickRecord {
  std::int64_t tick = 0;
  MissionState state = MissionState::Init;
  RobotPose robot;
  DrpEstimate drp;
  double v = 0.0;
  double omega = 0.0;
};

struct TransitionRecord {
  std::int64_t tick = 0;
  MissionState from = MissionState::Init;
  MissionState to = MissionState::Init;
  std::string reason;
};

struct IdentificationRecord {
  std::int64_t tick = 0;
  std::size_t diver = 0;  // scene index
  int truth = 0;
  int predicted = 0;
  int target = 0;
  std::map<int, int> votes;
  Outcome outcome = Outcome::TrueNegative;
};

struct TrainingRecord {
  std::int64_t tick = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<std::string> variants;
  int assigned_target = 0;
  /// Scene index of each online label.
  std::vector<std::size_t> label_to_diver;
  double wall_seconds = 0.0;
};

struct MissionLog {
  MissionMode mode = MissionMode::Offline;
  std::vector<TickRecord> ticks;
  std::vector<TransitionRecord> transitions;
  std::vector<IdentificationRecord> identifications;
  std::vector<TrainingRecord> trainings;
  Tally tally;
  std::optional<int> target;
  bool found = false;      // concluded with prediction == target
  bool correct = false;    // ... and that diver really is the target
  bool timed_out = false;
  MissionState final_state = MissionState::Init;
  std::array<double, kNumMissionStates> sim_seconds{};
  std::array<double, kNumMissionStates> wall_seconds{};
};

/// Tick the state machine at cfg.dt until CONCLUSION or the global timeout.
MissionLog run_mission(const WorldScene& scene, const MissionConfig& cfg, const MissionModels& models);

/// One JSON object per line: ticks, transitions, identifications, trainings,
/// then a summary. Wall times are omitted unless asked for; everything else
/// is a pure function of (scene, cfg, models).
std::string mission_log_jsonl(const MissionLog& log, bool include_wall_time = false, bool include_ticks = true);
std::string mission_summary_json(const MissionLog& log, bool include_wall_time = false);

}  // namespace diverid
