#include "diverid/mission.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

namespace diverid {

namespace {

constexpr std::array<std::string_view, kNumMissionStates> kStateNames = {
    "INIT", "SEARCH", "APPROACH", "DATA_COLLECTION", "ANGLE_YAW", "MODEL_TRAINING", "IDENTIFICATION", "CONCLUSION",
};

std::size_t idx(MissionState s) { return static_cast<std::size_t>(s); }

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

}  // namespace

std::string_view state_name(MissionState s) { return kStateNames[idx(s)]; }

MissionState state_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kStateNames.size(); ++i) {
    if (kStateNames[i] == name) return static_cast<MissionState>(i);
  }
  throw FormatError("unknown mission state '" + std::string(name) + "'");
}

const std::vector<Transition>& transitions() {
  using S = MissionState;
  static const std::vector<Transition> edges = {
      {S::Init, S::Search},
      {S::Search, S::Approach},
      {S::Approach, S::DataCollection},
      {S::Approach, S::Search},
      {S::DataCollection, S::Identification},
      {S::DataCollection, S::AngleYaw},
      {S::DataCollection, S::ModelTraining},
      {S::DataCollection, S::Search},
      {S::ModelTraining, S::Init},
      {S::Identification, S::Conclusion},
      {S::Identification, S::AngleYaw},
      {S::AngleYaw, S::Search},
  };
  return edges;
}

bool is_legal(MissionState from, MissionState to) {
  const auto& e = transitions();
  return std::find(e.begin(), e.end(), Transition{from, to}) != e.end();
}

std::string_view mode_name(MissionMode m) { return m == MissionMode::Offline ? "offline" : "online"; }

void MissionConfig::validate() const {
  if (frames < 1) throw InvalidArgument("F must be >= 1");
  if (!(desired_distance > 0.0)) throw InvalidArgument("desired_distance must be > 0");
  if (!(distance_band > 0.0 && distance_band < 1.0)) throw InvalidArgument("distance band must lie in (0, 1)");
  if (n_divers_known < 0) throw InvalidArgument("n_divers_known must be >= 0");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be > 0");
  if (!(search_rate > 0.0 && yaw_rate > 0.0 && yaw_step > 0.0)) throw InvalidArgument("rotation rates must be > 0");
  if (!(state_timeout > 0.0 && global_timeout > 0.0)) throw InvalidArgument("timeouts must be > 0");
  if (frames_per_tick < 1) throw InvalidArgument("frames_per_tick must be >= 1");
  if (mode == MissionMode::Offline && !target) throw InvalidArgument("offline missions need a target label");
  if (mode == MissionMode::Online) {
    if (std::find(online_variants.begin(), online_variants.end(), decision_variant) == online_variants.end()) {
      throw InvalidArgument("decision variant must be one of the online variants");
    }
    for (const auto& v : online_variants) {
      if (!ModelVariant::parse(v).online_trainable()) throw InvalidVariant(v + " is not trained online");
    }
  }
  filter.validate();
}

MissionConfig MissionConfig::from_config(const Config& c) {
  MissionConfig m;
  const auto mode = c.get_string("mission.mode", "offline");
  if (mode == "offline") {
    m.mode = MissionMode::Offline;
  } else if (mode == "online") {
    m.mode = MissionMode::Online;
  } else {
    throw FormatError("mission.mode must be offline or online");
  }
  m.frames = static_cast<int>(c.get_int("mission.frames", m.frames));
  m.desired_distance = c.get_double("mission.desired_distance", m.desired_distance);
  m.distance_band = c.get_double("mission.distance_band", m.distance_band);
  m.n_divers_known = static_cast<int>(c.get_int("mission.n_divers_known", m.n_divers_known));
  if (c.has("mission.target")) m.target = static_cast<int>(c.get_int("mission.target", 0));
  m.dt = c.get_double("mission.dt", m.dt);
  m.search_rate = c.get_double("mission.search_rate", m.search_rate);
  m.yaw_step = c.get_double("mission.yaw_step", m.yaw_step);
  m.yaw_rate = c.get_double("mission.yaw_rate", m.yaw_rate);
  m.state_timeout = c.get_double("mission.state_timeout", m.state_timeout);
  m.global_timeout = c.get_double("mission.global_timeout", m.global_timeout);
  m.frames_per_tick = static_cast<int>(c.get_int("mission.frames_per_tick", m.frames_per_tick));
  for (auto [prefix, gains] : {std::pair{"pid.distance.", &m.distance_pid}, std::pair{"pid.heading.", &m.heading_pid}}) {
    const std::string p = prefix;
    gains->kp = c.get_double(p + "kp", gains->kp);
    gains->ki = c.get_double(p + "ki", gains->ki);
    gains->kd = c.get_double(p + "kd", gains->kd);
    const double limit = c.get_double(p + "limit", gains->out_max);
    gains->out_min = -limit;
    gains->out_max = limit;
  }
  m.drp.assumed_shoulder_width = c.get_double("drp.assumed_shoulder_width", m.drp.assumed_shoulder_width);
  m.drp.assumed_body_height = c.get_double("drp.assumed_body_height", m.drp.assumed_body_height);
  m.drp.pose_range = c.get_double("drp.pose_range", m.drp.pose_range);
  m.drp.detect_range = c.get_double("drp.detect_range", m.drp.detect_range);
  m.filter = FilterConfig::from_config(c);
  m.classifiers = ClassifierConfig::from_config(c);
  m.decision_variant = c.get_string("mission.decision_variant", m.decision_variant);
  m.seed = static_cast<std::uint64_t>(c.get_int("mission.seed", static_cast<long long>(m.seed)));
  return m;
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::TruePositive: return "TP";
    case Outcome::TrueNegative: return "TN";
    case Outcome::FalsePositive: return "FP";
    case Outcome::FalseNegative: return "FN";
  }
  return "?";
}

Outcome classify_outcome(int predicted, int truth, int target) {
  if (predicted == target) return truth == target ? Outcome::TruePositive : Outcome::FalsePositive;
  return truth == target ? Outcome::FalseNegative : Outcome::TrueNegative;
}

void Tally::add(Outcome o) {
  switch (o) {
    case Outcome::TruePositive: ++tp; break;
    case Outcome::TrueNegative: ++tn; break;
    case Outcome::FalsePositive: ++fp; break;
    case Outcome::FalseNegative: ++fn; break;
  }
}

Tally& Tally::operator+=(const Tally& o) {
  tp += o.tp;
  tn += o.tn;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

double Tally::accuracy() const { return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / total(); }

namespace {

class Mission {
 public:
  Mission(const WorldScene& scene, const MissionConfig& cfg, const MissionModels& models)
      : scene_(scene),
        cfg_(cfg),
        models_(models),
        rng_(derive_rng(cfg.seed, scene.seed)),
        robot_(scene.robot),
        distance_pid_(cfg.distance_pid),
        heading_pid_(cfg.heading_pid) {
    cfg_.validate();
    scene_.validate();
    if (cfg_.mode == MissionMode::Offline && !models_.offline) {
      throw InvalidArgument("offline missions need a trained identification model");
    }
    if (cfg_.mode == MissionMode::Online && !models_.embed) {
      throw InvalidArgument("online missions need the pre-trained embedding network");
    }
    n_known_ = cfg_.n_divers_known > 0 ? static_cast<std::size_t>(cfg_.n_divers_known) : scene_.divers.size();
    log_.mode = cfg_.mode;
    if (cfg_.mode == MissionMode::Offline) {
      model_ = models_.offline;
      log_.target = cfg_.target;
    }
  }

  MissionLog run() {
    const auto max_ticks = static_cast<std::int64_t>(std::llround(cfg_.global_timeout / cfg_.dt));
    auto wall_start = std::chrono::steady_clock::now();
    for (tick_ = 0; tick_ < max_ticks && state_ != MissionState::Conclusion; ++tick_) {
      const MissionState before = state_;
      step();
      const auto now = std::chrono::steady_clock::now();
      log_.wall_seconds[idx(before)] += std::chrono::duration<double>(now - wall_start).count();
      wall_start = now;
      log_.sim_seconds[idx(before)] += cfg_.dt;
    }
    log_.timed_out = state_ != MissionState::Conclusion;
    log_.final_state = state_;
    return std::move(log_);
  }

 private:
  void step() {
    const bool tracking = state_ == MissionState::Approach || state_ == MissionState::DataCollection;
    std::optional<std::size_t> lock;
    if (tracking) lock = lock_;
    const auto& exclude = state_ == MissionState::Search ? visited_ : no_exclusions_;
    drp_ = drp_update(scene_, robot_, cfg_.drp, &rng_, lock, exclude);

    double v = 0.0;
    double omega = 0.0;
    switch (state_) {
      case MissionState::Init: go(MissionState::Search, "start"); break;
      case MissionState::Search: search(omega); break;
      case MissionState::Approach: approach(v, omega); break;
      case MissionState::DataCollection: collect(v, omega); break;
      case MissionState::AngleYaw: angle_yaw(omega); break;
      case MissionState::ModelTraining: train(); break;
      case MissionState::Identification: identify(); break;
      case MissionState::Conclusion: break;
    }
    if (!pending_ && tracking && state_time() >= cfg_.state_timeout) go(MissionState::Search, "timeout");

    robot_.x += v * std::cos(robot_.yaw) * cfg_.dt;
    robot_.y += v * std::sin(robot_.yaw) * cfg_.dt;
    robot_.yaw = wrap_angle(robot_.yaw + omega * cfg_.dt);
    log_.ticks.push_back({tick_, state_, robot_, drp_, v, omega});

    if (pending_) {
      enter(pending_->first, pending_->second);
      pending_.reset();
    }
  }

  double state_time() const { return static_cast<double>(tick_ - entered_tick_ + 1) * cfg_.dt; }

  void go(MissionState next, std::string reason) {
    if (!pending_) pending_ = std::pair{next, std::move(reason)};
  }

  void enter(MissionState next, const std::string& reason) {
    if (!is_legal(state_, next)) {
      throw IllegalTransition(std::string(state_name(state_)) + " -> " + std::string(state_name(next)));
    }
    log_.transitions.push_back({tick_, state_, next, reason});
    state_ = next;
    entered_tick_ = tick_ + 1;
    distance_pid_.reset();
    heading_pid_.reset();
    if (next == MissionState::DataCollection) rows_.clear();
    if (next == MissionState::AngleYaw) yaw_remaining_ = cfg_.yaw_step;
    if (next == MissionState::Init) visited_.clear();
  }

  void search(double& omega) {
    omega = cfg_.search_rate;
    if (drp_.available) {
      lock_ = drp_.diver;
      go(MissionState::Approach, "diver detected");
    }
  }

  void steer(double& v, double& omega) {
    if (!drp_.available) return;
    v = distance_pid_.step(drp_.distance - cfg_.desired_distance, cfg_.dt);
    omega = -heading_pid_.step(drp_.bearing, cfg_.dt);
  }

  void approach(double& v, double& omega) {
    steer(v, omega);
    if (drp_.available && std::abs(drp_.distance - cfg_.desired_distance) <= cfg_.distance_band * cfg_.desired_distance) {
      go(MissionState::DataCollection, "within distance band");
    }
  }

  void collect(double& v, double& omega) {
    steer(v, omega);
    if (!in_view(scene_, robot_, lock_, cfg_.drp.detect_range)) return;
    const auto frames = generate_diver_frames(scene_, lock_, robot_, cfg_.frames_per_tick, scene_.noise, rng_,
                                              next_frame_id_);
    next_frame_id_ += cfg_.frames_per_tick;
    const auto fm = extract_batch(frames, cfg_.filter);
    for (Eigen::Index r = 0; r < fm.rows() && static_cast<int>(rows_.size()) < cfg_.frames; ++r) {
      rows_.push_back(fm.values.row(r));
    }
    if (static_cast<int>(rows_.size()) < cfg_.frames) return;

    if (cfg_.mode == MissionMode::Offline || model_) {
      go(MissionState::Identification, "F features collected");
      return;
    }
    const int label = static_cast<int>(label_to_diver_.size());
    label_to_diver_.push_back(lock_);
    for (const auto& row : rows_) {
      online_rows_.push_back(row);
      online_labels_.push_back(label);
    }
    visited_.insert(lock_);
    if (visited_.size() < n_known_) {
      go(MissionState::AngleYaw, "more divers to sample");
    } else {
      go(MissionState::ModelTraining, "all divers sampled");
    }
  }

  Eigen::MatrixXd collected() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(kNumAdr));
    for (std::size_t i = 0; i < rows_.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows_[i];
    return m;
  }

  int truth_of(std::size_t diver) const {
    if (cfg_.mode == MissionMode::Offline) return scene_.divers[diver].body.label.id;
    for (std::size_t l = 0; l < label_to_diver_.size(); ++l) {
      if (label_to_diver_[l] == diver) return static_cast<int>(l);
    }
    return -1;
  }

  void identify() {
    const int target = *log_.target;
    const auto result = model_->identify(collected());
    IdentificationRecord rec;
    rec.tick = tick_;
    rec.diver = lock_;
    rec.truth = truth_of(lock_);
    rec.predicted = result.label;
    rec.target = target;
    rec.votes = result.votes;
    rec.outcome = classify_outcome(result.label, rec.truth, target);
    log_.tally.add(rec.outcome);
    log_.identifications.push_back(rec);
    visited_.insert(lock_);
    if (result.label == target) {
      log_.found = true;
      log_.correct = rec.truth == target;
      go(MissionState::Conclusion, "target identified");
    } else if (visited_.size() >= n_known_) {
      go(MissionState::Conclusion, "all divers checked");
    } else {
      go(MissionState::AngleYaw, "not the target");
    }
  }

  void angle_yaw(double& omega) {
    omega = cfg_.yaw_rate;
    yaw_remaining_ -= omega * cfg_.dt;
    if (yaw_remaining_ > 1e-12) return;
    if (in_view(scene_, robot_, lock_, std::numeric_limits<double>::infinity())) {
      yaw_remaining_ += cfg_.yaw_step;
      return;
    }
    go(MissionState::Search, "previous diver out of view");
  }

  void train() {
    const auto start = std::chrono::steady_clock::now();
    FeatureMatrix data;
    data.values.resize(static_cast<Eigen::Index>(online_rows_.size()), static_cast<Eigen::Index>(kNumAdr));
    for (std::size_t i = 0; i < online_rows_.size(); ++i) data.values.row(static_cast<Eigen::Index>(i)) = online_rows_[i];
    data.labels = online_labels_;

    std::shared_ptr<const IdentModel> decision;
    for (const auto& name : cfg_.online_variants) {
      auto m = std::make_shared<const IdentModel>(
          build_variant(ModelVariant::parse(name), data, models_.embed, cfg_.classifiers, true));
      if (name == cfg_.decision_variant) decision = m;
    }
    model_ = decision;

    TrainingRecord rec;
    rec.tick = tick_;
    rec.rows = data.rows();
    rec.cols = data.cols();
    rec.variants = cfg_.online_variants;
    rec.label_to_diver = label_to_diver_;
    if (cfg_.target) {
      rec.assigned_target = *cfg_.target;
    } else {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(label_to_diver_.size()) - 1);
      rec.assigned_target = pick(rng_);
    }
    log_.target = rec.assigned_target;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log_.trainings.push_back(rec);
    go(MissionState::Init, "models trained");
  }

  WorldScene scene_;
  MissionConfig cfg_;
  MissionModels models_;
  std::mt19937_64 rng_;
  RobotPose robot_;
  PidController distance_pid_;
  PidController heading_pid_;
  std::size_t n_known_ = 0;
  std::shared_ptr<const IdentModel> model_;
  MissionLog log_;

  MissionState state_ = MissionState::Init;
  std::optional<std::pair<MissionState, std::string>> pending_;
  std::int64_t tick_ = 0;
  std::int64_t entered_tick_ = 0;
  DrpEstimate drp_;
  std::size_t lock_ = 0;
  std::set<std::size_t> visited_;
  const std::set<std::size_t> no_exclusions_;
  double yaw_remaining_ = 0.0;
  std::int64_t next_frame_id_ = 0;
  std::vector<Eigen::RowVectorXd> rows_;
  std::vector<Eigen::RowVectorXd> online_rows_;
  std::vector<int> online_labels_;
  std::vector<std::size_t> label_to_diver_;
};

nlohmann::ordered_json drp_json(const DrpEstimate& d) {
  nlohmann::ordered_json j;
  j["available"] = d.available;
  if (d.available) {
    j["distance"] = d.distance;
    j["bearing"] = d.bearing;
    j["source"] = std::string(drp_source_name(d.source));
    j["diver"] = d.diver;
  }
  return j;
}

nlohmann::ordered_json summary(const MissionLog& log, bool wall) {
  nlohmann::ordered_json j;
  j["type"] = "summary";
  j["mode"] = std::string(mode_name(log.mode));
  j["target"] = log.target ? nlohmann::ordered_json(*log.target) : nlohmann::ordered_json(nullptr);
  j["found"] = log.found;
  j["correct"] = log.correct;
  j["timed_out"] = log.timed_out;
  j["final_state"] = std::string(state_name(log.final_state));
  j["TP"] = log.tally.tp;
  j["TN"] = log.tally.tn;
  j["FP"] = log.tally.fp;
  j["FN"] = log.tally.fn;
  j["accuracy"] = log.tally.accuracy();
  j["ticks"] = log.ticks.size();
  nlohmann::ordered_json sim;
  nlohmann::ordered_json wall_j;
  for (std::size_t s = 0; s < kNumMissionStates; ++s) {
    sim[std::string(kStateNames[s])] = std::round(log.sim_seconds[s] * 1e6) / 1e6;
    wall_j[std::string(kStateNames[s])] = log.wall_seconds[s];
  }
  j["sim_seconds"] = sim;
  if (wall) j["wall_seconds"] = wall_j;
  return j;
}

}  // namespace

MissionLog run_mission(const WorldScene& scene, const MissionConfig& cfg, const MissionModels& models) {
  return Mission(scene, cfg, models).run();
}

std::string mission_summary_json(const MissionLog& log, bool include_wall_time) {
  return summary(log, include_wall_time).dump();
}

std::string mission_log_jsonl(const MissionLog& log, bool include_wall_time, bool include_ticks) {
  std::ostringstream out;
  if (include_ticks) {
    for (const auto& t : log.ticks) {
      nlohmann::ordered_json j;
      j["type"] = "tick";
      j["tick"] = t.tick;
      j["state"] = std::string(state_name(t.state));
      j["x"] = t.robot.x;
      j["y"] = t.robot.y;
      j["yaw"] = t.robot.yaw;
      j["v"] = t.v;
      j["omega"] = t.omega;
      j["drp"] = drp_json(t.drp);
      out << j.dump() << '\n';
    }
  }
  for (const auto& t : log.transitions) {
    nlohmann::ordered_json j;
    j["type"] = "transition";
    j["tick"] = t.tick;
    j["from"] = std::string(state_name(t.from));
    j["to"] = std::string(state_name(t.to));
    j["reason"] = t.reason;
    out << j.dump() << '\n';
  }
  for (const auto& r : log.trainings) {
    nlohmann::ordered_json j;
    j["type"] = "training";
    j["tick"] = r.tick;
    j["rows"] = r.rows;
    j["cols"] = r.cols;
    j["variants"] = r.variants;
    j["assigned_target"] = r.assigned_target;
    j["label_to_diver"] = r.label_to_diver;
    if (include_wall_time) j["wall_seconds"] = r.wall_seconds;
    out << j.dump() << '\n';
  }
  for (const auto& r : log.identifications) {
    nlohmann::ordered_json j;
    j["type"] = "identification";
    j["tick"] = r.tick;
    j["diver"] = r.diver;
    j["truth"] = r.truth;
    j["predicted"] = r.predicted;
    j["target"] = r.target;
    nlohmann::ordered_json votes;
    for (const auto& [label, count] : r.votes) votes[std::to_string(label)] = count;
    j["votes"] = votes;
    j["outcome"] = std::string(outcome_name(r.outcome));
    out << j.dump() << '\n';
  }
  out << summary(log, include_wall_time).dump() << '\n';
  return out.str();
}

}  // namespace diverid
