// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diverid/mission.hpp"
#include "diverid/pipeline.hpp"
#include "diverid/text_io.hpp"
#include "filter_cases.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;
using namespace diverid;

namespace {

// Tolerances and limits.
constexpr double kScaleRelTol = 1e-9;
constexpr double kScaleSeconds = 5.0;
constexpr double kFilterSeconds = 1.0;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kMinEmbedAccuracy = 0.95;
constexpr double kRuntimeTargetSeconds = 15 * 60;
constexpr double kKnnSeconds = 1.0;
constexpr double kFlatnessPoints = 0.03;
constexpr double kOfflineMinAccuracy = 0.90;
constexpr double kOfflineSeconds = 5 * 60;
constexpr double kOnlineMinFound = 0.90;
constexpr double kTrainingWallSeconds = 10.0;
constexpr double kContextAccuracy = 18.0 / 23.0;

struct Options {
  int seeds = 5;
  int epochs = 1000;
  int plateau_epoch = 200;
  int frames = 2000;
  int episodes = 100;
};

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

std::string fixed(double v, int d = 4) { return format_fixed(v, d); }

int failures = 0;

void report(int id, bool pass, const std::string& what) {
  std::cout << (pass ? "PASS" : "FAIL") << "  [" << id << "] " << what << std::endl;
  if (!pass) ++failures;
}

void info(const std::string& what) { std::cout << "INFO  " << what << std::endl; }

fs::path out_dir() {
  const fs::path dir(DIVERID_TEST_TMP);
  fs::create_directories(dir);
  return dir;
}

void save(const std::string& name, const std::string& text) { std::ofstream(out_dir() / name) << text; }

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ------------------------------------------------------------------ 1

std::string scale_invariance_report(std::uint64_t seed, double& worst) {
  const auto pop = sample_population(4, 4, seed);
  RenderConfig render;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> who(0, pop.size() - 1);
  std::uniform_real_distribution<double> dist(render.min_distance, render.max_distance);
  std::uniform_real_distribution<double> bearing(-0.5, 0.5);
  std::uniform_real_distribution<double> scale(0.5, 10.0);
  worst = 0.0;
  int poses = 0;
  int comparisons = 0;
  while (poses < 1000) {
    const auto clean = render_clean(pop[who(rng)], dist(rng), bearing(rng), render.camera, rng, poses);
    const auto f = apply_noise(clean, render.noise, rng);
    if (!filter_pose(f).accepted) continue;
    ++poses;
    const auto base = compute_adr(compute_ad(f)).values();
    for (double s : {0.5, 10.0, scale(rng), scale(rng), scale(rng)}) {
      const auto adr = compute_adr(compute_ad(pose_scale(f, s))).values();
      for (std::size_t k = 0; k < kNumAdr; ++k) worst = std::max(worst, std::abs(adr[k] - base[k]) / base[k]);
      ++comparisons;
    }
  }
  std::ostringstream out;
  out << "poses " << poses << ", scaled copies " << comparisons << ", max relative error " << format_double(worst)
      << "\n";
  return out.str();
}

void criterion_1(std::map<int, std::string>& reports) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  reports[1] = scale_invariance_report(1, worst);
  const double secs = since(t0);
  report(1, worst <= kScaleRelTol && secs < kScaleSeconds,
         "scale invariance: 1000 valid poses x 5 scales in [0.5, 10], max rel err " + sci(worst) + " (tol " +
             sci(kScaleRelTol) + "), " + fixed(secs, 2) + " s (limit " + fixed(kScaleSeconds, 0) + " s)");
}

// ------------------------------------------------------------------ 2

void criterion_2() {
  const auto t0 = Clock::now();
  int ok = 0;
  const auto canonical = filter_pose(testing::canonical_pose());
  ok += canonical.accepted ? 1 : 0;
  std::string missed;
  for (const auto& c : testing::single_violations()) {
    auto joints = testing::canonical_joints();
    c.edit(joints);
    const auto r = filter_pose(testing::make_frame(joints));
    if (!r.accepted && r.violated == std::vector<FilterCondition>{c.condition}) {
      ++ok;
    } else {
      missed += " " + std::string(condition_name(c.condition));
    }
  }
  const double secs = since(t0);
  report(2, ok == kNumConditions + 1 && secs < kFilterSeconds,
         "filter completeness: " + std::to_string(ok) + "/12 cases (canonical accepted, 11 single violations)" +
             (missed.empty() ? "" : ", wrong:" + missed) + ", " + sci(secs) + " s");
}

// ------------------------------------------------------------------ 3

double triplet_fd_error(std::uint64_t seed) {
  EmbedNet net({45, 10, 8, 16}, seed);
  std::mt19937_64 rng(seed + 100);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(24, 45);
  std::vector<int> labels;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = 1.0 + 0.3 * g(rng);
    labels.push_back(static_cast<int>(r % 4));
  }
  const auto triplets = mine_triplets(labels, rng);
  const double margin = 2.5;  // every hinge active
  const auto loss_at = [&](const EmbedNet& n) {
    return triplet_batch_loss(n.forward_train(x).output, triplets, margin).loss;
  };
  const Eigen::VectorXd grad = evaluate_batch(net, x, triplets, margin).grads.flat();
  const Eigen::VectorXd theta = net.flat_parameters();
  Eigen::VectorXd fd(theta.size());
  EmbedNet probe = net;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t(i) += 1e-6;
    probe.set_flat_parameters(t);
    const double up = loss_at(probe);
    t(i) -= 2e-6;
    probe.set_flat_parameters(t);
    fd(i) = (up - loss_at(probe)) / 2e-6;
  }
  return (grad - fd).norm() / std::max(grad.norm(), fd.norm());
}

double softmax_fd_error(std::uint64_t seed) {
  SoftmaxConfig cfg;
  cfg.hidden = 12;
  cfg.seed = seed;
  const auto head = SoftmaxHead::init(16, {0, 1, 2, 3}, cfg);
  std::mt19937_64 rng(seed + 200);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(20, 16);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = g(rng);
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) y.push_back(i % 4);
  Eigen::VectorXd grad;
  head.loss(x, y, &grad);
  const Eigen::VectorXd theta = head.flat_parameters();
  Eigen::VectorXd fd(theta.size());
  SoftmaxHead probe = head;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t(i) += 1e-6;
    probe.set_flat_parameters(t);
    const double up = probe.loss(x, y);
    t(i) -= 2e-6;
    probe.set_flat_parameters(t);
    fd(i) = (up - probe.loss(x, y)) / 2e-6;
  }
  return (grad - fd).norm() / std::max(grad.norm(), fd.norm());
}

void criterion_3() {
  const auto t0 = Clock::now();
  double worst_triplet = 0.0;
  double worst_softmax = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    worst_triplet = std::max(worst_triplet, triplet_fd_error(seed));
    worst_softmax = std::max(worst_softmax, softmax_fd_error(seed));
  }
  const double secs = since(t0);
  report(3, worst_triplet < kGradRelTol && worst_softmax < kGradRelTol && secs < kGradSeconds,
         "gradient check over 3 seeds: triplet pipeline rel err " + sci(worst_triplet) + ", softmax head " +
             sci(worst_softmax) + " (tol " + sci(kGradRelTol) + "), " + fixed(secs, 2) + " s");
}

// ------------------------------------------------------------------ 4, 5

struct SeedRun {
  std::uint64_t seed = 0;
  LabelledFeatures data;
  Split split;
  ZooResult zoo;
  double silhouette_embed = 0.0;
  double silhouette_raw = 0.0;
  double seconds = 0.0;
};

ZooConfig zoo_config(std::uint64_t seed, const Options& opt) {
  ZooConfig cfg;
  cfg.train.epochs = opt.epochs;
  cfg.train.plateau_epoch = opt.plateau_epoch < opt.epochs ? opt.plateau_epoch : 0;
  cfg.train.seed = seed;
  cfg.classifiers.svm.seed = seed;
  cfg.classifiers.softmax.seed = seed;
  return cfg;
}

double test_accuracy(const ZooResult& zoo, const std::string& name) {
  for (const auto& s : zoo.scores) {
    if (s.variant.name() == name) return s.test_accuracy;
  }
  throw InvalidVariant(name);
}

SeedRun run_seed(std::uint64_t seed, const Options& opt) {
  const auto t0 = Clock::now();
  SeedRun run;
  run.seed = seed;
  run.data = synthesize_features(4, 4, opt.frames, RenderConfig{}, PopulationConfig{}, FilterConfig{}, seed);
  run.split = stratified_split(run.data.features, 0.8, seed);
  run.zoo = train_zoo(run.split, run.data.population, all_variants(), zoo_config(seed, opt), nullptr,
                      [&](int epoch, double loss) {
                        if ((epoch + 1) % 50 == 0) {
                          std::cerr << "  seed " << seed << " epoch " << epoch + 1 << " loss " << sci(loss) << "\n";
                        }
                      });
  run.silhouette_embed = cosine_silhouette(embed_rows(*run.zoo.embed, run.split.test.values), run.split.test.labels);
  run.silhouette_raw = cosine_silhouette(run.split.test.values, run.split.test.labels);
  run.seconds = since(t0);
  return run;
}

std::string seed_report(const SeedRun& r) {
  std::ostringstream out;
  out << "seed " << r.seed << ": " << r.data.features.rows() << " of " << r.data.n_frames
      << " frames accepted, train " << r.split.train.rows() << ", test " << r.split.test.rows() << "\n";
  out << "epochs run " << r.zoo.history.epoch_loss.size() << ", final loss "
      << format_double(r.zoo.history.epoch_loss.back()) << "\n";
  if (!r.zoo.history.plateau_note.empty()) out << r.zoo.history.plateau_note << "\n";
  out << accuracy_table(r.zoo).aligned();
  out << "cosine silhouette: embedding " << fixed(r.silhouette_embed) << ", raw " << fixed(r.silhouette_raw) << "\n";
  return out.str();
}

std::vector<SeedRun> criteria_4_5(const Options& opt, std::map<int, std::string>& reports) {
  std::vector<SeedRun> runs;
  const auto t0 = Clock::now();
  std::map<std::string, double> sum;
  const std::vector<std::string> tracked = {"All_NN_KNN", "All_NN_SVM", "All_KNN", "All_SVM"};
  std::string text;
  for (int s = 1; s <= opt.seeds; ++s) {
    runs.push_back(run_seed(static_cast<std::uint64_t>(s), opt));
    const auto& r = runs.back();
    text += seed_report(r) + "\n";
    std::ostringstream line;
    line << "seed " << s << ":";
    for (const auto& n : tracked) {
      sum[n] += test_accuracy(r.zoo, n);
      line << " " << n << " " << fixed(test_accuracy(r.zoo, n));
    }
    line << ", epochs " << r.zoo.history.epoch_loss.size() << (r.zoo.history.stopped_on_plateau ? " (plateau)" : "")
         << ", " << fixed(r.seconds, 0) << " s";
    info(line.str());
    if (!r.zoo.history.plateau_note.empty()) info("seed " + std::to_string(s) + " " + r.zoo.history.plateau_note);
  }
  const double secs = since(t0);
  std::map<std::string, double> mean;
  for (const auto& n : tracked) mean[n] = sum[n] / opt.seeds;
  save("criterion_4_report.txt", text);
  reports[4] = text;

  const bool knn_ok = mean["All_NN_KNN"] >= kMinEmbedAccuracy && mean["All_NN_KNN"] >= mean["All_KNN"];
  const bool svm_ok = mean["All_NN_SVM"] >= kMinEmbedAccuracy && mean["All_NN_SVM"] >= mean["All_SVM"];
  report(4, knn_ok && svm_ok,
         "metric learning over " + std::to_string(opt.seeds) + " seeds: All_NN_KNN " + fixed(mean["All_NN_KNN"]) +
             " vs All_KNN " + fixed(mean["All_KNN"]) + ", All_NN_SVM " + fixed(mean["All_NN_SVM"]) + " vs All_SVM " +
             fixed(mean["All_SVM"]) + " (need >= " + fixed(kMinEmbedAccuracy, 2) + " and >= raw)");
  info("criterion 4 runtime " + fixed(secs / 60.0, 1) + " min against a " + fixed(kRuntimeTargetSeconds / 60.0, 0) +
       " min desktop target" +
       (secs <= kRuntimeTargetSeconds ? " (met)" : " (not met on this host; see the decisions ledger)"));

  int better = 0;
  std::string per_seed;
  for (const auto& r : runs) {
    better += r.silhouette_embed >= r.silhouette_raw ? 1 : 0;
    per_seed += " " + fixed(r.silhouette_embed, 3) + "/" + fixed(r.silhouette_raw, 3);
  }
  report(5, better == static_cast<int>(runs.size()),
         "silhouette (16-d embedding / raw 45-d) on " + std::to_string(better) + "/" + std::to_string(runs.size()) +
             " seeds improved:" + per_seed);
  return runs;
}

// ------------------------------------------------------------------ 6

int knn_oracle(const Eigen::MatrixXd& pts, const std::vector<int>& y, const Eigen::RowVectorXd& q, int k) {
  std::vector<std::pair<double, Eigen::Index>> d;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) d.push_back({(pts.row(i) - q).norm(), i});
  std::sort(d.begin(), d.end());
  std::map<int, int> votes;
  for (int i = 0; i < k; ++i) ++votes[y[static_cast<std::size_t>(d[static_cast<std::size_t>(i)].second)]];
  int best = votes.begin()->first;
  for (const auto& [label, c] : votes) {
    if (c > votes[best]) best = label;
  }
  return best;
}

void criterion_6() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> coord(0, 5);
  std::uniform_int_distribution<int> lab(0, 3);
  Eigen::MatrixXd pts(200, 4);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index c = 0; c < pts.cols(); ++c) pts(i, c) = coord(rng);
    y.push_back(lab(rng));
  }
  int agree = 0;
  int total = 0;
  for (int k : {1, 4, 5}) {
    const auto m = KnnModel::fit(pts, y, k);
    for (int qi = 0; qi < 50; ++qi) {
      Eigen::RowVectorXd q(4);
      for (Eigen::Index c = 0; c < 4; ++c) q(c) = coord(rng);
      agree += m.predict(q) == knn_oracle(pts, y, q, k) ? 1 : 0;
      ++total;
    }
  }
  const double secs = since(t0);
  report(6, agree == total && secs < kKnnSeconds,
         "knn vs exhaustive oracle: " + std::to_string(agree) + "/" + std::to_string(total) +
             " queries agree (50 per k in {1, 4, 5}, 200 integer-grid points with ties), " + sci(secs) + " s");
}

// ------------------------------------------------------------------ 7

std::string flatness_report(const SeedRun& run, double& worst) {
  worst = 0.0;
  Table t;
  t.headers = {"Model", "10 frames", "100 frames", "Diff"};
  for (const auto& m : run.zoo.models) {
    if (!m->variant().uses_embedding) continue;
    const auto rows = rows_for_model(run.split.test, *m);
    const auto curve = accuracy_vs_frames(*m, rows, {10, 100}, 50, run.seed);
    if (curve.points.size() != 2) throw InvalidArgument("test split too small for 100 frames");
    const double a10 = curve.points[0].accuracy;
    const double a100 = curve.points[1].accuracy;
    worst = std::max(worst, std::abs(a100 - a10));
    t.add_row({m->variant().name(), fixed(a10), fixed(a100), fixed(a100 - a10)});
  }
  return t.aligned();
}

void criterion_7(const SeedRun& run, std::map<int, std::string>& reports) {
  double worst = 0.0;
  reports[7] = flatness_report(run, worst);
  save("criterion_7_report.txt", reports[7]);
  std::cout << reports[7];
  report(7, worst <= kFlatnessPoints,
         "accuracy vs frames, embedding variants, seed " + std::to_string(run.seed) +
             ": max |acc(100) - acc(10)| = " + fixed(100 * worst, 2) + " points (limit " +
             fixed(100 * kFlatnessPoints, 0) + ")");
}

// ------------------------------------------------------------------ 8, 9, 10

struct EpisodeSet {
  std::vector<MissionLog> logs;
  std::string jsonl;
  Tally tally;
  int found_correct = 0;
  int illegal = 0;
  int transitions = 0;
  double max_training_wall = 0.0;
  bool training_shape_ok = true;
  double seconds = 0.0;
};

EpisodeSet run_episodes(const std::vector<AnthropometrySpec>& pop, MissionMode mode, const NoiseModel& noise,
                        const MissionModels& models, int episodes) {
  const auto t0 = Clock::now();
  EpisodeSet set;
  for (int e = 0; e < episodes; ++e) {
    const auto seed = static_cast<std::uint64_t>(10000 + e);
    const auto scene = make_random_scene(pop, {}, noise, seed);
    MissionConfig cfg;
    cfg.mode = mode;
    cfg.frames = 50;
    cfg.seed = seed;
    if (mode == MissionMode::Offline) {
      auto rng = derive_rng(seed, 7);
      std::uniform_int_distribution<std::size_t> pick(0, scene.divers.size() - 1);
      cfg.target = scene.divers[pick(rng)].body.label.id;
    }
    auto log = run_mission(scene, cfg, models);
    set.tally += log.tally;
    set.found_correct += log.correct ? 1 : 0;
    for (const auto& t : log.transitions) {
      ++set.transitions;
      set.illegal += is_legal(t.from, t.to) ? 0 : 1;
    }
    for (const auto& tr : log.trainings) {
      set.max_training_wall = std::max(set.max_training_wall, tr.wall_seconds);
      set.training_shape_ok = set.training_shape_ok && tr.rows == 150 && tr.cols == 45;
    }
    set.jsonl += mission_log_jsonl(log, false, false);
    set.logs.push_back(std::move(log));
  }
  set.seconds = since(t0);
  return set;
}

std::string tally_text(const Tally& t) {
  return "TP " + std::to_string(t.tp) + " TN " + std::to_string(t.tn) + " FP " + std::to_string(t.fp) + " FN " +
         std::to_string(t.fn);
}

struct MissionResults {
  EpisodeSet offline_noisy;
  EpisodeSet offline_clean;
  EpisodeSet online;
};

MissionResults missions(const SeedRun& run, int episodes) {
  std::shared_ptr<const IdentModel> decision;
  for (const auto& m : run.zoo.models) {
    if (m->variant().name() == "All_NN_SVM") decision = m;
  }
  MissionResults r;
  r.offline_noisy = run_episodes(run.data.population, MissionMode::Offline, NoiseModel{}, {decision, nullptr}, episodes);
  r.offline_clean =
      run_episodes(run.data.population, MissionMode::Offline, NoiseModel{0.0, 0.0}, {decision, nullptr}, episodes);
  r.online = run_episodes(run.data.population, MissionMode::Online, NoiseModel{}, {nullptr, run.zoo.embed}, episodes);
  return r;
}

void criteria_8_9_10(const MissionResults& r, int episodes, std::map<int, std::string>& reports) {
  const double noisy = r.offline_noisy.tally.accuracy();
  const double clean = r.offline_clean.tally.accuracy();
  const double offline_secs = r.offline_noisy.seconds + r.offline_clean.seconds;
  std::vector<Tally> per_episode;
  for (const auto& l : r.offline_noisy.logs) per_episode.push_back(l.tally);
  reports[8] = trial_table(per_episode).tsv() + r.offline_noisy.jsonl + r.offline_clean.jsonl;
  save("criterion_8_table.txt", trial_table(per_episode).aligned());
  report(8, noisy >= kOfflineMinAccuracy && clean == 1.0 && offline_secs < kOfflineSeconds,
         "offline missions, " + std::to_string(episodes) + " 3-diver episodes, All_NN_SVM: default noise " +
             tally_text(r.offline_noisy.tally) + " -> " + format_percent(noisy) + " (need >= " +
             format_percent(kOfflineMinAccuracy, 0) + "), zero noise " + format_percent(clean) + " (need 100%), " +
             fixed(offline_secs, 1) + " s");
  info("field-trial figure for context only: " + format_percent(kContextAccuracy) + " (TP 7 TN 11 FP 1 FN 4)");

  const double found = static_cast<double>(r.online.found_correct) / episodes;
  reports[9] = r.online.jsonl;
  report(9, found >= kOnlineMinFound && r.online.max_training_wall < kTrainingWallSeconds && r.online.training_shape_ok,
         "online missions, " + std::to_string(episodes) + " episodes, F = 50: target found in " +
             std::to_string(r.online.found_correct) + "/" + std::to_string(episodes) + " (need >= " +
             format_percent(kOnlineMinFound, 0) + "), training matrix 150 x 45 " +
             (r.online.training_shape_ok ? "in every episode" : "NOT always") + ", max MODEL_TRAINING wall " +
             fixed(r.online.max_training_wall, 3) + " s (limit " + fixed(kTrainingWallSeconds, 0) + " s)");

  const int illegal = r.offline_noisy.illegal + r.offline_clean.illegal + r.online.illegal;
  const int total = r.offline_noisy.transitions + r.offline_clean.transitions + r.online.transitions;
  report(10, illegal == 0 && total > 0,
         "state-machine legality: " + std::to_string(illegal) + " illegal of " + std::to_string(total) +
             " logged transitions across " + std::to_string(3 * episodes) + " episodes");
}

// ------------------------------------------------------------------ 11

std::string zoo_determinism_report(const SeedRun& run) {
  auto cfg = zoo_config(run.seed, Options{});
  cfg.train.epochs = 3;
  cfg.train.plateau_epoch = 0;
  const auto zoo = train_zoo(run.split, run.data.population, all_variants(), cfg);
  return hash_hex(zoo.embed->content_hash()) + "\n" + accuracy_table(zoo).tsv();
}

std::string dataset_bytes(const fs::path& dir, std::uint64_t seed) {
  DatasetManifest m;
  m.seed = seed;
  m.frames_per_identity = 200;
  m.population = sample_population(4, 4, seed);
  for (const auto& p : m.population) m.files.push_back("identity_" + std::to_string(p.label.id) + ".poses");
  fs::remove_all(dir);
  write_dataset(dir, m, render_dataset(m.population, 200, m.render, seed));
  std::string all = read_all(dir / "manifest.json");
  for (const auto& f : m.files) all += read_all(dir / f);
  return all;
}

void criterion_11(const std::vector<SeedRun>& runs, const MissionResults& first, int episodes,
                  const std::map<int, std::string>& reports) {
  std::vector<std::string> same;
  std::vector<std::string> differ;
  const auto check = [&](const std::string& name, const std::string& a, const std::string& b) {
    (a == b ? same : differ).push_back(name);
  };

  double worst = 0.0;
  check("scale invariance report", reports.at(1), scale_invariance_report(1, worst));
  const auto& run = runs.front();
  check("seed-1 embedding training and model table (3 epochs)", zoo_determinism_report(run),
        zoo_determinism_report(run));
  {
    const auto again = synthesize_features(4, 4, 300, RenderConfig{}, PopulationConfig{}, FilterConfig{}, run.seed);
    const auto once = synthesize_features(4, 4, 300, RenderConfig{}, PopulationConfig{}, FilterConfig{}, run.seed);
    std::stringstream a, b;
    write_features(a, once.features);
    write_features(b, again.features);
    check("feature extraction", a.str(), b.str());
  }
  check("generated dataset files", dataset_bytes(out_dir() / "gen_a", 3), dataset_bytes(out_dir() / "gen_b", 3));
  double w = 0.0;
  check("accuracy-vs-frames report", reports.at(7), flatness_report(run, w));
  const auto second = missions(run, episodes);
  std::vector<Tally> per_episode;
  for (const auto& l : second.offline_noisy.logs) per_episode.push_back(l.tally);
  check("offline mission logs and table",
        reports.at(8), trial_table(per_episode).tsv() + second.offline_noisy.jsonl + second.offline_clean.jsonl);
  check("online mission logs", reports.at(9), second.online.jsonl);
  (void)first;

  std::string detail = "determinism: " + std::to_string(same.size()) + "/" +
                       std::to_string(same.size() + differ.size()) + " reruns byte-identical (";
  for (std::size_t i = 0; i < same.size(); ++i) detail += (i ? ", " : "") + same[i];
  detail += ")";
  for (const auto& d : differ) detail += "; DIFFERS: " + d;
  report(11, differ.empty(), detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Options opt;
  app.add_option("--seeds", opt.seeds, "seeds for the metric-learning criterion")->capture_default_str();
  app.add_option("--epochs", opt.epochs, "embedding epochs")->capture_default_str();
  app.add_option("--plateau-epoch", opt.plateau_epoch, "epoch of the plateau check")->capture_default_str();
  app.add_option("--frames", opt.frames, "frames per identity")->capture_default_str();
  app.add_option("--episodes", opt.episodes, "mission episodes")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  const bool reduced = opt.seeds != 5 || opt.epochs != 1000 || opt.frames != 2000 || opt.episodes != 100;
  if (reduced) info("reduced run: results are not the acceptance configuration");

  const auto t0 = Clock::now();
  try {
    std::map<int, std::string> reports;
    criterion_1(reports);
    criterion_2();
    criterion_3();
    const auto runs = criteria_4_5(opt, reports);
    criterion_6();
    criterion_7(runs.front(), reports);
    const auto m = missions(runs.front(), opt.episodes);
    criteria_8_9_10(m, opt.episodes, reports);
    criterion_11(runs, m, opt.episodes, reports);
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }
  info("total " + fixed(since(t0) / 60.0, 1) + " min; " + std::to_string(failures) + " criteria failed");
  return failures;
}
