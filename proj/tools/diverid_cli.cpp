// diverid: generate synthetic data, train and evaluate identification
// models, extract features and run simulated identification missions.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diverid/pipeline.hpp"
#include "diverid/text_io.hpp"

namespace fs = std::filesystem;
using namespace diverid;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  Config config;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

fs::path out_dir(const Globals& g, const std::string& fallback) {
  fs::path dir = g.out.empty() ? fs::path(fallback) : fs::path(g.out);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  int divers = 4;
  int swimmers = 4;
  int frames = 2000;
  std::optional<double> sigma;
  std::optional<double> p_corrupt;
};

int cmd_gen(const Globals& g, const GenArgs& a) {
  if (a.divers < 0 || a.swimmers < 0 || a.divers + a.swimmers < 1) throw InvalidArgument("need at least one identity");
  DatasetManifest m;
  m.seed = g.seed;
  m.frames_per_identity = a.frames;
  m.render = RenderConfig::from_config(g.config);
  if (a.sigma) m.render.noise.pixel_sigma = *a.sigma;
  if (a.p_corrupt) m.render.noise.p_corrupt = *a.p_corrupt;
  m.population_cfg.delta_min = g.config.get_double("datagen.delta_min", m.population_cfg.delta_min);
  m.population = sample_population(a.divers, a.swimmers, g.seed, m.population_cfg);
  for (const auto& p : m.population) m.files.push_back("identity_" + std::to_string(p.label.id) + ".poses");
  const auto frames = render_dataset(m.population, a.frames, m.render, g.seed);
  const auto dir = out_dir(g, "dataset");
  write_dataset(dir, m, frames);
  std::cout << "wrote " << m.population.size() << " identities x " << a.frames << " frames to " << dir.string()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------- extract

int cmd_extract(const Globals& g, const std::string& input) {
  const auto frames = read_pose_file(input);
  const auto fm = extract_batch(frames, FilterConfig::from_config(g.config));
  if (g.out.empty()) {
    write_features(std::cout, fm);
  } else {
    write_features_file(g.out, fm);
  }
  std::cerr << fm.rows() << " of " << frames.size() << " frames accepted\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string variants;
  std::optional<int> epochs;
  std::optional<int> plateau_epoch;
  std::string embed;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  std::vector<ModelVariant> variants;
  if (a.variants.empty()) {
    variants = all_variants();
  } else {
    for (const auto& name : split_list(a.variants)) variants.push_back(ModelVariant::parse(name));
  }
  if (!fs::is_directory(a.data)) throw FormatError("dataset directory " + a.data + " does not exist");
  const auto filter = FilterConfig::from_config(g.config);
  const auto data = load_dataset_features(a.data, filter);

  ZooConfig cfg;
  cfg.train = TrainConfig::from_config(g.config);
  cfg.classifiers = ClassifierConfig::from_config(g.config);
  cfg.split_fraction = g.config.get_double("split.fraction", cfg.split_fraction);
  cfg.train.seed = g.seed;
  cfg.classifiers.svm.seed = g.seed;
  cfg.classifiers.softmax.seed = g.seed;
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.plateau_epoch) cfg.train.plateau_epoch = *a.plateau_epoch;
  cfg.train.validate();

  std::shared_ptr<const EmbedNet> pretrained;
  if (!a.embed.empty()) pretrained = std::make_shared<const EmbedNet>(load_embed_net(a.embed));

  const auto split = stratified_split(data.features, cfg.split_fraction, g.seed);
  const auto dir = out_dir(g, "models");
  std::ofstream loss_log(dir / "train_log.txt");
  loss_log << "rows " << data.features.rows() << " of " << data.n_frames << " frames accepted; train "
           << split.train.rows() << ", test " << split.test.rows() << "\n";
  const auto zoo = train_zoo(split, data.population, variants, cfg, pretrained, [&](int epoch, double loss) {
    loss_log << "epoch " << epoch + 1 << " loss " << format_double(loss) << "\n";
    if ((epoch + 1) % 10 == 0) std::cerr << "epoch " << epoch + 1 << " loss " << loss << "\n";
  });
  if (!zoo.history.plateau_note.empty()) loss_log << zoo.history.plateau_note << "\n";
  loss_log << "skipped batches " << zoo.history.skipped_batches << "\n";

  if (zoo.embed) save_embed_net(dir / "embed.net", *zoo.embed);
  for (const auto& m : zoo.models) save_bundle(dir / (m->variant().name() + ".bundle"), *m);
  write_features_file(dir / "train.features", split.train);
  write_features_file(dir / "test.features", split.test);
  fs::copy_file(fs::path(a.data) / "manifest.json", dir / "manifest.json", fs::copy_options::overwrite_existing);

  const auto table = accuracy_table(zoo);
  write_text(dir / "train_report.txt", table.aligned());
  write_text(dir / "train_report.tsv", table.tsv());
  std::cout << table.aligned();
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string models;
  std::string bundles;
  std::string test;
  std::string frames = "5,10,25,50,100";
  int groups = 50;
};

std::vector<std::shared_ptr<const EmbedNet>> candidate_nets(const fs::path& dir) {
  std::vector<std::shared_ptr<const EmbedNet>> nets;
  if (fs::exists(dir / "embed.net")) nets.push_back(std::make_shared<const EmbedNet>(load_embed_net(dir / "embed.net")));
  return nets;
}

int cmd_eval(const Globals& g, const EvalArgs& a) {
  const fs::path dir = a.models;
  if (!fs::is_directory(dir)) throw FormatError("model directory " + a.models + " does not exist");
  std::vector<fs::path> bundle_paths;
  if (a.bundles.empty()) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".bundle") bundle_paths.push_back(e.path());
    }
    std::sort(bundle_paths.begin(), bundle_paths.end());
  } else {
    for (const auto& name : split_list(a.bundles)) {
      ModelVariant::parse(name);
      bundle_paths.push_back(dir / (name + ".bundle"));
    }
  }
  if (bundle_paths.empty()) throw FormatError("no model bundles in " + a.models);
  const auto nets = candidate_nets(dir);
  const auto test = read_features_file(a.test.empty() ? dir / "test.features" : fs::path(a.test));
  if (!test.has_labels()) throw FormatError("test features must be labelled");

  std::vector<int> counts;
  for (const auto& f : split_list(a.frames)) counts.push_back(static_cast<int>(parse_int(f)));

  Table table;
  table.headers = {"Frames"};
  std::vector<FramesCurve> curves;
  for (const auto& p : bundle_paths) {
    const auto model = load_bundle(p, nets);
    table.headers.push_back(model.variant().name());
    curves.push_back(accuracy_vs_frames(model, rows_for_model(test, model), counts, a.groups, g.seed));
    for (int n : curves.back().skipped) {
      std::cerr << "warning: " << model.variant().name() << ": " << n << " frames exceed the test rows, skipped\n";
    }
  }
  table.headers.push_back("Average");
  std::vector<Series> series;
  for (std::size_t m = 0; m < curves.size(); ++m) series.push_back({table.headers[m + 1], {}, {}});
  Series avg{"Average", {}, {}};
  for (int n : counts) {
    std::vector<std::string> row = {std::to_string(n)};
    double sum = 0.0;
    int present = 0;
    for (std::size_t m = 0; m < curves.size(); ++m) {
      auto it = std::find_if(curves[m].points.begin(), curves[m].points.end(),
                             [&](const FramesPoint& p) { return p.frames == n; });
      if (it == curves[m].points.end()) {
        row.push_back("-");
        continue;
      }
      row.push_back(format_fixed(it->accuracy, 4));
      series[m].x.push_back(n);
      series[m].y.push_back(it->accuracy);
      sum += it->accuracy;
      ++present;
    }
    if (present == 0) continue;
    row.push_back(format_fixed(sum / present, 4));
    avg.x.push_back(n);
    avg.y.push_back(sum / present);
    table.add_row(std::move(row));
  }
  series.push_back(avg);
  const auto out = out_dir(g, a.models);
  write_text(out / "eval_report.txt", table.aligned());
  write_text(out / "eval_report.tsv", table.tsv());
  double lo = 1.0;
  for (const auto& s : series) {
    for (double y : s.y) lo = std::min(lo, y);
  }
  const auto chart = text_chart(series, 60, 16, std::max(0.0, std::floor(lo * 20.0) / 20.0 - 0.05), 1.0);
  write_text(out / "eval_chart.txt", chart);
  std::cout << table.aligned() << "\n" << chart;
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimArgs {
  std::string mode = "offline";
  std::string models;
  std::string model;
  std::string scene;
  int frames = 50;
  int episodes = 16;
  std::optional<int> target;
  std::optional<double> sigma;
  std::optional<double> p_corrupt;
  bool ticks = false;
};

int cmd_simulate(const Globals& g, const SimArgs& a) {
  auto cfg = MissionConfig::from_config(g.config);
  if (a.mode == "offline") {
    cfg.mode = MissionMode::Offline;
  } else if (a.mode == "online") {
    cfg.mode = MissionMode::Online;
  } else {
    throw InvalidVariant("--mode must be offline or online");
  }
  if (a.frames != 50 && a.frames != 100) std::cerr << "note: F = " << a.frames << " (the usual values are 50 and 100)\n";
  cfg.frames = a.frames;
  if (a.episodes < 1) throw InvalidArgument("--episodes must be >= 1");

  const fs::path dir = a.models;
  std::vector<AnthropometrySpec> population;
  if (!a.models.empty() && fs::exists(dir / "manifest.json")) population = read_manifest(dir).population;
  const auto nets = a.models.empty() ? std::vector<std::shared_ptr<const EmbedNet>>{} : candidate_nets(dir);

  MissionModels models;
  if (cfg.mode == MissionMode::Offline) {
    const fs::path bundle = !a.model.empty() ? fs::path(a.model) : dir / (cfg.decision_variant + ".bundle");
    models.offline = std::make_shared<const IdentModel>(load_bundle(bundle, nets));
  } else {
    if (nets.empty()) throw FormatError("online missions need <models>/embed.net");
    models.embed = nets.front();
  }

  std::optional<WorldScene> fixed_scene;
  if (!a.scene.empty()) fixed_scene = read_scene_file(a.scene, population);
  if (!fixed_scene && population.empty()) throw FormatError("need --scene or a model directory with manifest.json");

  NoiseModel noise = RenderConfig::from_config(g.config).noise;
  if (a.sigma) noise.pixel_sigma = *a.sigma;
  if (a.p_corrupt) noise.p_corrupt = *a.p_corrupt;

  const auto out = out_dir(g, "missions");
  std::vector<Tally> tallies;
  int found = 0;
  int correct = 0;
  for (int e = 0; e < a.episodes; ++e) {
    const auto episode_seed = g.seed * 1000003ULL + static_cast<std::uint64_t>(e);
    WorldScene scene;
    if (fixed_scene) {
      scene = *fixed_scene;
      if (a.sigma) scene.noise.pixel_sigma = *a.sigma;
      if (a.p_corrupt) scene.noise.p_corrupt = *a.p_corrupt;
      scene.seed = fixed_scene->seed + static_cast<std::uint64_t>(e);
    } else {
      scene = make_random_scene(population, {}, noise, episode_seed);
    }
    MissionConfig ep = cfg;
    ep.seed = episode_seed;
    if (a.target) {
      ep.target = *a.target;
    } else if (cfg.mode == MissionMode::Offline) {
      auto rng = derive_rng(episode_seed, 7);
      std::uniform_int_distribution<std::size_t> pick(0, scene.divers.size() - 1);
      ep.target = scene.divers[pick(rng)].body.label.id;
    }
    const auto log = run_mission(scene, ep, models);
    write_text(out / ("episode_" + std::to_string(e + 1) + ".jsonl"), mission_log_jsonl(log, false, a.ticks));
    tallies.push_back(log.tally);
    found += log.found ? 1 : 0;
    correct += log.correct ? 1 : 0;
  }
  const auto table = trial_table(tallies);
  std::ostringstream report;
  report << table.aligned() << "\n"
         << "mode " << a.mode << ", F = " << cfg.frames << ", episodes " << a.episodes << "\n"
         << "target found in " << correct << " of " << a.episodes << " episodes (" << found
         << " concluded on a positive prediction)\n";
  write_text(out / "simulate_report.txt", report.str());
  write_text(out / "simulate_report.tsv", table.tsv());
  std::cout << report.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diver identification from pose keypoints: data generation, training, evaluation, simulation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key = value configuration file");
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--out", g.out, "output directory (or file for extract)");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic pose dataset");
  gen_cmd->add_option("--divers", gen.divers, "number of divers")->capture_default_str();
  gen_cmd->add_option("--swimmers", gen.swimmers, "number of swimmers")->capture_default_str();
  gen_cmd->add_option("--frames", gen.frames, "frames per identity")->capture_default_str();
  gen_cmd->add_option("--sigma", gen.sigma, "pixel noise standard deviation");
  gen_cmd->add_option("--p-corrupt", gen.p_corrupt, "per-frame corruption probability");

  std::string extract_in;
  auto* extract_cmd = app.add_subcommand("extract", "filter a pose stream and write its ADR feature matrix");
  extract_cmd->add_option("--in", extract_in, "pose stream file")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train the embedding and the requested model variants");
  train_cmd->add_option("--data", train.data, "dataset directory written by gen")->required();
  train_cmd->add_option("--variants", train.variants, "comma-separated variant names (default: all ten)");
  train_cmd->add_option("--epochs", train.epochs, "embedding training epochs");
  train_cmd->add_option("--plateau-epoch", train.plateau_epoch, "epoch at which to stop if the loss has plateaued");
  train_cmd->add_option("--embed", train.embed, "reuse a trained embedding network");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "accuracy versus number of inference frames");
  eval_cmd->add_option("--models", eval.models, "directory written by train")->required();
  eval_cmd->add_option("--bundles", eval.bundles, "comma-separated variant names (default: every bundle)");
  eval_cmd->add_option("--test", eval.test, "labelled feature file (default: <models>/test.features)");
  eval_cmd->add_option("--frames", eval.frames, "comma-separated frame counts")->capture_default_str();
  eval_cmd->add_option("--groups", eval.groups, "random groups per identity and frame count")->capture_default_str();

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "run seeded identification missions");
  sim_cmd->add_option("--mode", sim.mode, "offline or online")->capture_default_str();
  sim_cmd->add_option("--models", sim.models, "directory written by train");
  sim_cmd->add_option("--model", sim.model, "identification bundle (offline)");
  sim_cmd->add_option("--scene", sim.scene, "scene file (default: random 3-diver scenes)");
  sim_cmd->add_option("--frames", sim.frames, "frames per identification (F)")->capture_default_str();
  sim_cmd->add_option("--episodes", sim.episodes, "number of episodes")->capture_default_str();
  sim_cmd->add_option("--target", sim.target, "target label");
  sim_cmd->add_option("--sigma", sim.sigma, "pixel noise standard deviation");
  sim_cmd->add_option("--p-corrupt", sim.p_corrupt, "per-frame corruption probability");
  sim_cmd->add_flag("--ticks", sim.ticks, "include per-tick records in the episode logs");

  for (auto* sub : {gen_cmd, extract_cmd, train_cmd, eval_cmd, sim_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (!g.config_path.empty()) g.config = Config::load(g.config_path);
    if (*gen_cmd) return cmd_gen(g, gen);
    if (*extract_cmd) return cmd_extract(g, extract_in);
    if (*train_cmd) return cmd_train(g, train);
    if (*eval_cmd) return cmd_eval(g, eval);
    if (*sim_cmd) return cmd_simulate(g, sim);
  } catch (const InvalidVariant& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidArgument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
