#include "diverid/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "diverid/text_io.hpp"

namespace diverid {

std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

namespace {

// Noise-free proportions kept well inside the filter bands so that pixel
// noise, not the identity itself, decides whether a frame is rejected.
bool comfortable_proportions(const std::array<double, kNumAd>& s) {
  const auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  const double sw = s[ad::kShoulderWidth];
  for (auto [upper, lower] : {std::pair{ad::kLeftUpperArm, ad::kLeftLowerArm},
                              std::pair{ad::kRightUpperArm, ad::kRightLowerArm}}) {
    if (!in(s[upper] / s[lower], 1.1, 1.45)) return false;
  }
  for (auto [torso, thigh] : {std::pair{ad::kLeftTorso, ad::kLeftThigh}, std::pair{ad::kRightTorso, ad::kRightThigh}}) {
    if (!in(s[torso] / sw, 1.1, 1.45)) return false;
    if (!(s[torso] < 1.8 * s[thigh])) return false;
    const double arm = std::max({s[ad::kLeftUpperArm], s[ad::kRightUpperArm], s[ad::kLeftLowerArm],
                                 s[ad::kRightLowerArm]});
    if (!(s[torso] > 1.1 * arm)) return false;
  }
  const auto ratio = [](double a, double b) { return std::max(a, b) / std::min(a, b); };
  return ratio(s[ad::kLeftThigh], s[ad::kRightThigh]) <= 1.1 &&
         ratio(s[ad::kLeftLowerArm], s[ad::kRightLowerArm]) <= 1.1;
}

double signature_distance(const AdrVector& a, const AdrVector& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < kNumAdr; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

}  // namespace

AdrVector adr_signature(const AnthropometrySpec& spec) { return compute_adr(spec.segments); }

std::vector<AnthropometrySpec> sample_population(int n_divers, int n_swimmers, std::uint64_t seed,
                                                 const PopulationConfig& cfg) {
  if (n_divers < 0 || n_swimmers < 0 || n_divers + n_swimmers < 1) {
    throw InvalidArgument("population needs at least one identity");
  }
  std::mt19937_64 rng(seed);
  std::array<std::normal_distribution<double>, kSegmentStats.size()> base;
  for (std::size_t i = 0; i < base.size(); ++i) base[i] = std::normal_distribution<double>(kSegmentStats[i].mean, kSegmentStats[i].sigma);
  std::normal_distribution<double> asym(0.0, kSideAsymmetrySigma);

  std::vector<AnthropometrySpec> pop;
  std::vector<AdrVector> sigs;
  const int total = n_divers + n_swimmers;
  for (int id = 0; id < total; ++id) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
      std::array<double, 6> b{};
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = base[i](rng);
      AnthropometrySpec spec;
      spec.label = {id, id < n_divers ? IdentityKind::Diver : IdentityKind::Swimmer};
      auto& s = spec.segments;
      s[ad::kShoulderWidth] = b[0];
      s[ad::kHipWidth] = b[1];
      s[ad::kLeftUpperArm] = b[2] + asym(rng);
      s[ad::kRightUpperArm] = b[2] + asym(rng);
      s[ad::kLeftLowerArm] = b[3] + asym(rng);
      s[ad::kRightLowerArm] = b[3] + asym(rng);
      s[ad::kLeftTorso] = b[4] + asym(rng);
      s[ad::kRightTorso] = b[4] + asym(rng);
      s[ad::kLeftThigh] = b[5] + asym(rng);
      s[ad::kRightThigh] = b[5] + asym(rng);
      if (std::any_of(s.begin(), s.end(), [](double v) { return !(v > 0.05); })) continue;
      if (!comfortable_proportions(s)) continue;
      try {
        spec.validate();
        (void)body_points(spec, LimbAngles{});
      } catch (const InvalidArgument&) {
        continue;
      }
      const auto sig = adr_signature(spec);
      const bool far_enough = std::all_of(sigs.begin(), sigs.end(),
                                          [&](const AdrVector& o) { return signature_distance(sig, o) >= cfg.delta_min; });
      if (!far_enough) continue;
      pop.push_back(spec);
      sigs.push_back(sig);
      placed = true;
    }
    if (!placed) {
      throw GenerationError("could not place identity " + std::to_string(id) + " at delta_min " +
                            format_double(cfg.delta_min) + " within " + std::to_string(cfg.max_attempts) +
                            " attempts");
    }
  }
  return pop;
}

void RenderConfig::validate() const {
  if (!(min_distance > 0 && max_distance >= min_distance)) throw InvalidArgument("distance range must be positive");
  if (!(camera.focal_px > 0)) throw InvalidArgument("focal length must be positive");
  noise.validate();
}

RenderConfig RenderConfig::from_config(const Config& cfg) {
  RenderConfig r;
  r.min_distance = cfg.get_double("datagen.min_distance", r.min_distance);
  r.max_distance = cfg.get_double("datagen.max_distance", r.max_distance);
  r.camera.focal_px = cfg.get_double("camera.focal_px", r.camera.focal_px);
  r.camera.cx = cfg.get_double("camera.cx", r.camera.cx);
  r.camera.cy = cfg.get_double("camera.cy", r.camera.cy);
  r.noise.pixel_sigma = cfg.get_double("noise.pixel_sigma", r.noise.pixel_sigma);
  r.noise.p_corrupt = cfg.get_double("noise.p_corrupt", r.noise.p_corrupt);
  r.validate();
  return r;
}

PoseFrame render_clean(const AnthropometrySpec& spec, double distance, double bearing, const Camera& cam,
                       std::mt19937_64& rng, std::int64_t frame_id) {
  const auto pts = body_points(spec, random_limb_angles(rng));
  return project_body(pts, distance, bearing, cam, frame_id, spec.label.id);
}

std::vector<std::vector<PoseFrame>> render_dataset(const std::vector<AnthropometrySpec>& population,
                                                   int frames_per_identity, const RenderConfig& cfg,
                                                   std::uint64_t seed) {
  cfg.validate();
  if (frames_per_identity < 0) throw InvalidArgument("frames per identity must be >= 0");
  std::vector<std::vector<PoseFrame>> out;
  out.reserve(population.size());
  const double max_bearing = 0.5 * cfg.camera.half_fov();
  for (const auto& spec : population) {
    auto rng = derive_rng(seed, static_cast<std::uint64_t>(spec.label.id) + 1);
    std::uniform_real_distribution<double> dist(cfg.min_distance, cfg.max_distance);
    std::uniform_real_distribution<double> bearing(-max_bearing, max_bearing);
    std::vector<PoseFrame> frames;
    frames.reserve(static_cast<std::size_t>(frames_per_identity));
    for (int i = 0; i < frames_per_identity; ++i) {
      const auto id = static_cast<std::int64_t>(spec.label.id) * frames_per_identity + i;
      const double d = dist(rng);
      const double b = bearing(rng);
      const auto clean = render_clean(spec, d, b, cfg.camera, rng, id);
      frames.push_back(apply_noise(clean, cfg.noise, rng));
    }
    out.push_back(std::move(frames));
  }
  return out;
}

Split stratified_split(const FeatureMatrix& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("split fraction must lie in (0, 1)");
  if (!data.has_labels()) throw InvalidArgument("stratified split needs labelled data");
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.labels.size(); ++i) by_label[data.labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (auto& [label, rows] : by_label) {
    if (rows.size() < 2) throw InvalidArgument("class " + std::to_string(label) + " has fewer than two samples");
    std::shuffle(rows.begin(), rows.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
    std::sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_rows.insert(test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {data.select(train_rows), data.select(test_rows)};
}

FeatureMatrix dataset_view(const FeatureMatrix& data, const std::vector<AnthropometrySpec>& population,
                           DatasetKind kind) {
  if (kind == DatasetKind::AllClass) return data;
  if (!data.has_labels() && data.rows() > 0) throw InvalidArgument("dataset views need labelled data");
  std::map<int, IdentityKind> kinds;
  for (const auto& p : population) kinds[p.label.id] = p.label.kind;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    auto it = kinds.find(data.labels[i]);
    if (it == kinds.end()) throw InvalidArgument("label " + std::to_string(data.labels[i]) + " not in population");
    if (it->second == IdentityKind::Diver) keep.push_back(i);
  }
  return data.select(keep);
}

std::string manifest_to_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["format"] = "diverid-dataset";
  j["version"] = 1;
  j["seed"] = m.seed;
  j["frames_per_identity"] = m.frames_per_identity;
  j["distance_range"] = {m.render.min_distance, m.render.max_distance};
  j["camera"] = {{"focal_px", m.render.camera.focal_px}, {"cx", m.render.camera.cx}, {"cy", m.render.camera.cy}};
  j["noise"] = {{"pixel_sigma", m.render.noise.pixel_sigma},
                {"p_corrupt", m.render.noise.p_corrupt},
                {"mode", std::string(corruption_name(m.render.noise.mode))}};
  j["delta_min"] = m.population_cfg.delta_min;
  auto pop = nlohmann::ordered_json::array();
  for (const auto& p : m.population) {
    nlohmann::ordered_json e;
    e["label"] = p.label.id;
    e["kind"] = std::string(kind_name(p.label.kind));
    e["segments_m"] = p.segments;
    pop.push_back(e);
  }
  j["population"] = pop;
  j["files"] = m.files;
  return j.dump(2);
}

DatasetManifest manifest_from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "diverid-dataset" || j.at("version") != 1) throw FormatError("not a dataset manifest (v1)");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.frames_per_identity = j.at("frames_per_identity").get<int>();
    m.render.min_distance = j.at("distance_range").at(0).get<double>();
    m.render.max_distance = j.at("distance_range").at(1).get<double>();
    m.render.camera.focal_px = j.at("camera").at("focal_px").get<double>();
    m.render.camera.cx = j.at("camera").at("cx").get<double>();
    m.render.camera.cy = j.at("camera").at("cy").get<double>();
    m.render.noise.pixel_sigma = j.at("noise").at("pixel_sigma").get<double>();
    m.render.noise.p_corrupt = j.at("noise").at("p_corrupt").get<double>();
    m.render.noise.mode = corruption_from_name(j.at("noise").at("mode").get<std::string>());
    m.population_cfg.delta_min = j.at("delta_min").get<double>();
    for (const auto& e : j.at("population")) {
      AnthropometrySpec p;
      p.label = {e.at("label").get<int>(), kind_from_name(e.at("kind").get<std::string>())};
      p.segments = e.at("segments_m").get<std::array<double, kNumAd>>();
      p.validate();
      m.population.push_back(p);
    }
    m.files = j.at("files").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what());
  }
  return m;
}

void write_dataset(const std::filesystem::path& dir, const DatasetManifest& manifest,
                   const std::vector<std::vector<PoseFrame>>& frames) {
  std::filesystem::create_directories(dir);
  if (frames.size() != manifest.files.size()) throw InvalidArgument("one pose file per identity expected");
  for (std::size_t i = 0; i < frames.size(); ++i) write_pose_file(dir / manifest.files[i], frames[i]);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw FormatError("cannot write manifest in " + dir.string());
  out << manifest_to_json(manifest) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw FormatError("no manifest.json in " + dir.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

std::vector<PoseFrame> read_dataset_frames(const std::filesystem::path& dir, const DatasetManifest& manifest) {
  std::vector<PoseFrame> all;
  for (const auto& f : manifest.files) {
    auto frames = read_pose_file(dir / f);
    all.insert(all.end(), frames.begin(), frames.end());
  }
  return all;
}

}  // namespace diverid
