#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "diverid/body_model.hpp"
#include "diverid/config.hpp"
#include "diverid/features.hpp"

namespace diverid {

/// Normal distribution of one anatomical length (meters).
struct SegmentStat {
  const char* name;
  double mean;
  double sigma;
};

/// Population ranges for the six anatomical lengths; left/right sides are
/// the base length plus a small independent asymmetry.
inline constexpr std::array<SegmentStat, 6> kSegmentStats = {{
    {"shoulder_width", 0.380, 0.025},
    {"hip_width", 0.300, 0.022},
    {"upper_arm", 0.310, 0.018},
    {"lower_arm", 0.250, 0.015},
    {"torso_side", 0.480, 0.025},
    {"thigh", 0.420, 0.022},
}};
inline constexpr double kSideAsymmetrySigma = 0.006;

/// Independent generator for (seed, stream); used for per-identity and
/// per-episode sub-seeds.
std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t stream);

struct PopulationConfig {
  /// Minimum Euclidean distance between the ADR signatures of two identities.
  double delta_min = 0.5;
  int max_attempts = 20000;
};

/// Divers get labels 0..n_divers-1, swimmers follow.
std::vector<AnthropometrySpec> sample_population(int n_divers, int n_swimmers, std::uint64_t seed,
                                                 const PopulationConfig& cfg = {});

/// Noise-free ADR vector of an identity.
AdrVector adr_signature(const AnthropometrySpec& spec);

struct RenderConfig {
  double min_distance = 1.5;  // meters
  double max_distance = 4.0;
  Camera camera;
  NoiseModel noise;

  void validate() const;
  static RenderConfig from_config(const Config& cfg);
};

/// One clean (noise-free) frame of `spec` at a given range and bearing.
PoseFrame render_clean(const AnthropometrySpec& spec, double distance, double bearing, const Camera& cam,
                       std::mt19937_64& rng, std::int64_t frame_id);

/// `frames_per_identity` frames per identity, at uniformly drawn distances.
/// Identity `k` draws from its own sub-seed, so the output for one identity
/// does not depend on the rest of the population.
std::vector<std::vector<PoseFrame>> render_dataset(const std::vector<AnthropometrySpec>& population,
                                                   int frames_per_identity, const RenderConfig& cfg,
                                                   std::uint64_t seed);

struct Split {
  FeatureMatrix train;
  FeatureMatrix test;
};

/// Seeded per-class split; each class keeps round(fraction * n) rows for
/// training (at least one row on each side).
Split stratified_split(const FeatureMatrix& data, double fraction, std::uint64_t seed);

enum class DatasetKind : std::uint8_t { AllClass, Diver };

/// Rows whose label is a diver (Diver) or every row (AllClass).
FeatureMatrix dataset_view(const FeatureMatrix& data, const std::vector<AnthropometrySpec>& population,
                           DatasetKind kind);

/// gen output: identity_<label>.poses per identity plus manifest.json.
struct DatasetManifest {
  std::uint64_t seed = 0;
  int frames_per_identity = 0;
  RenderConfig render;
  PopulationConfig population_cfg;
  std::vector<AnthropometrySpec> population;
  std::vector<std::string> files;
};

void write_dataset(const std::filesystem::path& dir, const DatasetManifest& manifest,
                   const std::vector<std::vector<PoseFrame>>& frames);
DatasetManifest read_manifest(const std::filesystem::path& dir);
/// Every frame of the dataset in manifest order.
std::vector<PoseFrame> read_dataset_frames(const std::filesystem::path& dir, const DatasetManifest& manifest);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

}  // namespace diverid
