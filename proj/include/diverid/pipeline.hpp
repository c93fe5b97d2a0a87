#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "diverid/classify.hpp"
#include "diverid/datagen.hpp"
#include "diverid/embed.hpp"
#include "diverid/metrics.hpp"

namespace diverid {

/// Labelled ADR rows of every accepted frame of a population.
struct LabelledFeatures {
  std::vector<AnthropometrySpec> population;
  FeatureMatrix features;
  std::size_t n_frames = 0;
};

LabelledFeatures synthesize_features(int n_divers, int n_swimmers, int frames_per_identity, const RenderConfig& render,
                                     const PopulationConfig& population_cfg, const FilterConfig& filter,
                                     std::uint64_t seed);
/// Reads a `gen` output directory. Throws FormatError when it holds no frames.
LabelledFeatures load_dataset_features(const std::filesystem::path& dir, const FilterConfig& filter);

struct ZooConfig {
  TrainConfig train;
  ClassifierConfig classifiers;
  double split_fraction = 0.8;
};

struct VariantScore {
  ModelVariant variant;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct ZooResult {
  std::shared_ptr<const EmbedNet> embed;
  TrainHistory history;
  /// Share of random test triplets with d(A, P) < d(A, N); 0 without an embedding.
  double embed_triplet_accuracy = 0.0;
  std::vector<std::shared_ptr<const IdentModel>> models;
  std::vector<VariantScore> scores;
};

/// Trains the embedding on the all-class training rows when a variant needs
/// it and `pretrained` is null, then fits each variant on its dataset view.
ZooResult train_zoo(const Split& split, const std::vector<AnthropometrySpec>& population,
                    const std::vector<ModelVariant>& variants, const ZooConfig& cfg,
                    std::shared_ptr<const EmbedNet> pretrained = nullptr, const EpochCallback& on_epoch = {});

/// Test rows restricted to the identities a model was trained on.
FeatureMatrix rows_for_model(const FeatureMatrix& data, const IdentModel& model);

/// Per-variant train/test accuracy, plus the embedding row when present.
Table accuracy_table(const ZooResult& zoo);

/// Share of seeded random triplets of `x` that the embedding orders correctly.
double triplet_accuracy(const EmbedNet& net, const FeatureMatrix& x, std::uint64_t seed);

}  // namespace diverid
