#include "diverid/pipeline.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace diverid {

LabelledFeatures synthesize_features(int n_divers, int n_swimmers, int frames_per_identity, const RenderConfig& render,
                                     const PopulationConfig& population_cfg, const FilterConfig& filter,
                                     std::uint64_t seed) {
  LabelledFeatures out;
  out.population = sample_population(n_divers, n_swimmers, seed, population_cfg);
  const auto frames = render_dataset(out.population, frames_per_identity, render, seed);
  std::vector<PoseFrame> all;
  for (const auto& f : frames) all.insert(all.end(), f.begin(), f.end());
  out.n_frames = all.size();
  out.features = extract_batch(all, filter);
  return out;
}

LabelledFeatures load_dataset_features(const std::filesystem::path& dir, const FilterConfig& filter) {
  LabelledFeatures out;
  const auto manifest = read_manifest(dir);
  out.population = manifest.population;
  const auto frames = read_dataset_frames(dir, manifest);
  if (frames.empty()) throw FormatError("dataset " + dir.string() + " holds no frames");
  out.n_frames = frames.size();
  out.features = extract_batch(frames, filter);
  if (out.features.rows() == 0) throw FormatError("no frame of " + dir.string() + " passes the pose filter");
  if (!out.features.has_labels()) throw FormatError("dataset frames must carry identity labels");
  return out;
}

double triplet_accuracy(const EmbedNet& net, const FeatureMatrix& x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto triplets = mine_triplets(x.labels, rng);
  if (triplets.empty()) throw InvalidArgument("no triplets in the evaluation rows");
  const Eigen::MatrixXd e = embed_rows(net, x.values);
  std::size_t ok = 0;
  for (const auto& t : triplets) {
    const Eigen::RowVectorXd a = e.row(static_cast<Eigen::Index>(t.anchor));
    const double dp = cosine_distance(a, e.row(static_cast<Eigen::Index>(t.positive)));
    const double dn = cosine_distance(a, e.row(static_cast<Eigen::Index>(t.negative)));
    ok += dp < dn ? 1 : 0;
  }
  return static_cast<double>(ok) / static_cast<double>(triplets.size());
}

FeatureMatrix rows_for_model(const FeatureMatrix& data, const IdentModel& model) {
  const auto classes = model.classes();
  const std::set<int> known(classes.begin(), classes.end());
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (known.count(data.labels[i]) != 0) keep.push_back(i);
  }
  return data.select(keep);
}

ZooResult train_zoo(const Split& split, const std::vector<AnthropometrySpec>& population,
                    const std::vector<ModelVariant>& variants, const ZooConfig& cfg,
                    std::shared_ptr<const EmbedNet> pretrained, const EpochCallback& on_epoch) {
  ZooResult zoo;
  const bool needs_embed =
      std::any_of(variants.begin(), variants.end(), [](const ModelVariant& v) { return v.uses_embedding; });
  if (needs_embed) {
    if (pretrained) {
      zoo.embed = std::move(pretrained);
    } else {
      auto result =
          train_embedding(EmbedNet(EmbedNet::default_widths(), cfg.train.seed), split.train, cfg.train, on_epoch);
      zoo.history = std::move(result.history);
      zoo.embed = std::make_shared<const EmbedNet>(std::move(result.net));
    }
    zoo.embed_triplet_accuracy = triplet_accuracy(*zoo.embed, split.test, cfg.train.seed + 1);
  }
  for (const auto& v : variants) {
    const auto train = dataset_view(split.train, population, v.dataset);
    const auto test = dataset_view(split.test, population, v.dataset);
    auto model = std::make_shared<const IdentModel>(build_variant(v, train, zoo.embed, cfg.classifiers));
    VariantScore s;
    s.variant = v;
    s.train_accuracy = accuracy(model->predict_rows(train.values), train.labels);
    s.test_accuracy = accuracy(model->predict_rows(test.values), test.labels);
    zoo.scores.push_back(s);
    zoo.models.push_back(std::move(model));
  }
  return zoo;
}

Table accuracy_table(const ZooResult& zoo) {
  Table t;
  t.headers = {"Model", "Train acc.", "Test acc."};
  if (zoo.embed) t.add_row({"Embedding (triplet order)", "-", format_percent(zoo.embed_triplet_accuracy)});
  for (const auto& s : zoo.scores) {
    t.add_row({s.variant.name(), format_percent(s.train_accuracy), format_percent(s.test_accuracy)});
  }
  return t;
}

}  // namespace diverid
