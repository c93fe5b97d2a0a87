#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "diverid/config.hpp"
#include "diverid/datagen.hpp"
#include "diverid/embed.hpp"
#include "diverid/features.hpp"

namespace diverid {

enum class HeadKind : std::uint8_t { Knn, Svm, Nn };

/// One row of the model table: dataset view, optional frozen embedding, head.
struct ModelVariant {
  DatasetKind dataset = DatasetKind::AllClass;
  bool uses_embedding = false;
  HeadKind head = HeadKind::Knn;

  /// Table name, e.g. "All_NN_SVM" or "Diver_KNN".
  std::string name() const;
  /// Throws InvalidVariant for names outside the table.
  static ModelVariant parse(std::string_view name);
  bool online_trainable() const { return head != HeadKind::Nn; }
  bool operator==(const ModelVariant&) const = default;
};

/// The ten trainable variants, in table order.
const std::vector<ModelVariant>& all_variants();
std::string variant_names_joined();

/// Majority label; ties go to the lowest label id. `labels` must be non-empty.
int majority_vote(const std::vector<int>& labels);

enum class KnnMetric : std::uint8_t { Euclidean, Cosine };

class KnnModel {
 public:
  static KnnModel fit(const Eigen::MatrixXd& x, std::vector<int> y, int k, KnnMetric metric = KnnMetric::Euclidean);

  /// Majority among the k nearest stored rows (equal distances resolved by
  /// storage order); vote ties go to the lowest label id.
  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& q) const;
  std::vector<int> predict_rows(const Eigen::MatrixXd& x) const;

  int k() const { return k_; }
  KnnMetric metric() const { return metric_; }
  const Eigen::MatrixXd& points() const { return x_; }
  const std::vector<int>& labels() const { return y_; }

  void save(std::ostream& out) const;
  static KnnModel load(std::istream& in);

 private:
  Eigen::MatrixXd x_;
  std::vector<int> y_;
  Eigen::VectorXd norms_;
  int k_ = 5;
  KnnMetric metric_ = KnnMetric::Euclidean;
};

struct SvmConfig {
  /// Soft-margin constant; the per-sample L2 strength is 1 / (c * n).
  double c = 1.0;
  double learning_rate = 0.1;
  int epochs = 20;
  std::uint64_t seed = 0;
};

/// One-vs-rest linear hinge-loss classifiers on standardized inputs,
/// trained by seeded SGD.
class SvmModel {
 public:
  static SvmModel fit(const Eigen::MatrixXd& x, const std::vector<int>& y, const SvmConfig& cfg = {});

  Eigen::RowVectorXd scores(const Eigen::Ref<const Eigen::RowVectorXd>& q) const;
  /// Arg-max score; ties go to the lowest label id.
  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& q) const;
  std::vector<int> predict_rows(const Eigen::MatrixXd& x) const;

  const std::vector<int>& classes() const { return classes_; }
  const Eigen::MatrixXd& weights() const { return w_; }  // dim x classes
  const Eigen::RowVectorXd& bias() const { return b_; }

  void save(std::ostream& out) const;
  static SvmModel load(std::istream& in);

 private:
  Standardizer scaler_;
  Eigen::MatrixXd w_;
  Eigen::RowVectorXd b_;
  std::vector<int> classes_;
};

struct SoftmaxConfig {
  int hidden = 64;
  double learning_rate = 0.05;
  int epochs = 60;
  int batch_size = 64;
  double leaky_slope = 0.01;
  std::uint64_t seed = 0;
};

/// Linear(d, hidden) -> LeakyReLU -> Linear(hidden, classes) -> softmax,
/// trained with cross-entropy.
class SoftmaxHead {
 public:
  struct Prediction {
    int label = 0;
    Eigen::RowVectorXd probabilities;  // ordered as classes()
  };

  static SoftmaxHead fit(const Eigen::MatrixXd& x, const std::vector<int>& y, const SoftmaxConfig& cfg = {},
                         int expected_dim = static_cast<int>(kEmbeddingDim));
  /// Freshly initialized head for the given class set.
  static SoftmaxHead init(int dim, std::vector<int> classes, const SoftmaxConfig& cfg);

  Prediction predict(const Eigen::Ref<const Eigen::RowVectorXd>& q) const;
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& x) const;
  std::vector<int> predict_rows(const Eigen::MatrixXd& x) const;

  /// Mean cross-entropy of rows `x` with class indices `y_idx`; fills
  /// `grad` (same order as flat_parameters) when non-null.
  double loss(const Eigen::MatrixXd& x, const std::vector<int>& y_idx, Eigen::VectorXd* grad = nullptr) const;
  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& p);

  const std::vector<int>& classes() const { return classes_; }
  int input_dim() const { return static_cast<int>(w1_.rows()); }

  void save(std::ostream& out) const;
  static SoftmaxHead load(std::istream& in);

 private:
  Eigen::MatrixXd w1_;
  Eigen::RowVectorXd b1_;
  Eigen::MatrixXd w2_;
  Eigen::RowVectorXd b2_;
  double slope_ = 0.01;
  std::vector<int> classes_;
};

struct ClassifierConfig {
  int knn_k = 5;
  /// Metric used by KNN heads on embedded features.
  KnnMetric embedded_knn_metric = KnnMetric::Euclidean;
  SvmConfig svm;
  SoftmaxConfig softmax;
  /// z-score the 45-d inputs of raw-feature variants (off by default).
  /// Embedding variants always feed raw ratios to the network.
  bool standardize_features = false;

  static ClassifierConfig from_config(const Config& cfg);
};

struct IdentifyResult {
  int label = 0;
  std::map<int, int> votes;
  std::vector<int> per_frame;
};

/// A trained variant: optional input standardizer, optional frozen
/// embedding, and a fitted head.
class IdentModel {
 public:
  using Head = std::variant<KnnModel, SvmModel, SoftmaxHead>;

  IdentModel(ModelVariant variant, std::shared_ptr<const EmbedNet> embed, Standardizer scaler, Head head);

  const ModelVariant& variant() const { return variant_; }
  const std::shared_ptr<const EmbedNet>& embed() const { return embed_; }
  std::uint64_t embed_hash() const { return embed_hash_; }
  const Head& head() const { return head_; }
  /// Labels the head can predict, ascending.
  std::vector<int> classes() const;

  /// Inputs of the head for raw ADR rows.
  Eigen::MatrixXd head_inputs(const Eigen::MatrixXd& adr) const;
  std::vector<int> predict_rows(const Eigen::MatrixXd& adr) const;
  IdentifyResult identify(const Eigen::MatrixXd& adr) const;

  void save(std::ostream& out) const;

 private:
  ModelVariant variant_;
  std::shared_ptr<const EmbedNet> embed_;
  std::uint64_t embed_hash_ = 0;
  Standardizer scaler_;
  Head head_;
};

/// Fit the head of `variant` on labelled 45-d rows. NN heads need the
/// embedding and are refused in online mode (InvalidVariant).
IdentModel build_variant(const ModelVariant& variant, const FeatureMatrix& train,
                         std::shared_ptr<const EmbedNet> embed, const ClassifierConfig& cfg = {}, bool online = false);

/// Per-frame predictions and their majority vote. `features` needs F >= 1 rows.
IdentifyResult identify(const IdentModel& model, const Eigen::MatrixXd& features);

// Bundle layout (text):
//   diverid-bundle 1
//   variant <name>
//   embed_hash <16 hex digits>|none
//   scaler 0|1 (then "mean ..." and "scale ..." lines when 1)
//   head knn|svm|nn, then the head record
//   end
void save_bundle(const std::filesystem::path& path, const IdentModel& model);
/// `nets` are candidate embeddings matched by content hash; a bundle whose
/// hash matches none of them is rejected with FormatError.
IdentModel load_bundle(std::istream& in, const std::vector<std::shared_ptr<const EmbedNet>>& nets);
IdentModel load_bundle(const std::filesystem::path& path, const std::vector<std::shared_ptr<const EmbedNet>>& nets);

std::string hash_hex(std::uint64_t h);

}  // namespace diverid
