#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "diverid/config.hpp"
#include "diverid/features.hpp"

namespace diverid {

enum class Mode { Train, Eval };

/// Hyper-parameters of triplet-loss training with plain SGD.
struct TrainConfig {
  int epochs = 1000;
  int batch_size = 512;
  double learning_rate = 5e-4;
  double margin = 0.3;
  double bn_momentum = 0.1;
  std::uint64_t seed = 0;
  /// Pick negatives with d(A,P) < d(A,N) < d(A,P) + m when any exist.
  bool semi_hard = false;
  /// Optional early stop: at this epoch count (0 = never), stop when the
  /// mean loss of the last `plateau_window` epochs differs from that of the
  /// window before by less than plateau_tolerance * margin.
  int plateau_epoch = 0;
  int plateau_window = 25;
  double plateau_tolerance = 0.005;

  void validate() const;
  static TrainConfig from_config(const Config& cfg);
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // fan_in x fan_out
  Eigen::RowVectorXd bias;
};

struct BatchNorm {
  Eigen::RowVectorXd gain;
  Eigen::RowVectorXd bias;
  Eigen::RowVectorXd running_mean;
  Eigen::RowVectorXd running_var;
};

/// Gradients with the same shapes as the trainable parameters.
struct EmbedGradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::RowVectorXd> bias;
  std::vector<Eigen::RowVectorXd> bn_gain;
  std::vector<Eigen::RowVectorXd> bn_bias;

  /// Same ordering as EmbedNet::flat_parameters().
  Eigen::VectorXd flat() const;
};

/// Intermediate values of a train-mode forward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // input of each dense layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of hidden layers
  std::vector<Eigen::MatrixXd> xhat;    // normalized activations
  std::vector<Eigen::RowVectorXd> batch_mean;
  std::vector<Eigen::RowVectorXd> batch_var;  // biased
  std::vector<Eigen::RowVectorXd> inv_std;
  Eigen::MatrixXd output;
};

/// Stack of (Linear -> LeakyReLU -> BatchNorm) hidden blocks followed by a
/// final Linear layer. The default widths give 45 -> 1024 -> 512 -> 256 -> 16.
class EmbedNet {
 public:
  static const std::vector<int>& default_widths();

  explicit EmbedNet(std::vector<int> widths = default_widths(), std::uint64_t seed = 0, double leaky_slope = 0.01,
                    double bn_eps = 1e-5);

  const std::vector<int>& widths() const { return widths_; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  double leaky_slope() const { return leaky_slope_; }
  double bn_eps() const { return bn_eps_; }
  std::uint64_t seed() const { return seed_; }

  const std::vector<DenseLayer>& dense() const { return dense_; }
  const std::vector<BatchNorm>& norms() const { return norms_; }

  /// Train mode normalizes with batch statistics and folds them into the
  /// running estimates; eval mode uses the running estimates.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode, double bn_momentum = 0.1);
  Eigen::MatrixXd forward_eval(const Eigen::MatrixXd& x) const;

  /// Train-mode pass without touching the running statistics.
  ForwardCache forward_train(const Eigen::MatrixXd& x) const;
  EmbedGradients backward(const ForwardCache& cache, const Eigen::MatrixXd& d_output) const;
  void update_running_stats(const ForwardCache& cache, double momentum);
  void sgd_step(const EmbedGradients& grads, double learning_rate);

  std::size_t num_parameters() const;
  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& p);

  /// FNV-1a over the architecture and the bit patterns of every stored value.
  std::uint64_t content_hash() const;

  bool operator==(const EmbedNet& o) const;

  void save(std::ostream& out) const;
  static EmbedNet load(std::istream& in);

 private:
  struct Empty {};
  explicit EmbedNet(Empty) {}
  void check_input(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd activate(const Eigen::MatrixXd& z) const;

  std::vector<int> widths_;
  std::uint64_t seed_ = 0;
  double leaky_slope_ = 0.01;
  double bn_eps_ = 1e-5;
  std::vector<DenseLayer> dense_;
  std::vector<BatchNorm> norms_;
};

void save_embed_net(const std::filesystem::path& path, const EmbedNet& net);
/// Throws FormatError when the stored widths differ from `expected_widths`
/// (pass an empty vector to accept any architecture).
EmbedNet load_embed_net(const std::filesystem::path& path,
                        const std::vector<int>& expected_widths = EmbedNet::default_widths());

/// 1 - cos(u, v), in [0, 2]. Throws DegenerateEmbeddingError on a zero vector.
double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& v);

/// max(0, dAP - dAN + m)
double triplet_loss(double d_ap, double d_an, double margin);

struct Triplet {
  Eigen::Index anchor;
  Eigen::Index positive;
  Eigen::Index negative;
};

/// Anchor / positive / negative rows gathered from a labelled feature matrix.
struct TripletBatch {
  Eigen::MatrixXd anchors;
  Eigen::MatrixXd positives;
  Eigen::MatrixXd negatives;

  /// Throws InvalidArgument when a triplet breaks the label invariants.
  static TripletBatch gather(const FeatureMatrix& data, const std::vector<Triplet>& triplets);
};

struct TripletLossResult {
  double loss = 0.0;  // mean over triplets
  Eigen::MatrixXd d_embeddings;
  int active = 0;  // triplets with positive hinge
};

/// Mean triplet loss over in-batch triplets and its gradient w.r.t. every
/// embedding row. A zero hinge (including the kink) contributes no gradient.
TripletLossResult triplet_batch_loss(const Eigen::MatrixXd& embeddings, const std::vector<Triplet>& triplets,
                                     double margin);

/// One random positive and negative per anchor; anchors lacking either are
/// skipped. With `semi_hard` the negative is drawn from the semi-hard band
/// of `embeddings` when that band is non-empty.
std::vector<Triplet> mine_triplets(const std::vector<int>& labels, std::mt19937_64& rng, bool semi_hard = false,
                                   const Eigen::MatrixXd* embeddings = nullptr, double margin = 0.0);

/// Mean loss and parameter gradients of one batch in train mode.
struct BatchEvaluation {
  double loss = 0.0;
  EmbedGradients grads;
  ForwardCache cache;
};
BatchEvaluation evaluate_batch(const EmbedNet& net, const Eigen::MatrixXd& x, const std::vector<Triplet>& triplets,
                               double margin);

struct TrainHistory {
  std::vector<double> epoch_loss;
  int skipped_batches = 0;
  bool stopped_on_plateau = false;
  /// Human-readable account of the plateau check, empty when not run.
  std::string plateau_note;
};

/// Window means and verdict of the plateau rule after `epoch_loss`.
struct PlateauCheck {
  double previous_mean = 0.0;
  double last_mean = 0.0;
  double tolerance = 0.0;
  bool plateaued = false;
};
PlateauCheck check_plateau(const std::vector<double>& epoch_loss, int window, double tolerance);

struct TrainResult {
  EmbedNet net;
  TrainHistory history;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Seeded SGD on the mean in-batch triplet loss. Needs at least two classes
/// with two samples each; throws TrainingDegenerateError if an epoch has no
/// usable batch.
TrainResult train_embedding(EmbedNet net, const FeatureMatrix& data, const TrainConfig& cfg,
                            const EpochCallback& on_epoch = {});

/// Eval-mode embedding of every row.
Eigen::MatrixXd embed_rows(const EmbedNet& net, const Eigen::MatrixXd& x);

}  // namespace diverid
