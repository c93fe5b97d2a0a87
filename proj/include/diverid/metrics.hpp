#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "diverid/classify.hpp"
#include "diverid/mission.hpp"

namespace diverid {

/// Fraction of equal entries; throws InvalidArgument on a size mismatch or empty input.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Mean silhouette coefficient under the cosine distance 1 - cos. Points in
/// singleton clusters score 0. Needs at least two clusters.
double cosine_silhouette(const Eigen::MatrixXd& x, const std::vector<int>& labels);

struct FramesPoint {
  int frames = 0;
  int groups = 0;
  double accuracy = 0.0;
};

struct FramesCurve {
  std::vector<FramesPoint> points;
  /// Frame counts dropped because some identity has fewer test rows.
  std::vector<int> skipped;
};

/// For each frame count n, draw `groups_per_identity` random n-row subsets of
/// every identity's test rows, identify each subset by majority vote and
/// report the fraction identified correctly.
FramesCurve accuracy_vs_frames(const IdentModel& model, const FeatureMatrix& test, const std::vector<int>& frame_counts,
                               int groups_per_identity, std::uint64_t seed);
/// Same, from precomputed per-row predictions.
FramesCurve accuracy_vs_frames(const std::vector<int>& row_predictions, const std::vector<int>& truth,
                               const std::vector<int>& frame_counts, int groups_per_identity, std::uint64_t seed);

/// Rows projected on the two leading principal axes (N x 2). Each axis is
/// signed so its largest-magnitude loading is positive.
Eigen::MatrixXd pca_project_2d(const Eigen::MatrixXd& x);

/// A report table kept as strings so that the aligned and the
/// tab-separated renderings come from the same cells.
struct Table {
  std::vector<std::string> headers;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::string aligned() const;
  std::string tsv() const;
};

std::string format_fixed(double v, int decimals);
std::string format_percent(double fraction, int decimals = 2);

/// Per-episode TP/TN/FP/FN rows, then "Sum" and "Pred. Acc." rows.
Table trial_table(const std::vector<Tally>& episodes);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart drawn with one marker character per series.
std::string text_chart(const std::vector<Series>& series, int width = 60, int height = 16, double y_min = 0.0,
                       double y_max = 1.0);

}  // namespace diverid
