#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "diverid/pose_filter.hpp"
#include "diverid/types.hpp"

namespace diverid {

inline constexpr double kEpsilonLength = 1e-6;

/// Segment lengths; throws DegeneratePoseError when any is below `epsilon_len`.
AdVector compute_ad(const PoseFrame& frame, double epsilon_len = kEpsilonLength);

/// Pairwise ratios AD_i / AD_j for i < j in lexicographic order.
AdrVector compute_adr(const AdVector& ad);
AdrVector compute_adr(const std::array<double, kNumAd>& ad);

/// Row-per-sample feature table with optional integer labels.
struct FeatureMatrix {
  Eigen::MatrixXd values;   // rows x cols
  std::vector<int> labels;  // empty, or one per row

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  bool has_labels() const { return !labels.empty(); }

  FeatureMatrix select(const std::vector<std::size_t>& rows) const;
  bool operator==(const FeatureMatrix& o) const;
};

/// Filter, then compute one ADR row per accepted frame. Labels are carried
/// only when every accepted frame is labelled.
FeatureMatrix extract_batch(const std::vector<PoseFrame>& frames, const FilterConfig& cfg = {},
                            double epsilon_len = kEpsilonLength);

/// Per-column z-score transform fitted on a training matrix.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  bool empty() const { return mean.size() == 0; }
};

// Feature file:
//   adr-features <n_rows> <n_cols> <has_labels 0|1>
//   [<label>] v_1 ... v_n_cols          (one line per row)
// Values use shortest round-trip formatting, so reading back is bit-exact.
void write_features(std::ostream& out, const FeatureMatrix& m);
FeatureMatrix read_features(std::istream& in);
void write_features_file(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_features_file(const std::filesystem::path& path);

}  // namespace diverid
