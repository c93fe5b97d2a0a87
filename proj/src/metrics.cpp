#include "diverid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace diverid {

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw InvalidArgument("prediction and truth sizes differ");
  if (predicted.empty()) throw InvalidArgument("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double cosine_silhouette(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw InvalidArgument("label count does not match rows");
  std::map<int, int> cluster_of;
  for (int l : labels) cluster_of.emplace(l, 0);
  if (cluster_of.size() < 2) throw InvalidArgument("silhouette needs at least two clusters");
  int next = 0;
  for (auto& [label, c] : cluster_of) c = next++;
  const auto n_clusters = static_cast<Eigen::Index>(cluster_of.size());

  const Eigen::VectorXd norms = x.rowwise().norm();
  if (!(norms.array() > 0.0).all()) throw DegenerateEmbeddingError("cosine silhouette of a zero row");
  const Eigen::MatrixXd unit = x.array().colwise() / norms.array();
  std::vector<int> cl(labels.size());
  Eigen::VectorXd sizes = Eigen::VectorXd::Zero(n_clusters);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    cl[i] = cluster_of[labels[i]];
    sizes[cl[i]] += 1.0;
  }

  // Per-point summed distance to every cluster, one block of rows at a time.
  const Eigen::Index n = x.rows();
  const Eigen::Index block = 256;
  double total = 0.0;
  for (Eigen::Index start = 0; start < n; start += block) {
    const Eigen::Index len = std::min(block, n - start);
    const Eigen::MatrixXd d = 1.0 - (unit.middleRows(start, len) * unit.transpose()).array();
    for (Eigen::Index r = 0; r < len; ++r) {
      const Eigen::Index i = start + r;
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_clusters);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i) sum[cl[static_cast<std::size_t>(j)]] += d(r, j);
      }
      const int own = cl[static_cast<std::size_t>(i)];
      if (sizes[own] < 2.0) continue;
      const double a = sum[own] / (sizes[own] - 1.0);
      double b = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < n_clusters; ++c) {
        if (c != own) b = std::min(b, sum[c] / sizes[c]);
      }
      const double m = std::max(a, b);
      if (m > 0.0) total += (b - a) / m;
    }
  }
  return total / static_cast<double>(n);
}

FramesCurve accuracy_vs_frames(const std::vector<int>& row_predictions, const std::vector<int>& truth,
                               const std::vector<int>& frame_counts, int groups_per_identity, std::uint64_t seed) {
  if (row_predictions.size() != truth.size()) throw InvalidArgument("prediction and truth sizes differ");
  if (groups_per_identity < 1) throw InvalidArgument("groups per identity must be >= 1");
  std::map<int, std::vector<int>> by_identity;
  for (std::size_t i = 0; i < truth.size(); ++i) by_identity[truth[i]].push_back(row_predictions[i]);
  std::size_t smallest = truth.empty() ? 0 : truth.size();
  for (const auto& [label, rows] : by_identity) smallest = std::min(smallest, rows.size());

  FramesCurve curve;
  std::mt19937_64 rng(seed);
  for (int n : frame_counts) {
    if (n < 1 || static_cast<std::size_t>(n) > smallest) {
      curve.skipped.push_back(n);
      continue;
    }
    int correct = 0;
    int groups = 0;
    for (auto& [label, preds] : by_identity) {
      std::vector<int> pool = preds;
      for (int g = 0; g < groups_per_identity; ++g) {
        // Partial Fisher-Yates: the first n entries become a uniform sample.
        for (int k = 0; k < n; ++k) {
          std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), pool.size() - 1);
          std::swap(pool[static_cast<std::size_t>(k)], pool[pick(rng)]);
        }
        const std::vector<int> sample(pool.begin(), pool.begin() + n);
        correct += majority_vote(sample) == label ? 1 : 0;
        ++groups;
      }
    }
    curve.points.push_back({n, groups, static_cast<double>(correct) / groups});
  }
  return curve;
}

FramesCurve accuracy_vs_frames(const IdentModel& model, const FeatureMatrix& test, const std::vector<int>& frame_counts,
                               int groups_per_identity, std::uint64_t seed) {
  if (!test.has_labels()) throw InvalidArgument("accuracy-vs-frames needs labelled test rows");
  return accuracy_vs_frames(model.predict_rows(test.values), test.labels, frame_counts, groups_per_identity, seed);
}

Eigen::MatrixXd pca_project_2d(const Eigen::MatrixXd& x) {
  if (x.rows() < 2 || x.cols() < 2) throw InvalidArgument("projection needs at least 2 rows and 2 columns");
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd axes(d, 2);
  axes.col(0) = es.eigenvectors().col(d - 1);
  axes.col(1) = es.eigenvectors().col(d - 2);
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    axes.col(c).cwiseAbs().maxCoeff(&arg);
    if (axes(arg, c) < 0.0) axes.col(c) *= -1.0;
  }
  return centered * axes;
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != headers.size()) throw InvalidArgument("table row width differs from the header");
  rows.push_back(std::move(row));
}

std::string Table::aligned() const {
  std::vector<std::size_t> w(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    w[c] = headers[c].size();
    for (const auto& r : rows) w[c] = std::max(w[c], r[c].size());
  }
  std::ostringstream out;
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out << "  ";
      // First column left-aligned, numbers right-aligned.
      if (c == 0) {
        out << cells[c] << std::string(w[c] - cells[c].size(), ' ');
      } else {
        out << std::string(w[c] - cells[c].size(), ' ') << cells[c];
      }
    }
    out << '\n';
  };
  line(headers);
  std::size_t total = 0;
  for (auto x : w) total += x;
  out << std::string(total + 2 * (w.empty() ? 0 : w.size() - 1), '-') << '\n';
  for (const auto& r : rows) line(r);
  return out.str();
}

std::string Table::tsv() const {
  std::ostringstream out;
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) out << (c > 0 ? "\t" : "") << cells[c];
    out << '\n';
  };
  line(headers);
  for (const auto& r : rows) line(r);
  return out.str();
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string format_percent(double fraction, int decimals) { return format_fixed(100.0 * fraction, decimals) + "%"; }

Table trial_table(const std::vector<Tally>& episodes) {
  Table t;
  t.headers = {"Trial", "TP", "TN", "FP", "FN"};
  Tally sum;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    t.add_row({std::to_string(i + 1), std::to_string(e.tp), std::to_string(e.tn), std::to_string(e.fp),
               std::to_string(e.fn)});
    sum += e;
  }
  t.add_row({"Sum", std::to_string(sum.tp), std::to_string(sum.tn), std::to_string(sum.fp), std::to_string(sum.fn)});
  t.add_row({"Pred. Acc.", format_percent(sum.accuracy()), "", "", ""});
  return t;
}

std::string text_chart(const std::vector<Series>& series, int width, int height, double y_min, double y_max) {
  if (width < 8 || height < 4 || !(y_max > y_min)) throw InvalidArgument("bad chart geometry");
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw InvalidArgument("series x/y sizes differ");
    for (double v : s.x) {
      x_lo = std::min(x_lo, v);
      x_hi = std::max(x_hi, v);
    }
  }
  if (!std::isfinite(x_lo)) return "(no data)\n";
  if (x_hi == x_lo) x_hi = x_lo + 1.0;

  static constexpr char kMarks[] = "*o+x#@%&";
  std::vector<std::string> grid(static_cast<std::size_t>(height), std::string(static_cast<std::size_t>(width), ' '));
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char mark = kMarks[k % (sizeof(kMarks) - 1)];
    for (std::size_t i = 0; i < series[k].x.size(); ++i) {
      const double fx = (series[k].x[i] - x_lo) / (x_hi - x_lo);
      const double fy = std::clamp((series[k].y[i] - y_min) / (y_max - y_min), 0.0, 1.0);
      const auto col = static_cast<std::size_t>(std::lround(fx * (width - 1)));
      const auto row = static_cast<std::size_t>(std::lround((1.0 - fy) * (height - 1)));
      grid[row][col] = mark;
    }
  }
  std::ostringstream out;
  for (int r = 0; r < height; ++r) {
    const double yv = y_max - (y_max - y_min) * r / (height - 1);
    out << format_fixed(yv, 2) << " |" << grid[static_cast<std::size_t>(r)] << '\n';
  }
  out << "     +" << std::string(static_cast<std::size_t>(width), '-') << '\n';
  out << "      " << format_fixed(x_lo, 0) << std::string(static_cast<std::size_t>(std::max(1, width - 12)), ' ')
      << format_fixed(x_hi, 0) << '\n';
  for (std::size_t k = 0; k < series.size(); ++k) {
    out << "      " << kMarks[k % (sizeof(kMarks) - 1)] << ' ' << series[k].name << '\n';
  }
  return out.str();
}

}  // namespace diverid
