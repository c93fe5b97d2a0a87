#include "diverid/features.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "diverid/text_io.hpp"

namespace diverid {

AdVector compute_ad(const PoseFrame& frame, double epsilon_len) {
  std::array<double, kNumAd> v{};
  for (std::size_t i = 0; i < kNumAd; ++i) {
    const auto& seg = kSegments[i];
    v[i] = joint_distance(frame, seg.a, seg.b);
    if (!(v[i] >= epsilon_len)) {
      throw DegeneratePoseError(frame.frame_id(), "frame " + std::to_string(frame.frame_id()) + ": segment " +
                                                      std::string(seg.name) + " is degenerate");
    }
  }
  return AdVector(v);
}

AdrVector compute_adr(const std::array<double, kNumAd>& ad) {
  for (double a : ad) {
    if (!std::isfinite(a) || a <= 0.0) throw InvalidArgument("AD values must be positive");
  }
  std::array<double, kNumAdr> r{};
  std::size_t k = 0;
  for (std::size_t i = 0; i < kNumAd; ++i) {
    for (std::size_t j = i + 1; j < kNumAd; ++j) r[k++] = ad[i] / ad[j];
  }
  return AdrVector(r);
}

AdrVector compute_adr(const AdVector& ad) { return compute_adr(ad.values()); }

FeatureMatrix FeatureMatrix::select(const std::vector<std::size_t>& rows) const {
  FeatureMatrix out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.values.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(rows[r]));
  }
  if (!labels.empty()) {
    out.labels.reserve(rows.size());
    for (auto r : rows) out.labels.push_back(labels[r]);
  }
  return out;
}

bool FeatureMatrix::operator==(const FeatureMatrix& o) const {
  if (values.rows() != o.values.rows() || values.cols() != o.values.cols()) return false;
  return labels == o.labels && (values.array() == o.values.array()).all();
}

FeatureMatrix extract_batch(const std::vector<PoseFrame>& frames, const FilterConfig& cfg, double epsilon_len) {
  const auto accepted = filter_stream(frames, cfg);
  FeatureMatrix m;
  m.values.resize(static_cast<Eigen::Index>(accepted.size()), static_cast<Eigen::Index>(kNumAdr));
  bool all_labelled = true;
  for (std::size_t r = 0; r < accepted.size(); ++r) {
    const auto adr = compute_adr(compute_ad(accepted[r], epsilon_len));
    for (std::size_t k = 0; k < kNumAdr; ++k) {
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = adr[k];
    }
    all_labelled = all_labelled && accepted[r].label().has_value();
  }
  if (all_labelled) {
    m.labels.reserve(accepted.size());
    for (const auto& f : accepted) m.labels.push_back(*f.label());
  }
  return m;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw InvalidArgument("standardizer needs at least two rows");
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  s.scale = (centered.array().square().colwise().sum() / static_cast<double>(x.rows() - 1)).sqrt().transpose();
  for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
    if (!(s.scale[i] > 0.0)) s.scale[i] = 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (empty()) return x;
  if (x.cols() != mean.size()) throw InvalidArgument("standardizer dimension mismatch");
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

void write_features(std::ostream& out, const FeatureMatrix& m) {
  const bool labelled = !m.labels.empty();
  if (labelled && static_cast<Eigen::Index>(m.labels.size()) != m.rows()) {
    throw InvalidArgument("label count does not match row count");
  }
  out << "adr-features " << m.rows() << ' ' << m.cols() << ' ' << (labelled ? 1 : 0) << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::string line;
    if (labelled) line = std::to_string(m.labels[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!line.empty()) line += ' ';
      line += format_double(m.values(r, c));
    }
    out << line << '\n';
  }
}

FeatureMatrix read_features(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty feature file");
  auto head = split_ws(line);
  if (head.size() != 4 || head[0] != "adr-features") throw FormatError("bad feature header");
  const auto rows = parse_int(head[1]);
  const auto cols = parse_int(head[2]);
  const auto labelled = parse_int(head[3]);
  if (rows < 0 || cols < 1 || (labelled != 0 && labelled != 1)) throw FormatError("bad feature header values");
  FeatureMatrix m;
  m.values.resize(rows, cols);
  for (std::int64_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw FormatError("feature file truncated at row " + std::to_string(r));
    auto tok = split_ws(line);
    const auto expected = static_cast<std::size_t>(cols + labelled);
    if (tok.size() != expected) throw FormatError("feature row " + std::to_string(r) + " has wrong width");
    std::size_t t = 0;
    if (labelled) m.labels.push_back(static_cast<int>(parse_int(tok[t++])));
    for (std::int64_t c = 0; c < cols; ++c) m.values(r, c) = parse_double(tok[t++]);
  }
  return m;
}

void write_features_file(const std::filesystem::path& path, const FeatureMatrix& m) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_features(out, m);
}

FeatureMatrix read_features_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  return read_features(in);
}

}  // namespace diverid
