#include "diverid/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "diverid/text_io.hpp"

namespace diverid {

namespace {

std::vector<int> sorted_classes(const std::vector<int>& y) {
  std::set<int> s(y.begin(), y.end());
  return {s.begin(), s.end()};
}

int class_index(const std::vector<int>& classes, int label) {
  auto it = std::lower_bound(classes.begin(), classes.end(), label);
  if (it == classes.end() || *it != label) throw InvalidArgument("unknown label " + std::to_string(label));
  return static_cast<int>(it - classes.begin());
}

// First maximum wins, so ties go to the lowest class id.
int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<int>(best);
}

void write_mat(std::ostream& out, const char* tag, const Eigen::MatrixXd& m) {
  out << tag << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Eigen::RowVectorXd row = m.row(r);
    write_tagged_row(out, "r", std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
}

Eigen::MatrixXd read_mat(std::istream& in, const char* tag) {
  std::string buf;
  auto tok = read_tagged_line(in, buf, tag, 2);
  const auto rows = parse_int(tok[1]);
  const auto cols = parse_int(tok[2]);
  if (rows < 0 || cols < 0) throw FormatError(std::string("bad shape for ") + tag);
  Eigen::MatrixXd m(rows, cols);
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto v = read_tagged_row(in, "r", static_cast<std::size_t>(cols));
    for (std::int64_t c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(c)];
  }
  return m;
}

void write_vec(std::ostream& out, const char* tag, const Eigen::RowVectorXd& v) {
  write_tagged_row(out, tag, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

Eigen::RowVectorXd read_vec(std::istream& in, const char* tag, Eigen::Index n) {
  const auto v = read_tagged_row(in, tag, static_cast<std::size_t>(n));
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), n);
}

void write_ints(std::ostream& out, const char* tag, const std::vector<int>& v) {
  out << tag << ' ' << v.size();
  for (int x : v) out << ' ' << x;
  out << '\n';
}

std::vector<int> read_ints(std::istream& in, const char* tag) {
  std::string buf;
  auto tok = read_tagged_line(in, buf, tag, static_cast<std::size_t>(-1));
  if (tok.size() < 2) throw FormatError(std::string("empty ") + tag);
  const auto n = static_cast<std::size_t>(parse_int(tok[1]));
  if (tok.size() != n + 2) throw FormatError(std::string("bad count in ") + tag);
  std::vector<int> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(static_cast<int>(parse_int(tok[i + 2])));
  return v;
}

std::string read_word(std::istream& in, const char* tag) {
  std::string buf;
  auto tok = read_tagged_line(in, buf, tag, 1);
  return std::string(tok[1]);
}

}  // namespace

std::string ModelVariant::name() const {
  std::string s = dataset == DatasetKind::AllClass ? "All" : "Diver";
  if (uses_embedding) s += "_NN";
  switch (head) {
    case HeadKind::Knn: s += "_KNN"; break;
    case HeadKind::Svm: s += "_SVM"; break;
    case HeadKind::Nn: break;
  }
  return s;
}

const std::vector<ModelVariant>& all_variants() {
  static const std::vector<ModelVariant> v = {
      {DatasetKind::AllClass, false, HeadKind::Knn}, {DatasetKind::Diver, false, HeadKind::Knn},
      {DatasetKind::AllClass, false, HeadKind::Svm}, {DatasetKind::Diver, false, HeadKind::Svm},
      {DatasetKind::AllClass, true, HeadKind::Knn},  {DatasetKind::Diver, true, HeadKind::Knn},
      {DatasetKind::AllClass, true, HeadKind::Svm},  {DatasetKind::Diver, true, HeadKind::Svm},
      {DatasetKind::AllClass, true, HeadKind::Nn},   {DatasetKind::Diver, true, HeadKind::Nn},
  };
  return v;
}

std::string variant_names_joined() {
  std::string s;
  for (const auto& v : all_variants()) {
    if (!s.empty()) s += ", ";
    s += v.name();
  }
  return s;
}

ModelVariant ModelVariant::parse(std::string_view name) {
  for (const auto& v : all_variants()) {
    if (v.name() == name) return v;
  }
  throw InvalidVariant("unknown model variant '" + std::string(name) + "'; valid names: " + variant_names_joined());
}

int majority_vote(const std::vector<int>& labels) {
  if (labels.empty()) throw InvalidArgument("majority vote of an empty set");
  std::map<int, int> votes;
  for (int l : labels) ++votes[l];
  int best = votes.begin()->first;
  int best_count = votes.begin()->second;
  for (const auto& [label, count] : votes) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

// ---------------------------------------------------------------- KNN

KnnModel KnnModel::fit(const Eigen::MatrixXd& x, std::vector<int> y, int k, KnnMetric metric) {
  if (k < 1) throw InvalidArgument("k must be >= 1");
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) throw InvalidArgument("label count does not match rows");
  if (k > x.rows()) throw InvalidArgument("k exceeds the number of training rows");
  if (!x.allFinite()) throw InvalidArgument("KNN training rows must be finite");
  KnnModel m;
  m.x_ = x;
  m.y_ = std::move(y);
  m.k_ = k;
  m.metric_ = metric;
  m.norms_ = x.rowwise().norm();
  if (metric == KnnMetric::Cosine && !(m.norms_.array() > 0.0).all()) {
    throw InvalidArgument("cosine KNN needs non-zero training rows");
  }
  return m;
}

int KnnModel::predict(const Eigen::Ref<const Eigen::RowVectorXd>& q) const {
  if (q.size() != x_.cols()) throw InvalidArgument("KNN query has the wrong dimension");
  Eigen::VectorXd d;
  if (metric_ == KnnMetric::Euclidean) {
    d = (x_.rowwise() - q).rowwise().squaredNorm();
  } else {
    const double qn = q.norm();
    if (!(qn > 0.0)) throw DegenerateEmbeddingError("cosine KNN query has zero norm");
    d = 1.0 - ((x_ * q.transpose()).array() / (norms_.array() * qn));
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x_.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const auto less = [&](Eigen::Index a, Eigen::Index b) { return d[a] < d[b] || (d[a] == d[b] && a < b); };
  std::nth_element(idx.begin(), idx.begin() + (k_ - 1), idx.end(), less);
  std::vector<int> nearest;
  nearest.reserve(static_cast<std::size_t>(k_));
  for (int i = 0; i < k_; ++i) nearest.push_back(y_[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
  return majority_vote(nearest);
}

std::vector<int> KnnModel::predict_rows(const Eigen::MatrixXd& x) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) out.push_back(predict(x.row(r)));
  return out;
}

void KnnModel::save(std::ostream& out) const {
  out << "k " << k_ << '\n';
  out << "metric " << (metric_ == KnnMetric::Euclidean ? "euclidean" : "cosine") << '\n';
  write_ints(out, "labels", y_);
  write_mat(out, "points", x_);
}

KnnModel KnnModel::load(std::istream& in) {
  std::string buf;
  const int k = static_cast<int>(parse_int(read_tagged_line(in, buf, "k", 1)[1]));
  const auto metric_name = read_word(in, "metric");
  if (metric_name != "euclidean" && metric_name != "cosine") throw FormatError("unknown KNN metric " + metric_name);
  auto labels = read_ints(in, "labels");
  auto points = read_mat(in, "points");
  try {
    return fit(points, std::move(labels), k, metric_name == "euclidean" ? KnnMetric::Euclidean : KnnMetric::Cosine);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("bad KNN record: ") + e.what());
  }
}

// ---------------------------------------------------------------- SVM

SvmModel SvmModel::fit(const Eigen::MatrixXd& x, const std::vector<int>& y, const SvmConfig& cfg) {
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) throw InvalidArgument("label count does not match rows");
  if (!(cfg.c > 0 && cfg.learning_rate > 0 && cfg.epochs >= 1)) throw InvalidArgument("bad SVM configuration");
  SvmModel m;
  m.classes_ = sorted_classes(y);
  if (m.classes_.size() < 2) throw InvalidArgument("SVM training needs at least two classes");
  m.scaler_ = Standardizer::fit(x);
  const Eigen::MatrixXd xs = m.scaler_.apply(x);
  const auto n = static_cast<std::size_t>(xs.rows());
  const auto n_cls = static_cast<Eigen::Index>(m.classes_.size());
  m.w_ = Eigen::MatrixXd::Zero(xs.cols(), n_cls);
  m.b_ = Eigen::RowVectorXd::Zero(n_cls);
  std::vector<int> yi(n);
  for (std::size_t i = 0; i < n; ++i) yi[i] = class_index(m.classes_, y[i]);

  const double lambda = 1.0 / (cfg.c * static_cast<double>(n));
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  double t = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      const double lr = cfg.learning_rate / (1.0 + cfg.learning_rate * lambda * t);
      const auto xi = xs.row(static_cast<Eigen::Index>(i));
      const Eigen::RowVectorXd s = xi * m.w_ + m.b_;
      m.w_ *= (1.0 - lr * lambda);
      for (Eigen::Index c = 0; c < n_cls; ++c) {
        const double sign = yi[i] == c ? 1.0 : -1.0;
        if (sign * s[c] < 1.0) {
          m.w_.col(c) += (lr * sign) * xi.transpose();
          m.b_[c] += lr * sign;
        }
      }
      t += 1.0;
    }
  }
  if (!m.w_.allFinite() || !m.b_.allFinite()) throw InvalidArgument("SVM training diverged");
  return m;
}

Eigen::RowVectorXd SvmModel::scores(const Eigen::Ref<const Eigen::RowVectorXd>& q) const {
  if (q.size() != w_.rows()) throw InvalidArgument("SVM query has the wrong dimension");
  const Eigen::RowVectorXd qs = (q - scaler_.mean.transpose()).array() / scaler_.scale.transpose().array();
  return qs * w_ + b_;
}

int SvmModel::predict(const Eigen::Ref<const Eigen::RowVectorXd>& q) const {
  return classes_[static_cast<std::size_t>(argmax(scores(q)))];
}

std::vector<int> SvmModel::predict_rows(const Eigen::MatrixXd& x) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) out.push_back(predict(x.row(r)));
  return out;
}

void SvmModel::save(std::ostream& out) const {
  write_ints(out, "classes", classes_);
  write_vec(out, "mean", scaler_.mean.transpose());
  write_vec(out, "scale", scaler_.scale.transpose());
  write_mat(out, "weights", w_);
  write_vec(out, "bias", b_);
}

SvmModel SvmModel::load(std::istream& in) {
  SvmModel m;
  m.classes_ = read_ints(in, "classes");
  std::string buf;
  {
    auto tok = read_tagged_line(in, buf, "mean", static_cast<std::size_t>(-1));
    Eigen::VectorXd mean(static_cast<Eigen::Index>(tok.size() - 1));
    for (std::size_t i = 1; i < tok.size(); ++i) mean[static_cast<Eigen::Index>(i - 1)] = parse_double(tok[i]);
    m.scaler_.mean = mean;
  }
  m.scaler_.scale = read_vec(in, "scale", m.scaler_.mean.size()).transpose();
  m.w_ = read_mat(in, "weights");
  m.b_ = read_vec(in, "bias", static_cast<Eigen::Index>(m.classes_.size()));
  if (m.w_.rows() != m.scaler_.mean.size() || m.w_.cols() != static_cast<Eigen::Index>(m.classes_.size()) ||
      m.classes_.size() < 2) {
    throw FormatError("inconsistent SVM record");
  }
  return m;
}

// ---------------------------------------------------------------- softmax head

SoftmaxHead SoftmaxHead::init(int dim, std::vector<int> classes, const SoftmaxConfig& cfg) {
  if (dim < 1 || cfg.hidden < 1 || classes.size() < 2) throw InvalidArgument("bad softmax head shape");
  SoftmaxHead h;
  h.classes_ = std::move(classes);
  h.slope_ = cfg.leaky_slope;
  std::mt19937_64 rng(cfg.seed);
  const auto fill = [&](Eigen::MatrixXd& w, Eigen::RowVectorXd& b, int fan_in, int fan_out) {
    const double bound = std::sqrt(1.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    w.resize(fan_in, fan_out);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
    }
    b.resize(fan_out);
    for (Eigen::Index c = 0; c < b.size(); ++c) b[c] = u(rng);
  };
  fill(h.w1_, h.b1_, dim, cfg.hidden);
  fill(h.w2_, h.b2_, cfg.hidden, static_cast<int>(h.classes_.size()));
  return h;
}

namespace {

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p = z.colwise() - z.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

}  // namespace

Eigen::MatrixXd SoftmaxHead::probabilities(const Eigen::MatrixXd& x) const {
  if (x.cols() != w1_.rows()) throw InvalidArgument("softmax head input has the wrong dimension");
  Eigen::MatrixXd h = x * w1_;
  h.rowwise() += b1_;
  h = (h.array() > 0.0).select(h, slope_ * h);
  Eigen::MatrixXd z = h * w2_;
  z.rowwise() += b2_;
  return row_softmax(z);
}

SoftmaxHead::Prediction SoftmaxHead::predict(const Eigen::Ref<const Eigen::RowVectorXd>& q) const {
  Prediction p;
  p.probabilities = probabilities(Eigen::MatrixXd(q)).row(0);
  p.label = classes_[static_cast<std::size_t>(argmax(p.probabilities))];
  return p;
}

std::vector<int> SoftmaxHead::predict_rows(const Eigen::MatrixXd& x) const {
  const auto p = probabilities(x);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) out.push_back(classes_[static_cast<std::size_t>(argmax(p.row(r)))]);
  return out;
}

double SoftmaxHead::loss(const Eigen::MatrixXd& x, const std::vector<int>& y_idx, Eigen::VectorXd* grad) const {
  if (x.cols() != w1_.rows()) throw InvalidArgument("softmax head input has the wrong dimension");
  if (static_cast<Eigen::Index>(y_idx.size()) != x.rows() || x.rows() == 0) throw InvalidArgument("bad batch");
  const double n = static_cast<double>(x.rows());
  Eigen::MatrixXd pre = x * w1_;
  pre.rowwise() += b1_;
  const Eigen::MatrixXd act = (pre.array() > 0.0).select(pre, slope_ * pre);
  Eigen::MatrixXd z = act * w2_;
  z.rowwise() += b2_;
  const Eigen::RowVectorXd zmax = z.rowwise().maxCoeff().transpose();
  double total = 0.0;
  Eigen::MatrixXd p = row_softmax(z);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double lse = zmax[r] + std::log((z.row(r).array() - zmax[r]).exp().sum());
    total += lse - z(r, y_idx[static_cast<std::size_t>(r)]);
  }
  if (grad != nullptr) {
    Eigen::MatrixXd dz = p;
    for (Eigen::Index r = 0; r < dz.rows(); ++r) dz(r, y_idx[static_cast<std::size_t>(r)]) -= 1.0;
    dz /= n;
    const Eigen::MatrixXd dw2 = act.transpose() * dz;
    const Eigen::RowVectorXd db2 = dz.colwise().sum();
    Eigen::MatrixXd dact = dz * w2_.transpose();
    const Eigen::MatrixXd dpre = (pre.array() > 0.0).select(dact, slope_ * dact);
    const Eigen::MatrixXd dw1 = x.transpose() * dpre;
    const Eigen::RowVectorXd db1 = dpre.colwise().sum();
    grad->resize(dw1.size() + db1.size() + dw2.size() + db2.size());
    Eigen::Index k = 0;
    grad->segment(k, dw1.size()) = Eigen::Map<const Eigen::VectorXd>(dw1.data(), dw1.size());
    k += dw1.size();
    grad->segment(k, db1.size()) = db1.transpose();
    k += db1.size();
    grad->segment(k, dw2.size()) = Eigen::Map<const Eigen::VectorXd>(dw2.data(), dw2.size());
    k += dw2.size();
    grad->segment(k, db2.size()) = db2.transpose();
  }
  return total / n;
}

Eigen::VectorXd SoftmaxHead::flat_parameters() const {
  Eigen::VectorXd p(w1_.size() + b1_.size() + w2_.size() + b2_.size());
  Eigen::Index k = 0;
  p.segment(k, w1_.size()) = Eigen::Map<const Eigen::VectorXd>(w1_.data(), w1_.size());
  k += w1_.size();
  p.segment(k, b1_.size()) = b1_.transpose();
  k += b1_.size();
  p.segment(k, w2_.size()) = Eigen::Map<const Eigen::VectorXd>(w2_.data(), w2_.size());
  k += w2_.size();
  p.segment(k, b2_.size()) = b2_.transpose();
  return p;
}

void SoftmaxHead::set_flat_parameters(const Eigen::VectorXd& p) {
  if (p.size() != w1_.size() + b1_.size() + w2_.size() + b2_.size()) {
    throw InvalidArgument("softmax parameter vector size mismatch");
  }
  Eigen::Index k = 0;
  Eigen::Map<Eigen::VectorXd>(w1_.data(), w1_.size()) = p.segment(k, w1_.size());
  k += w1_.size();
  b1_ = p.segment(k, b1_.size()).transpose();
  k += b1_.size();
  Eigen::Map<Eigen::VectorXd>(w2_.data(), w2_.size()) = p.segment(k, w2_.size());
  k += w2_.size();
  b2_ = p.segment(k, b2_.size()).transpose();
}

SoftmaxHead SoftmaxHead::fit(const Eigen::MatrixXd& x, const std::vector<int>& y, const SoftmaxConfig& cfg,
                             int expected_dim) {
  if (expected_dim > 0 && x.cols() != expected_dim) {
    throw InvalidArgument("softmax head expects " + std::to_string(expected_dim) + "-d inputs, got " +
                          std::to_string(x.cols()));
  }
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) throw InvalidArgument("label count does not match rows");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0)) throw InvalidArgument("bad softmax config");
  auto head = init(static_cast<int>(x.cols()), sorted_classes(y), cfg);
  std::vector<int> yi(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) yi[i] = class_index(head.classes_, y[i]);

  std::mt19937_64 rng(cfg.seed ^ 0x5f3759dfULL);
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  Eigen::MatrixXd xb;
  std::vector<int> yb;
  Eigen::VectorXd grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t len = std::min(bs, order.size() - start);
      xb.resize(static_cast<Eigen::Index>(len), x.cols());
      yb.resize(len);
      for (std::size_t r = 0; r < len; ++r) {
        xb.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(order[start + r]));
        yb[r] = yi[order[start + r]];
      }
      head.loss(xb, yb, &grad);
      head.set_flat_parameters(head.flat_parameters() - cfg.learning_rate * grad);
    }
  }
  return head;
}

void SoftmaxHead::save(std::ostream& out) const {
  write_ints(out, "classes", classes_);
  out << "leaky_slope " << format_double(slope_) << '\n';
  write_mat(out, "w1", w1_);
  write_vec(out, "b1", b1_);
  write_mat(out, "w2", w2_);
  write_vec(out, "b2", b2_);
}

SoftmaxHead SoftmaxHead::load(std::istream& in) {
  SoftmaxHead h;
  h.classes_ = read_ints(in, "classes");
  std::string buf;
  h.slope_ = parse_double(read_tagged_line(in, buf, "leaky_slope", 1)[1]);
  h.w1_ = read_mat(in, "w1");
  h.b1_ = read_vec(in, "b1", h.w1_.cols());
  h.w2_ = read_mat(in, "w2");
  h.b2_ = read_vec(in, "b2", h.w2_.cols());
  if (h.w2_.rows() != h.w1_.cols() || h.w2_.cols() != static_cast<Eigen::Index>(h.classes_.size())) {
    throw FormatError("inconsistent softmax record");
  }
  return h;
}

// ---------------------------------------------------------------- identification models

ClassifierConfig ClassifierConfig::from_config(const Config& cfg) {
  ClassifierConfig c;
  c.knn_k = static_cast<int>(cfg.get_int("knn.k", c.knn_k));
  const auto metric = cfg.get_string("knn.embedded_metric", "euclidean");
  if (metric == "euclidean") {
    c.embedded_knn_metric = KnnMetric::Euclidean;
  } else if (metric == "cosine") {
    c.embedded_knn_metric = KnnMetric::Cosine;
  } else {
    throw FormatError("knn.embedded_metric must be euclidean or cosine");
  }
  c.svm.c = cfg.get_double("svm.c", c.svm.c);
  c.svm.learning_rate = cfg.get_double("svm.learning_rate", c.svm.learning_rate);
  c.svm.epochs = static_cast<int>(cfg.get_int("svm.epochs", c.svm.epochs));
  c.svm.seed = static_cast<std::uint64_t>(cfg.get_int("svm.seed", static_cast<long long>(c.svm.seed)));
  c.softmax.hidden = static_cast<int>(cfg.get_int("softmax.hidden", c.softmax.hidden));
  c.softmax.learning_rate = cfg.get_double("softmax.learning_rate", c.softmax.learning_rate);
  c.softmax.epochs = static_cast<int>(cfg.get_int("softmax.epochs", c.softmax.epochs));
  c.softmax.batch_size = static_cast<int>(cfg.get_int("softmax.batch_size", c.softmax.batch_size));
  c.softmax.seed = static_cast<std::uint64_t>(cfg.get_int("softmax.seed", static_cast<long long>(c.softmax.seed)));
  c.standardize_features = cfg.get_bool("features.normalize", c.standardize_features);
  return c;
}

IdentModel::IdentModel(ModelVariant variant, std::shared_ptr<const EmbedNet> embed, Standardizer scaler, Head head)
    : variant_(variant), embed_(std::move(embed)), scaler_(std::move(scaler)), head_(std::move(head)) {
  if (variant_.uses_embedding && !embed_) throw InvalidVariant(variant_.name() + " needs an embedding network");
  if (!variant_.uses_embedding && embed_) throw InvalidVariant(variant_.name() + " does not use an embedding");
  if (variant_.head == HeadKind::Nn && !variant_.uses_embedding) {
    throw InvalidVariant("a softmax head requires the embedding network");
  }
  if (embed_) embed_hash_ = embed_->content_hash();
}

std::vector<int> IdentModel::classes() const {
  if (const auto* knn = std::get_if<KnnModel>(&head_)) return sorted_classes(knn->labels());
  if (const auto* svm = std::get_if<SvmModel>(&head_)) return svm->classes();
  return std::get<SoftmaxHead>(head_).classes();
}

Eigen::MatrixXd IdentModel::head_inputs(const Eigen::MatrixXd& adr) const {
  Eigen::MatrixXd x = scaler_.apply(adr);
  if (embed_) x = embed_rows(*embed_, x);
  return x;
}

std::vector<int> IdentModel::predict_rows(const Eigen::MatrixXd& adr) const {
  if (adr.rows() == 0) return {};
  const auto x = head_inputs(adr);
  return std::visit([&](const auto& h) { return h.predict_rows(x); }, head_);
}

IdentifyResult IdentModel::identify(const Eigen::MatrixXd& adr) const {
  if (adr.rows() < 1) throw InvalidArgument("identification needs at least one feature row");
  IdentifyResult r;
  r.per_frame = predict_rows(adr);
  for (int l : r.per_frame) ++r.votes[l];
  r.label = majority_vote(r.per_frame);
  return r;
}

IdentifyResult identify(const IdentModel& model, const Eigen::MatrixXd& features) { return model.identify(features); }

IdentModel build_variant(const ModelVariant& variant, const FeatureMatrix& train,
                         std::shared_ptr<const EmbedNet> embed, const ClassifierConfig& cfg, bool online) {
  if (variant.head == HeadKind::Nn && !variant.uses_embedding) {
    throw InvalidVariant("a softmax head requires the embedding network");
  }
  if (online && !variant.online_trainable()) {
    throw InvalidVariant(variant.name() + " is not trained online");
  }
  if (variant.uses_embedding && !embed) throw InvalidVariant(variant.name() + " needs a pre-trained embedding");
  if (!variant.uses_embedding) embed.reset();
  if (!train.has_labels()) throw InvalidArgument("classifier training needs labelled rows");
  if (train.cols() != static_cast<Eigen::Index>(kNumAdr)) throw InvalidArgument("classifiers take 45-d ADR rows");

  Standardizer scaler;
  if (cfg.standardize_features && !variant.uses_embedding) scaler = Standardizer::fit(train.values);
  Eigen::MatrixXd x = scaler.apply(train.values);
  if (embed) x = embed_rows(*embed, x);

  switch (variant.head) {
    case HeadKind::Knn: {
      const auto metric = variant.uses_embedding ? cfg.embedded_knn_metric : KnnMetric::Euclidean;
      return IdentModel(variant, embed, scaler, KnnModel::fit(x, train.labels, cfg.knn_k, metric));
    }
    case HeadKind::Svm:
      return IdentModel(variant, embed, scaler, SvmModel::fit(x, train.labels, cfg.svm));
    case HeadKind::Nn:
      return IdentModel(variant, embed, scaler, SoftmaxHead::fit(x, train.labels, cfg.softmax, embed->output_dim()));
  }
  throw InvalidVariant("unhandled head");
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void IdentModel::save(std::ostream& out) const {
  out << "diverid-bundle 1\n";
  out << "variant " << variant_.name() << '\n';
  out << "embed_hash " << (embed_ ? hash_hex(embed_hash_) : std::string("none")) << '\n';
  out << "scaler " << (scaler_.empty() ? 0 : 1) << '\n';
  if (!scaler_.empty()) {
    write_vec(out, "mean", scaler_.mean.transpose());
    write_vec(out, "scale", scaler_.scale.transpose());
  }
  std::visit(
      [&](const auto& h) {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, KnnModel>) out << "head knn\n";
        if constexpr (std::is_same_v<T, SvmModel>) out << "head svm\n";
        if constexpr (std::is_same_v<T, SoftmaxHead>) out << "head nn\n";
        h.save(out);
      },
      head_);
  out << "end\n";
}

void save_bundle(const std::filesystem::path& path, const IdentModel& model) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  model.save(out);
}

IdentModel load_bundle(std::istream& in, const std::vector<std::shared_ptr<const EmbedNet>>& nets) {
  std::string buf;
  if (!std::getline(in, buf) || buf != "diverid-bundle 1") throw FormatError("not a model bundle (v1)");
  ModelVariant variant;
  try {
    variant = ModelVariant::parse(read_word(in, "variant"));
  } catch (const InvalidVariant& e) {
    throw FormatError(e.what());
  }
  const auto hash = read_word(in, "embed_hash");
  std::shared_ptr<const EmbedNet> embed;
  if (hash != "none") {
    for (const auto& n : nets) {
      if (n && hash_hex(n->content_hash()) == hash) embed = n;
    }
    if (!embed) throw FormatError("bundle " + variant.name() + " references embedding " + hash + ", not supplied");
  }
  const auto use_scaler = parse_int(read_tagged_line(in, buf, "scaler", 1)[1]);
  Standardizer scaler;
  if (use_scaler == 1) {
    scaler.mean = read_vec(in, "mean", static_cast<Eigen::Index>(kNumAdr)).transpose();
    scaler.scale = read_vec(in, "scale", static_cast<Eigen::Index>(kNumAdr)).transpose();
  }
  const auto head = read_word(in, "head");
  IdentModel::Head h = [&]() -> IdentModel::Head {
    if (head == "knn") return KnnModel::load(in);
    if (head == "svm") return SvmModel::load(in);
    if (head == "nn") return SoftmaxHead::load(in);
    throw FormatError("unknown head '" + head + "'");
  }();
  const bool head_matches = (variant.head == HeadKind::Knn && head == "knn") ||
                            (variant.head == HeadKind::Svm && head == "svm") ||
                            (variant.head == HeadKind::Nn && head == "nn");
  if (!head_matches) throw FormatError("bundle head does not match variant " + variant.name());
  if (!std::getline(in, buf) || buf != "end") throw FormatError("bundle missing 'end'");
  try {
    return IdentModel(variant, embed, std::move(scaler), std::move(h));
  } catch (const InvalidVariant& e) {
    throw FormatError(e.what());
  }
}

IdentModel load_bundle(const std::filesystem::path& path, const std::vector<std::shared_ptr<const EmbedNet>>& nets) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  return load_bundle(in, nets);
}

}  // namespace diverid
