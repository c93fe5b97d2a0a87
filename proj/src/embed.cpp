#include "diverid/embed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "diverid/text_io.hpp"

namespace diverid {

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("train.epochs must be >= 0");
  if (batch_size < 2) throw InvalidArgument("train.batch_size must be >= 2");
  if (!(learning_rate > 0)) throw InvalidArgument("train.learning_rate must be positive");
  if (!(margin >= 0)) throw InvalidArgument("train.margin must be >= 0");
  if (!(bn_momentum > 0 && bn_momentum <= 1)) throw InvalidArgument("train.bn_momentum must lie in (0, 1]");
  if (plateau_epoch < 0) throw InvalidArgument("train.plateau_epoch must be >= 0");
  if (plateau_epoch > 0 && (plateau_window < 1 || 2 * plateau_window > plateau_epoch)) {
    throw InvalidArgument("train.plateau_window must fit twice into train.plateau_epoch");
  }
  if (!(plateau_tolerance >= 0)) throw InvalidArgument("train.plateau_tolerance must be >= 0");
}

TrainConfig TrainConfig::from_config(const Config& cfg) {
  TrainConfig t;
  t.epochs = static_cast<int>(cfg.get_int("train.epochs", t.epochs));
  t.batch_size = static_cast<int>(cfg.get_int("train.batch_size", t.batch_size));
  t.learning_rate = cfg.get_double("train.learning_rate", t.learning_rate);
  t.margin = cfg.get_double("train.margin", t.margin);
  t.bn_momentum = cfg.get_double("train.bn_momentum", t.bn_momentum);
  t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", static_cast<long long>(t.seed)));
  t.semi_hard = cfg.get_bool("train.semi_hard", t.semi_hard);
  t.plateau_epoch = static_cast<int>(cfg.get_int("train.plateau_epoch", t.plateau_epoch));
  t.plateau_window = static_cast<int>(cfg.get_int("train.plateau_window", t.plateau_window));
  t.plateau_tolerance = cfg.get_double("train.plateau_tolerance", t.plateau_tolerance);
  t.validate();
  return t;
}

Eigen::VectorXd EmbedGradients::flat() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weight.size(); ++l) n += weight[l].size() + bias[l].size();
  for (std::size_t l = 0; l < bn_gain.size(); ++l) n += bn_gain[l].size() + bn_bias[l].size();
  Eigen::VectorXd out(n);
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weight.size(); ++l) {
    out.segment(k, weight[l].size()) = Eigen::Map<const Eigen::VectorXd>(weight[l].data(), weight[l].size());
    k += weight[l].size();
    out.segment(k, bias[l].size()) = bias[l].transpose();
    k += bias[l].size();
    if (l < bn_gain.size()) {
      out.segment(k, bn_gain[l].size()) = bn_gain[l].transpose();
      k += bn_gain[l].size();
      out.segment(k, bn_bias[l].size()) = bn_bias[l].transpose();
      k += bn_bias[l].size();
    }
  }
  return out;
}

const std::vector<int>& EmbedNet::default_widths() {
  static const std::vector<int> w = {45, 1024, 512, 256, 16};
  return w;
}

EmbedNet::EmbedNet(std::vector<int> widths, std::uint64_t seed, double leaky_slope, double bn_eps)
    : widths_(std::move(widths)), seed_(seed), leaky_slope_(leaky_slope), bn_eps_(bn_eps) {
  if (widths_.size() < 2) throw InvalidArgument("embedding net needs at least an input and an output width");
  for (int w : widths_) {
    if (w < 1) throw InvalidArgument("layer widths must be positive");
  }
  if (!(bn_eps_ > 0)) throw InvalidArgument("bn epsilon must be positive");
  std::mt19937_64 rng(seed_);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int fan_in = widths_[l];
    const int fan_out = widths_[l + 1];
    const double bound = std::sqrt(1.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer d;
    d.weight.resize(fan_in, fan_out);
    for (Eigen::Index c = 0; c < d.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < d.weight.rows(); ++r) d.weight(r, c) = u(rng);
    }
    d.bias.resize(fan_out);
    for (Eigen::Index c = 0; c < d.bias.size(); ++c) d.bias[c] = u(rng);
    dense_.push_back(std::move(d));
    if (l + 2 < widths_.size()) {
      BatchNorm bn;
      bn.gain = Eigen::RowVectorXd::Ones(fan_out);
      bn.bias = Eigen::RowVectorXd::Zero(fan_out);
      bn.running_mean = Eigen::RowVectorXd::Zero(fan_out);
      bn.running_var = Eigen::RowVectorXd::Ones(fan_out);
      norms_.push_back(std::move(bn));
    }
  }
}

void EmbedNet::check_input(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim()) throw InvalidArgument("embedding input has the wrong width");
  if (x.rows() < 1) throw InvalidArgument("embedding input is empty");
  if (!x.allFinite()) throw InvalidArgument("embedding input must be finite");
}

Eigen::MatrixXd EmbedNet::activate(const Eigen::MatrixXd& z) const {
  return (z.array() > 0.0).select(z, leaky_slope_ * z);
}

Eigen::MatrixXd EmbedNet::forward_eval(const Eigen::MatrixXd& x) const {
  check_input(x);
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < dense_.size(); ++l) {
    Eigen::MatrixXd z = h * dense_[l].weight;
    z.rowwise() += dense_[l].bias;
    if (l < norms_.size()) {
      const auto& bn = norms_[l];
      const Eigen::RowVectorXd inv = (bn.running_var.array() + bn_eps_).rsqrt();
      Eigen::MatrixXd a = activate(z);
      a.rowwise() -= bn.running_mean;
      a = a.array().rowwise() * (inv.array() * bn.gain.array());
      a.rowwise() += bn.bias;
      h = std::move(a);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

ForwardCache EmbedNet::forward_train(const Eigen::MatrixXd& x) const {
  check_input(x);
  if (x.rows() < 2) throw InvalidArgument("train-mode forward needs at least two rows");
  const Eigen::Index rows = x.rows();
  const double n = static_cast<double>(rows);
  const double slope = leaky_slope_;
  ForwardCache c;
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < dense_.size(); ++l) {
    Eigen::MatrixXd z(rows, dense_[l].weight.cols());
    z.noalias() = h * dense_[l].weight;
    z.rowwise() += dense_[l].bias;
    c.inputs.push_back(std::move(h));
    if (l >= norms_.size()) {
      h = std::move(z);
      continue;
    }
    // Activation and batch normalization, fused one column at a time.
    const auto& bn = norms_[l];
    const Eigen::Index width = z.cols();
    Eigen::MatrixXd xhat(rows, width);
    Eigen::MatrixXd y(rows, width);
    Eigen::RowVectorXd mean(width);
    Eigen::RowVectorXd var(width);
    Eigen::RowVectorXd inv(width);
    for (Eigen::Index j = 0; j < width; ++j) {
      auto zc = z.col(j).array();
      auto xc = xhat.col(j).array();
      xc = zc.max(0.0) + slope * zc.min(0.0);
      const double m = xc.sum() / n;
      xc -= m;
      const double v = xc.square().sum() / n;
      const double is = 1.0 / std::sqrt(v + bn_eps_);
      xc *= is;
      y.col(j).array() = xc * bn.gain[j] + bn.bias[j];
      mean[j] = m;
      var[j] = v;
      inv[j] = is;
    }
    c.pre.push_back(std::move(z));
    c.xhat.push_back(std::move(xhat));
    c.batch_mean.push_back(std::move(mean));
    c.batch_var.push_back(std::move(var));
    c.inv_std.push_back(std::move(inv));
    h = std::move(y);
  }
  c.output = std::move(h);
  return c;
}

EmbedGradients EmbedNet::backward(const ForwardCache& c, const Eigen::MatrixXd& d_output) const {
  const std::size_t n_dense = dense_.size();
  const Eigen::Index rows = d_output.rows();
  const double n = static_cast<double>(rows);
  const double slope = leaky_slope_;
  EmbedGradients g;
  g.weight.resize(n_dense);
  g.bias.resize(n_dense);
  g.bn_gain.resize(norms_.size());
  g.bn_bias.resize(norms_.size());

  Eigen::MatrixXd d = d_output;  // gradient w.r.t. the output of layer l
  for (std::size_t li = n_dense; li-- > 0;) {
    Eigen::MatrixXd dz;
    if (li < norms_.size()) {
      const auto& xhat = c.xhat[li];
      const auto& pre = c.pre[li];
      const Eigen::Index width = d.cols();
      dz.resize(rows, width);
      g.bn_gain[li].resize(width);
      g.bn_bias[li].resize(width);
      for (Eigen::Index j = 0; j < width; ++j) {
        const auto dc = d.col(j).array();
        const auto xc = xhat.col(j).array();
        const double sum_d = dc.sum();
        const double sum_dx = (dc * xc).sum();
        g.bn_gain[li][j] = sum_dx;
        g.bn_bias[li][j] = sum_d;
        // dA = inv_std / N * (N dxhat - sum(dxhat) - xhat * sum(dxhat . xhat)), dxhat = gain * d
        const double gain = norms_[li].gain[j];
        const double scale = gain * c.inv_std[li][j] / n;
        auto out = dz.col(j).array();
        out = scale * (n * dc - sum_d - xc * sum_dx);
        out *= slope + (1.0 - slope) * (pre.col(j).array() > 0.0).cast<double>();
      }
    } else {
      dz = std::move(d);
    }
    g.weight[li].noalias() = c.inputs[li].transpose() * dz;
    g.bias[li] = dz.colwise().sum();
    if (li > 0) {
      d.resize(rows, dense_[li].weight.rows());
      d.noalias() = dz * dense_[li].weight.transpose();
    }
  }
  return g;
}

void EmbedNet::update_running_stats(const ForwardCache& c, double momentum) {
  const double n = static_cast<double>(c.output.rows());
  const double unbias = n > 1 ? n / (n - 1) : 1.0;
  for (std::size_t l = 0; l < norms_.size(); ++l) {
    auto& bn = norms_[l];
    bn.running_mean = (1.0 - momentum) * bn.running_mean + momentum * c.batch_mean[l];
    bn.running_var = (1.0 - momentum) * bn.running_var + (momentum * unbias) * c.batch_var[l];
  }
}

void EmbedNet::sgd_step(const EmbedGradients& g, double lr) {
  for (std::size_t l = 0; l < dense_.size(); ++l) {
    dense_[l].weight -= lr * g.weight[l];
    dense_[l].bias -= lr * g.bias[l];
  }
  for (std::size_t l = 0; l < norms_.size(); ++l) {
    norms_[l].gain -= lr * g.bn_gain[l];
    norms_[l].bias -= lr * g.bn_bias[l];
  }
}

Eigen::MatrixXd EmbedNet::forward(const Eigen::MatrixXd& x, Mode mode, double bn_momentum) {
  if (mode == Mode::Eval) return forward_eval(x);
  auto cache = forward_train(x);
  update_running_stats(cache, bn_momentum);
  return std::move(cache.output);
}

std::size_t EmbedNet::num_parameters() const {
  std::size_t n = 0;
  for (const auto& d : dense_) n += static_cast<std::size_t>(d.weight.size() + d.bias.size());
  for (const auto& b : norms_) n += static_cast<std::size_t>(b.gain.size() + b.bias.size());
  return n;
}

Eigen::VectorXd EmbedNet::flat_parameters() const {
  EmbedGradients view;
  for (const auto& d : dense_) {
    view.weight.push_back(d.weight);
    view.bias.push_back(d.bias);
  }
  for (const auto& b : norms_) {
    view.bn_gain.push_back(b.gain);
    view.bn_bias.push_back(b.bias);
  }
  return view.flat();
}

void EmbedNet::set_flat_parameters(const Eigen::VectorXd& p) {
  if (static_cast<std::size_t>(p.size()) != num_parameters()) throw InvalidArgument("parameter vector size mismatch");
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < dense_.size(); ++l) {
    auto& w = dense_[l].weight;
    Eigen::Map<Eigen::VectorXd>(w.data(), w.size()) = p.segment(k, w.size());
    k += w.size();
    dense_[l].bias = p.segment(k, dense_[l].bias.size()).transpose();
    k += dense_[l].bias.size();
    if (l < norms_.size()) {
      norms_[l].gain = p.segment(k, norms_[l].gain.size()).transpose();
      k += norms_[l].gain.size();
      norms_[l].bias = p.segment(k, norms_[l].bias.size()).transpose();
      k += norms_[l].bias.size();
    }
  }
}

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  void real(double d) { bytes(std::bit_cast<std::uint64_t>(d)); }
  template <typename M>
  void all(const M& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) real(m.data()[i]);
  }
};

void write_row(std::ostream& out, const char* tag, const Eigen::RowVectorXd& v) {
  write_tagged_row(out, tag, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

std::vector<std::string_view> expect_line(std::istream& in, std::string& buf, std::string_view tag,
                                          std::size_t n_values) {
  return read_tagged_line(in, buf, tag, n_values);
}

Eigen::RowVectorXd read_row(std::istream& in, std::string&, std::string_view tag, int n) {
  const auto v = read_tagged_row(in, tag, static_cast<std::size_t>(n));
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), n);
}

}  // namespace

std::uint64_t EmbedNet::content_hash() const {
  Fnv1a f;
  for (int w : widths_) f.bytes(static_cast<std::uint64_t>(w));
  f.real(leaky_slope_);
  f.real(bn_eps_);
  for (const auto& d : dense_) {
    f.all(d.weight);
    f.all(d.bias);
  }
  for (const auto& b : norms_) {
    f.all(b.gain);
    f.all(b.bias);
    f.all(b.running_mean);
    f.all(b.running_var);
  }
  return f.h;
}

bool EmbedNet::operator==(const EmbedNet& o) const {
  if (widths_ != o.widths_ || leaky_slope_ != o.leaky_slope_ || bn_eps_ != o.bn_eps_) return false;
  for (std::size_t l = 0; l < dense_.size(); ++l) {
    if (!(dense_[l].weight.array() == o.dense_[l].weight.array()).all()) return false;
    if (!(dense_[l].bias.array() == o.dense_[l].bias.array()).all()) return false;
  }
  for (std::size_t l = 0; l < norms_.size(); ++l) {
    const auto& a = norms_[l];
    const auto& b = o.norms_[l];
    if (!(a.gain.array() == b.gain.array()).all() || !(a.bias.array() == b.bias.array()).all() ||
        !(a.running_mean.array() == b.running_mean.array()).all() ||
        !(a.running_var.array() == b.running_var.array()).all()) {
      return false;
    }
  }
  return true;
}

// Layout (text, one record per line):
//   diverid-embed-net 1
//   widths <n> w_0 ... w_{n-1}
//   leaky_slope <v>
//   bn_eps <v>
//   seed <v>
//   per dense layer l:  dense l <in> <out>, then <in> lines "w ..." of <out> values, "bias ..."
//   per hidden layer l: bn l <width>, "gain ...", "beta ...", "running_mean ...", "running_var ..."
//   end
void EmbedNet::save(std::ostream& out) const {
  out << "diverid-embed-net 1\n";
  out << "widths " << widths_.size();
  for (int w : widths_) out << ' ' << w;
  out << '\n';
  out << "leaky_slope " << format_double(leaky_slope_) << '\n';
  out << "bn_eps " << format_double(bn_eps_) << '\n';
  out << "seed " << seed_ << '\n';
  for (std::size_t l = 0; l < dense_.size(); ++l) {
    const auto& d = dense_[l];
    out << "dense " << l << ' ' << d.weight.rows() << ' ' << d.weight.cols() << '\n';
    for (Eigen::Index r = 0; r < d.weight.rows(); ++r) write_row(out, "w", d.weight.row(r));
    write_row(out, "bias", d.bias);
    if (l < norms_.size()) {
      const auto& b = norms_[l];
      out << "bn " << l << ' ' << b.gain.size() << '\n';
      write_row(out, "gain", b.gain);
      write_row(out, "beta", b.bias);
      write_row(out, "running_mean", b.running_mean);
      write_row(out, "running_var", b.running_var);
    }
  }
  out << "end\n";
}

EmbedNet EmbedNet::load(std::istream& in) {
  std::string buf;
  if (!std::getline(in, buf) || buf != "diverid-embed-net 1") throw FormatError("not an embedding model file (v1)");
  EmbedNet net{Empty{}};
  auto tok = expect_line(in, buf, "widths", static_cast<std::size_t>(-1));
  if (tok.size() < 2) throw FormatError("model file: empty widths");
  const auto n_w = static_cast<std::size_t>(parse_int(tok[1]));
  if (n_w < 2 || tok.size() != n_w + 2) throw FormatError("model file: malformed widths");
  for (std::size_t i = 0; i < n_w; ++i) net.widths_.push_back(static_cast<int>(parse_int(tok[i + 2])));
  net.leaky_slope_ = parse_double(expect_line(in, buf, "leaky_slope", 1)[1]);
  net.bn_eps_ = parse_double(expect_line(in, buf, "bn_eps", 1)[1]);
  net.seed_ = static_cast<std::uint64_t>(parse_int(expect_line(in, buf, "seed", 1)[1]));
  for (std::size_t l = 0; l + 1 < n_w; ++l) {
    tok = expect_line(in, buf, "dense", 3);
    const int fan_in = static_cast<int>(parse_int(tok[2]));
    const int fan_out = static_cast<int>(parse_int(tok[3]));
    if (static_cast<std::size_t>(parse_int(tok[1])) != l || fan_in != net.widths_[l] ||
        fan_out != net.widths_[l + 1]) {
      throw FormatError("model file: dense layer " + std::to_string(l) + " does not match the declared widths");
    }
    DenseLayer d;
    d.weight.resize(fan_in, fan_out);
    for (int r = 0; r < fan_in; ++r) d.weight.row(r) = read_row(in, buf, "w", fan_out);
    d.bias = read_row(in, buf, "bias", fan_out);
    net.dense_.push_back(std::move(d));
    if (l + 2 < n_w) {
      tok = expect_line(in, buf, "bn", 2);
      if (static_cast<std::size_t>(parse_int(tok[1])) != l || parse_int(tok[2]) != fan_out) {
        throw FormatError("model file: batch-norm block " + std::to_string(l) + " does not match the widths");
      }
      BatchNorm b;
      b.gain = read_row(in, buf, "gain", fan_out);
      b.bias = read_row(in, buf, "beta", fan_out);
      b.running_mean = read_row(in, buf, "running_mean", fan_out);
      b.running_var = read_row(in, buf, "running_var", fan_out);
      if (!(b.running_var.array() > 0.0).all()) throw FormatError("model file: running variance must be positive");
      net.norms_.push_back(std::move(b));
    }
  }
  if (!std::getline(in, buf) || buf != "end") throw FormatError("model file: missing 'end'");
  return net;
}

void save_embed_net(const std::filesystem::path& path, const EmbedNet& net) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  net.save(out);
}

EmbedNet load_embed_net(const std::filesystem::path& path, const std::vector<int>& expected_widths) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  auto net = EmbedNet::load(in);
  if (!expected_widths.empty() && net.widths() != expected_widths) {
    throw FormatError("model file " + path.string() + " has an unexpected architecture");
  }
  return net;
}

double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (u.size() != v.size()) throw InvalidArgument("cosine distance of vectors with different sizes");
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) throw DegenerateEmbeddingError("cosine distance of a zero-norm vector");
  const double c = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
  return 1.0 - c;
}

double triplet_loss(double d_ap, double d_an, double margin) { return std::max(0.0, d_ap - d_an + margin); }

TripletBatch TripletBatch::gather(const FeatureMatrix& data, const std::vector<Triplet>& triplets) {
  if (!data.has_labels()) throw InvalidArgument("triplet batches need labelled data");
  TripletBatch b;
  const auto n = static_cast<Eigen::Index>(triplets.size());
  b.anchors.resize(n, data.cols());
  b.positives.resize(n, data.cols());
  b.negatives.resize(n, data.cols());
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& tr = triplets[static_cast<std::size_t>(t)];
    const int la = data.labels.at(static_cast<std::size_t>(tr.anchor));
    if (data.labels.at(static_cast<std::size_t>(tr.positive)) != la ||
        data.labels.at(static_cast<std::size_t>(tr.negative)) == la) {
      throw InvalidArgument("triplet " + std::to_string(t) + " violates the anchor/positive/negative labels");
    }
    b.anchors.row(t) = data.values.row(tr.anchor);
    b.positives.row(t) = data.values.row(tr.positive);
    b.negatives.row(t) = data.values.row(tr.negative);
  }
  return b;
}

namespace {

// Gradient of 1 - cos(u, v) with respect to u.
Eigen::RowVectorXd d_cosdist_du(const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& v, double nu, double nv,
                                double cos_uv) {
  return -(v / (nu * nv) - (cos_uv / (nu * nu)) * u);
}

}  // namespace

TripletLossResult triplet_batch_loss(const Eigen::MatrixXd& emb, const std::vector<Triplet>& triplets,
                                     double margin) {
  TripletLossResult r;
  r.d_embeddings = Eigen::MatrixXd::Zero(emb.rows(), emb.cols());
  if (triplets.empty()) return r;
  const double inv_t = 1.0 / static_cast<double>(triplets.size());
  double total = 0.0;
  for (const auto& t : triplets) {
    const Eigen::RowVectorXd a = emb.row(t.anchor);
    const Eigen::RowVectorXd p = emb.row(t.positive);
    const Eigen::RowVectorXd q = emb.row(t.negative);
    const double na = a.norm(), np = p.norm(), nq = q.norm();
    if (!(na > 0) || !(np > 0) || !(nq > 0)) throw DegenerateEmbeddingError("zero-norm embedding in triplet");
    const double cap = a.dot(p) / (na * np);
    const double caq = a.dot(q) / (na * nq);
    const double hinge = (1.0 - cap) - (1.0 - caq) + margin;
    if (hinge <= 0.0) continue;
    total += hinge;
    ++r.active;
    // d/da [d(a,p) - d(a,q)], d/dp d(a,p), -d/dq d(a,q)
    r.d_embeddings.row(t.anchor) += inv_t * (d_cosdist_du(a, p, na, np, cap) - d_cosdist_du(a, q, na, nq, caq));
    r.d_embeddings.row(t.positive) += inv_t * d_cosdist_du(p, a, np, na, cap);
    r.d_embeddings.row(t.negative) -= inv_t * d_cosdist_du(q, a, nq, na, caq);
  }
  r.loss = total * inv_t;
  return r;
}

std::vector<Triplet> mine_triplets(const std::vector<int>& labels, std::mt19937_64& rng, bool semi_hard,
                                   const Eigen::MatrixXd* embeddings, double margin) {
  const auto n = labels.size();
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < n; ++i) by_label[labels[i]].push_back(i);
  std::vector<Triplet> out;
  if (by_label.size() < 2) return out;
  std::vector<double> dist_row;
  std::vector<std::size_t> band;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& same = by_label[labels[i]];
    if (same.size() < 2) continue;
    std::uniform_int_distribution<std::size_t> pick_pos(0, same.size() - 2);
    std::size_t p = same[pick_pos(rng)];
    if (p == i) p = same.back();  // `same` holds i once; remap it to the tail entry
    std::uniform_int_distribution<std::size_t> pick_any(0, n - 1);
    std::size_t q = pick_any(rng);
    while (labels[q] == labels[i]) q = pick_any(rng);
    if (semi_hard && embeddings != nullptr) {
      const auto a = static_cast<Eigen::Index>(i);
      const double d_ap = cosine_distance(embeddings->row(a).transpose(),
                                          embeddings->row(static_cast<Eigen::Index>(p)).transpose());
      band.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (labels[j] == labels[i]) continue;
        const double d_an = cosine_distance(embeddings->row(a).transpose(),
                                            embeddings->row(static_cast<Eigen::Index>(j)).transpose());
        if (d_an > d_ap && d_an < d_ap + margin) band.push_back(j);
      }
      if (!band.empty()) {
        std::uniform_int_distribution<std::size_t> pick_band(0, band.size() - 1);
        q = band[pick_band(rng)];
      }
    }
    out.push_back({static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)});
  }
  return out;
}

BatchEvaluation evaluate_batch(const EmbedNet& net, const Eigen::MatrixXd& x, const std::vector<Triplet>& triplets,
                               double margin) {
  BatchEvaluation ev;
  ev.cache = net.forward_train(x);
  auto loss = triplet_batch_loss(ev.cache.output, triplets, margin);
  ev.loss = loss.loss;
  ev.grads = net.backward(ev.cache, loss.d_embeddings);
  return ev;
}

TrainResult train_embedding(EmbedNet net, const FeatureMatrix& data, const TrainConfig& cfg,
                            const EpochCallback& on_epoch) {
  cfg.validate();
  if (!data.has_labels()) throw InvalidArgument("embedding training needs labelled data");
  if (data.cols() != net.input_dim()) throw InvalidArgument("training data width does not match the network input");
  std::map<int, int> counts;
  for (int l : data.labels) ++counts[l];
  if (counts.size() < 2) throw InvalidArgument("embedding training needs at least two classes");
  for (const auto& [label, c] : counts) {
    if (c < 2) throw InvalidArgument("class " + std::to_string(label) + " has fewer than two samples");
  }

  TrainResult result{std::move(net), {}};
  auto& model = result.net;
  std::mt19937_64 rng(cfg.seed);
  const auto n = static_cast<std::size_t>(data.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  Eigen::MatrixXd xb;
  std::vector<int> lb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int used = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      lb.assign(len, 0);
      xb.resize(static_cast<Eigen::Index>(len), data.cols());
      for (std::size_t r = 0; r < len; ++r) {
        xb.row(static_cast<Eigen::Index>(r)) = data.values.row(static_cast<Eigen::Index>(order[start + r]));
        lb[r] = data.labels[order[start + r]];
      }
      if (len < 2 || std::all_of(lb.begin(), lb.end(), [&](int l) { return l == lb.front(); })) {
        ++result.history.skipped_batches;
        continue;
      }
      auto cache = model.forward_train(xb);
      const auto triplets = mine_triplets(lb, rng, cfg.semi_hard, &cache.output, cfg.margin);
      if (triplets.empty()) {
        ++result.history.skipped_batches;
        continue;
      }
      const auto loss = triplet_batch_loss(cache.output, triplets, cfg.margin);
      const auto grads = model.backward(cache, loss.d_embeddings);
      model.update_running_stats(cache, cfg.bn_momentum);
      model.sgd_step(grads, cfg.learning_rate);
      loss_sum += loss.loss;
      ++used;
    }
    if (used == 0) throw TrainingDegenerateError("epoch " + std::to_string(epoch) + " had no usable batch");
    const double mean = loss_sum / used;
    result.history.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
    if (cfg.plateau_epoch > 0 && epoch + 1 == cfg.plateau_epoch && epoch + 1 < cfg.epochs) {
      const auto p = check_plateau(result.history.epoch_loss, cfg.plateau_window, cfg.plateau_tolerance * cfg.margin);
      std::ostringstream note;
      note << "plateau check at epoch " << cfg.plateau_epoch << ": mean loss of epochs "
           << cfg.plateau_epoch - 2 * cfg.plateau_window + 1 << "-" << cfg.plateau_epoch - cfg.plateau_window << " = "
           << format_double(p.previous_mean) << ", of epochs " << cfg.plateau_epoch - cfg.plateau_window + 1 << "-"
           << cfg.plateau_epoch << " = " << format_double(p.last_mean) << ", |change| "
           << (p.plateaued ? "< " : ">= ") << format_double(p.tolerance) << " -> "
           << (p.plateaued ? "plateaued, stopping" : "not plateaued, continuing to " + std::to_string(cfg.epochs));
      result.history.plateau_note = note.str();
      if (p.plateaued) {
        result.history.stopped_on_plateau = true;
        break;
      }
    }
  }
  return result;
}

PlateauCheck check_plateau(const std::vector<double>& epoch_loss, int window, double tolerance) {
  if (window < 1 || epoch_loss.size() < 2 * static_cast<std::size_t>(window)) {
    throw InvalidArgument("plateau check needs two full windows of epochs");
  }
  const auto w = static_cast<std::size_t>(window);
  const auto end = epoch_loss.end();
  PlateauCheck p;
  p.previous_mean = std::accumulate(end - 2 * static_cast<std::ptrdiff_t>(w), end - static_cast<std::ptrdiff_t>(w), 0.0) / window;
  p.last_mean = std::accumulate(end - static_cast<std::ptrdiff_t>(w), end, 0.0) / window;
  p.tolerance = tolerance;
  p.plateaued = std::abs(p.previous_mean - p.last_mean) < tolerance;
  return p;
}

Eigen::MatrixXd embed_rows(const EmbedNet& net, const Eigen::MatrixXd& x) {
  if (x.rows() == 0) return Eigen::MatrixXd(0, net.output_dim());
  return net.forward_eval(x);
}

}  // namespace diverid
