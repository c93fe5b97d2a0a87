#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "diverid/classify.hpp"
#include "diverid/metrics.hpp"
#include "helpers.hpp"

using namespace diverid;

namespace {

// Exhaustive scan: sort every stored row by (distance, index), vote over the
// first k, break vote ties toward the lowest label.
int knn_oracle(const Eigen::MatrixXd& pts, const std::vector<int>& y, const Eigen::RowVectorXd& q, int k) {
  std::vector<std::pair<double, Eigen::Index>> d;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    double s = 0;
    for (Eigen::Index c = 0; c < pts.cols(); ++c) s += (pts(i, c) - q(c)) * (pts(i, c) - q(c));
    d.push_back({std::sqrt(s), i});
  }
  std::sort(d.begin(), d.end());
  std::map<int, int> votes;
  for (int i = 0; i < k; ++i) ++votes[y[static_cast<std::size_t>(d[static_cast<std::size_t>(i)].second)]];
  int best = -1, count = -1;
  for (const auto& [label, c] : votes) {
    if (c > count) {
      best = label;
      count = c;
    }
  }
  return best;
}

// Four Gaussian blobs in `dim` dimensions.
FeatureMatrix blobs(int per_class, int dim, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  FeatureMatrix fm;
  fm.values.resize(4 * per_class, dim);
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const int r = c * per_class + i;
      for (int d = 0; d < dim; ++d) fm.values(r, d) = (d % 4 == c ? 1.5 : 0.0) + 1.0 + g(rng);
      fm.labels.push_back(c);
    }
  }
  return fm;
}

}  // namespace

TEST_CASE("variant names") {
  CHECK(all_variants().size() == 10);
  const std::vector<std::string> expected = {"All_KNN",    "Diver_KNN",    "All_SVM",      "Diver_SVM",
                                             "All_NN_KNN", "Diver_NN_KNN", "All_NN_SVM",   "Diver_NN_SVM",
                                             "All_NN",     "Diver_NN"};
  std::vector<std::string> names;
  for (const auto& v : all_variants()) names.push_back(v.name());
  CHECK(names == expected);
  for (const auto& n : expected) CHECK(ModelVariant::parse(n).name() == n);
  const auto v = ModelVariant::parse("Diver_NN_SVM");
  CHECK(v.dataset == DatasetKind::Diver);
  CHECK(v.uses_embedding);
  CHECK(v.head == HeadKind::Svm);
  CHECK_FALSE(ModelVariant::parse("All_NN").online_trainable());
  CHECK_THROWS_AS(ModelVariant::parse("All_KNN_SVM"), InvalidVariant);
  CHECK_THROWS_AS(ModelVariant::parse("all_knn"), InvalidVariant);
}

TEST_CASE("majority vote ties go to the lowest label") {
  CHECK(majority_vote({3, 3, 1}) == 3);
  CHECK(majority_vote({2, 0, 2, 0}) == 0);
  CHECK(majority_vote({5}) == 5);
  CHECK_THROWS_AS(majority_vote({}), InvalidArgument);
}

TEST_CASE("knn matches an exhaustive oracle on random points") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> coord(0, 6);  // coarse grid forces distance ties
  std::uniform_int_distribution<int> lab(0, 4);
  Eigen::MatrixXd pts(200, 3);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < 200; ++i) {
    for (Eigen::Index c = 0; c < 3; ++c) pts(i, c) = coord(rng);
    y.push_back(lab(rng));
  }
  for (int k : {1, 4, 5, 9}) {
    const auto m = KnnModel::fit(pts, y, k);
    for (int qi = 0; qi < 50; ++qi) {
      Eigen::RowVectorXd q(3);
      for (Eigen::Index c = 0; c < 3; ++c) q(c) = coord(rng);
      CHECK(m.predict(q) == knn_oracle(pts, y, q, k));
    }
  }
}

TEST_CASE("knn vote tie two against two") {
  Eigen::MatrixXd pts(4, 1);
  pts << -1, 1, -2, 2;
  const auto m = KnnModel::fit(pts, {1, 0, 1, 0}, 4);
  Eigen::RowVectorXd q(1);
  q << 0;
  CHECK(m.predict(q) == 0);
  CHECK_THROWS_AS(KnnModel::fit(pts, {1, 0, 1, 0}, 5), InvalidArgument);
}

TEST_CASE("cosine knn ignores magnitude") {
  Eigen::MatrixXd pts(2, 2);
  pts << 10, 0, 0, 0.1;
  const auto m = KnnModel::fit(pts, {0, 1}, 1, KnnMetric::Cosine);
  Eigen::RowVectorXd q(2);
  q << 6, 7;
  CHECK(m.predict(q) == 1);
  CHECK(KnnModel::fit(pts, {0, 1}, 1).predict(q) == 0);
}

TEST_CASE("svm separates linearly separable classes") {
  const auto train = blobs(60, 6, 0.1, 1);
  const auto test = blobs(30, 6, 0.1, 2);
  SvmConfig cfg;
  cfg.seed = 3;
  const auto m = SvmModel::fit(train.values, train.labels, cfg);
  CHECK(m.classes() == std::vector<int>{0, 1, 2, 3});
  CHECK(accuracy(m.predict_rows(train.values), train.labels) == 1.0);
  CHECK(accuracy(m.predict_rows(test.values), test.labels) == 1.0);
  const auto again = SvmModel::fit(train.values, train.labels, cfg);
  CHECK((again.weights().array() == m.weights().array()).all());
  CHECK_THROWS_AS(SvmModel::fit(train.values, std::vector<int>(train.labels.size(), 1), cfg), InvalidArgument);
}

TEST_CASE("softmax head reaches 95% on four clusters") {
  const auto train = blobs(80, 16, 0.3, 5);
  const auto test = blobs(40, 16, 0.3, 6);
  SoftmaxConfig cfg;
  cfg.seed = 2;
  const auto m = SoftmaxHead::fit(train.values, train.labels, cfg);
  CHECK(accuracy(m.predict_rows(test.values), test.labels) >= 0.95);
  const auto p = m.probabilities(test.values);
  CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(SoftmaxHead::fit(train.values.leftCols(8), train.labels, cfg), InvalidArgument);
}

TEST_CASE("softmax gradient matches central differences") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    CAPTURE(seed);
    SoftmaxConfig cfg;
    cfg.hidden = 7;
    cfg.seed = seed;
    const auto head = SoftmaxHead::init(5, {0, 3, 8}, cfg);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd x(9, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = g(rng);
    const std::vector<int> y = {0, 1, 2, 2, 1, 0, 0, 2, 1};
    Eigen::VectorXd grad;
    head.loss(x, y, &grad);
    const Eigen::VectorXd theta = head.flat_parameters();
    Eigen::VectorXd fd(theta.size());
    SoftmaxHead probe = head;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd t = theta;
      t(i) += 1e-6;
      probe.set_flat_parameters(t);
      const double up = probe.loss(x, y);
      t(i) -= 2e-6;
      probe.set_flat_parameters(t);
      fd(i) = (up - probe.loss(x, y)) / 2e-6;
    }
    CHECK((grad - fd).norm() / std::max(grad.norm(), fd.norm()) < 1e-4);
  }
}

TEST_CASE("softmax loss value against a direct computation") {
  SoftmaxConfig cfg;
  cfg.hidden = 3;
  auto head = SoftmaxHead::init(2, {0, 1}, cfg);
  head.set_flat_parameters(Eigen::VectorXd::Zero(head.flat_parameters().size()));
  Eigen::MatrixXd x(2, 2);
  x << 1, 2, 3, 4;
  CHECK(head.loss(x, {0, 1}) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("identify votes over frames") {
  Eigen::MatrixXd pts(3, 45);
  pts.setOnes();
  pts.row(1) *= 2;
  pts.row(2) *= 3;
  const auto knn = KnnModel::fit(pts, {4, 5, 6}, 1);
  IdentModel model(ModelVariant::parse("All_KNN"), nullptr, {}, knn);
  Eigen::MatrixXd q(3, 45);
  q.row(0).setConstant(2.1);
  q.row(1).setConstant(1.9);
  q.row(2).setConstant(3.0);
  const auto r = identify(model, q);
  CHECK(r.label == 5);
  CHECK(r.per_frame == std::vector<int>{5, 5, 6});
  CHECK(r.votes.at(5) == 2);
  CHECK(model.classes() == std::vector<int>{4, 5, 6});
  CHECK_THROWS_AS(identify(model, Eigen::MatrixXd(0, 45)), InvalidArgument);
}

TEST_CASE("bundles round-trip and check the embedding hash") {
  const auto data = blobs(20, 45, 0.05, 9);
  auto net = std::make_shared<const EmbedNet>(EmbedNet({45, 8, 16}, 4));
  ClassifierConfig cfg;
  cfg.softmax.epochs = 5;
  const auto dir = diverid::testing::temp_dir("bundles");
  for (const auto& v : all_variants()) {
    CAPTURE(v.name());
    const auto m = build_variant(v, data, v.uses_embedding ? net : nullptr, cfg);
    save_bundle(dir / (v.name() + ".bundle"), m);
    const auto back = load_bundle(dir / (v.name() + ".bundle"), {net});
    CHECK(back.variant() == v);
    CHECK(back.predict_rows(data.values) == m.predict_rows(data.values));
    if (v.uses_embedding) {
      const auto other = std::make_shared<const EmbedNet>(EmbedNet({45, 8, 16}, 5));
      CHECK_THROWS_AS(load_bundle(dir / (v.name() + ".bundle"), {other}), FormatError);
    }
  }
  CHECK_THROWS_AS(build_variant(ModelVariant::parse("All_NN"), data, net, cfg, true), InvalidVariant);
  CHECK_THROWS_AS(build_variant(ModelVariant::parse("All_NN_KNN"), data, nullptr, cfg), InvalidVariant);
  std::stringstream junk("diverid-bundle 2\n");
  CHECK_THROWS_AS(load_bundle(junk, {}), FormatError);
}

TEST_CASE("classifier config keys") {
  Config c;
  c.set("knn.k", "3");
  c.set("svm.c", "2.5");
  c.set("knn.embedded_metric", "cosine");
  const auto cfg = ClassifierConfig::from_config(c);
  CHECK(cfg.knn_k == 3);
  CHECK(cfg.svm.c == 2.5);
  CHECK(cfg.embedded_knn_metric == KnnMetric::Cosine);
}
