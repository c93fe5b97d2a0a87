#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "diverid/metrics.hpp"
#include "diverid/pipeline.hpp"

using namespace diverid;

namespace {

double silhouette_oracle(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  const auto n = static_cast<std::size_t>(x.rows());
  auto dist = [&](std::size_t i, std::size_t j) {
    const double c = x.row(static_cast<Eigen::Index>(i)).dot(x.row(static_cast<Eigen::Index>(j))) /
                     (x.row(static_cast<Eigen::Index>(i)).norm() * x.row(static_cast<Eigen::Index>(j)).norm());
    return 1.0 - c;
  };
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<int, std::pair<double, int>> acc;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      acc[labels[j]].first += dist(i, j);
      acc[labels[j]].second += 1;
    }
    if (acc[labels[i]].second == 0) continue;
    const double a = acc[labels[i]].first / acc[labels[i]].second;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [l, s] : acc) {
      if (l != labels[i] && s.second > 0) b = std::min(b, s.first / s.second);
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST_CASE("accuracy") {
  CHECK(accuracy({1, 2, 3, 4}, {1, 2, 0, 4}) == 0.75);
  CHECK_THROWS_AS(accuracy({1}, {1, 2}), InvalidArgument);
  CHECK_THROWS_AS(accuracy({}, {}), InvalidArgument);
}

TEST_CASE("cosine silhouette matches a direct computation") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::MatrixXd x(300, 4);
    std::vector<int> labels;
    for (Eigen::Index r = 0; r < 300; ++r) {
      const int l = static_cast<int>(r % 3);
      for (Eigen::Index c = 0; c < 4; ++c) x(r, c) = (c == l ? 2.0 : 0.2) + 0.5 * g(rng);
      labels.push_back(l);
    }
    labels[0] = 7;  // a singleton cluster scores zero
    CHECK(cosine_silhouette(x, labels) == doctest::Approx(silhouette_oracle(x, labels)).epsilon(1e-10));
  }
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(3, 2);
  z.row(1).setZero();
  CHECK_THROWS_AS(cosine_silhouette(z, {0, 1, 1}), DegenerateEmbeddingError);
  CHECK_THROWS_AS(cosine_silhouette(Eigen::MatrixXd::Ones(3, 2), {0, 0, 0}), InvalidArgument);
}

TEST_CASE("accuracy versus frames") {
  std::vector<int> truth, perfect, noisy;
  for (int l = 0; l < 3; ++l) {
    for (int i = 0; i < 40; ++i) {
      truth.push_back(l);
      perfect.push_back(l);
      noisy.push_back(i % 4 == 0 ? (l + 1) % 3 : l);  // 25% wrong, never a majority
    }
  }
  const auto c = accuracy_vs_frames(perfect, truth, {1, 5, 40, 41}, 10, 1);
  REQUIRE(c.points.size() == 3);
  CHECK(c.skipped == std::vector<int>{41});
  for (const auto& p : c.points) {
    CHECK(p.accuracy == 1.0);
    CHECK(p.groups == 30);
  }
  const auto n = accuracy_vs_frames(noisy, truth, {1, 40}, 50, 2);
  CHECK(n.points[0].accuracy < 1.0);
  CHECK(n.points[0].accuracy > 0.5);
  CHECK(n.points[1].accuracy == 1.0);
  CHECK(accuracy_vs_frames(noisy, truth, {1, 10}, 50, 2).points[1].accuracy ==
        accuracy_vs_frames(noisy, truth, {1, 10}, 50, 2).points[1].accuracy);
}

TEST_CASE("pca projection follows the dominant axis") {
  Eigen::MatrixXd x(50, 3);
  for (Eigen::Index r = 0; r < 50; ++r) x.row(r) << r, 0.1 * std::sin(r), 0.01 * std::cos(r);
  const auto p = pca_project_2d(x);
  CHECK(p.rows() == 50);
  CHECK(p.cols() == 2);
  Eigen::VectorXd centered = x.col(0).array() - x.col(0).mean();
  CHECK((p.col(0) - centered).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("tables render aligned and tab separated") {
  Table t;
  t.headers = {"Model", "Acc."};
  t.add_row({"All_KNN", "99.00%"});
  t.add_row({"x", "1%"});
  CHECK(t.tsv() == "Model\tAcc.\nAll_KNN\t99.00%\nx\t1%\n");
  const auto a = t.aligned();
  CHECK(a.find("All_KNN  99.00%") != std::string::npos);
  CHECK(a.find("x            1%") != std::string::npos);
  CHECK_THROWS_AS(t.add_row({"only one"}), InvalidArgument);
  CHECK(format_fixed(0.98765, 3) == "0.988");
  const auto chart = text_chart({{"a", {1, 2, 3}, {0.9, 0.95, 1.0}}}, 20, 5, 0.8, 1.0);
  CHECK(chart.find('*') != std::string::npos);
}

TEST_CASE("zoo trains requested variants on a small synthetic set") {
  const auto data = synthesize_features(2, 2, 150, RenderConfig{}, {}, {}, 3);
  const auto split = stratified_split(data.features, 0.8, 3);
  ZooConfig cfg;
  cfg.train.epochs = 3;
  cfg.train.batch_size = 64;
  cfg.classifiers.softmax.epochs = 5;
  const std::vector<ModelVariant> variants = {ModelVariant::parse("Diver_KNN"), ModelVariant::parse("All_NN_SVM")};
  const auto zoo = train_zoo(split, data.population, variants, cfg);
  REQUIRE(zoo.models.size() == 2);
  CHECK(zoo.models[0]->classes() == std::vector<int>{0, 1});
  CHECK(zoo.models[1]->classes() == std::vector<int>{0, 1, 2, 3});
  CHECK(zoo.history.epoch_loss.size() == 3);
  const auto table = accuracy_table(zoo);
  CHECK(table.rows.size() == 3);
  for (const auto& s : zoo.scores) {
    CHECK(s.test_accuracy >= 0.0);
    CHECK(s.test_accuracy <= 1.0);
  }
  CHECK(rows_for_model(split.test, *zoo.models[0]).labels.size() < split.test.labels.size());
  const auto again = train_zoo(split, data.population, variants, cfg);
  CHECK(accuracy_table(again).tsv() == table.tsv());
}
