#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "diverid/datagen.hpp"
#include "diverid/features.hpp"
#include "helpers.hpp"

using namespace diverid;

TEST_CASE("population labels, kinds and separation") {
  const auto pop = sample_population(4, 4, 7);
  REQUIRE(pop.size() == 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(pop[i].label.id == i);
    CHECK(pop[i].label.kind == (i < 4 ? IdentityKind::Diver : IdentityKind::Swimmer));
    CHECK_NOTHROW(pop[i].validate());
  }
  for (std::size_t a = 0; a < pop.size(); ++a) {
    for (std::size_t b = a + 1; b < pop.size(); ++b) {
      const auto sa = adr_signature(pop[a]).values();
      const auto sb = adr_signature(pop[b]).values();
      double d = 0;
      for (std::size_t k = 0; k < kNumAdr; ++k) d += (sa[k] - sb[k]) * (sa[k] - sb[k]);
      CHECK(std::sqrt(d) >= 0.5);
    }
  }
  const auto again = sample_population(4, 4, 7);
  for (std::size_t i = 0; i < pop.size(); ++i) CHECK(again[i].segments == pop[i].segments);
  CHECK_THROWS_AS(sample_population(0, 0, 1), InvalidArgument);
  PopulationConfig impossible;
  impossible.delta_min = 100.0;
  impossible.max_attempts = 50;
  CHECK_THROWS_AS(sample_population(2, 0, 1, impossible), GenerationError);
}

TEST_CASE("body points have the specified segment lengths") {
  const auto pop = sample_population(2, 1, 3);
  std::mt19937_64 rng(5);
  for (const auto& spec : pop) {
    for (int t = 0; t < 20; ++t) {
      const auto pts = body_points(spec, random_limb_angles(rng));
      for (std::size_t i = 0; i < kNumAd; ++i) {
        const auto& s = kSegments[i];
        const double len = (pts[static_cast<std::size_t>(s.a)] - pts[static_cast<std::size_t>(s.b)]).norm();
        CHECK(len == doctest::Approx(spec.segments[i]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("clean projection recovers the signature exactly") {
  const auto pop = sample_population(3, 0, 11);
  std::mt19937_64 rng(2);
  for (const auto& spec : pop) {
    const auto sig = adr_signature(spec).values();
    for (double dist : {1.5, 2.7, 4.0}) {
      const auto f = render_clean(spec, dist, 0.1, Camera{}, rng, 0);
      const auto adr = compute_adr(compute_ad(f)).values();
      for (std::size_t k = 0; k < kNumAdr; ++k) CHECK(adr[k] == doctest::Approx(sig[k]).epsilon(1e-9));
    }
  }
}

TEST_CASE("rendering is seeded and per-identity independent") {
  const auto pop = sample_population(3, 1, 2);
  RenderConfig cfg;
  const auto a = render_dataset(pop, 30, cfg, 9);
  const auto b = render_dataset(pop, 30, cfg, 9);
  CHECK(a == b);
  const std::vector<AnthropometrySpec> sub = {pop[0], pop[1]};
  const auto c = render_dataset(sub, 30, cfg, 9);
  CHECK(c[0] == a[0]);
  CHECK(c[1] == a[1]);
  CHECK_FALSE(render_dataset(pop, 30, cfg, 10)[0] == a[0]);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].size() == 30);
    for (const auto& f : a[i]) CHECK(*f.label() == pop[i].label.id);
  }
}

TEST_CASE("noise model") {
  const auto clean = diverid::testing::canonical_pose();
  std::mt19937_64 rng(3);
  NoiseModel none{0.0, 0.0};
  CHECK(apply_noise(clean, none, rng) == clean);
  NoiseModel always{0.0, 1.0, CorruptionMode::KneesAboveHips};
  const auto bad = apply_noise(clean, always, rng);
  CHECK(bad[Joint::LeftKnee].y < bad[Joint::LeftHip].y);
  CHECK_THROWS_AS((NoiseModel{-1.0, 0.0}.validate()), InvalidArgument);
  CHECK(corruption_from_name(corruption_name(CorruptionMode::ArmGlitch)) == CorruptionMode::ArmGlitch);
  CHECK_THROWS_AS(corruption_from_name("melt"), FormatError);
}

TEST_CASE("default noise keeps most frames") {
  const auto pop = sample_population(2, 2, 4);
  const auto frames = render_dataset(pop, 500, RenderConfig{}, 4);
  std::size_t total = 0, kept = 0;
  for (const auto& f : frames) {
    total += f.size();
    kept += filter_stream(f).size();
  }
  const double rate = static_cast<double>(kept) / static_cast<double>(total);
  CHECK(rate > 0.75);
  CHECK(rate < 0.98);
}

TEST_CASE("stratified split") {
  FeatureMatrix fm;
  fm.values = Eigen::MatrixXd::Random(50, 45);
  for (int i = 0; i < 50; ++i) fm.labels.push_back(i < 30 ? 0 : 1);
  const auto s = stratified_split(fm, 0.8, 3);
  std::map<int, int> tr, te;
  for (int l : s.train.labels) ++tr[l];
  for (int l : s.test.labels) ++te[l];
  CHECK(tr[0] == 24);
  CHECK(te[0] == 6);
  CHECK(tr[1] == 16);
  CHECK(te[1] == 4);
  std::set<double> first_col;
  for (Eigen::Index r = 0; r < s.train.rows(); ++r) first_col.insert(s.train.values(r, 0));
  for (Eigen::Index r = 0; r < s.test.rows(); ++r) CHECK(first_col.count(s.test.values(r, 0)) == 0);
  const auto s2 = stratified_split(fm, 0.8, 3);
  CHECK(s2.train == s.train);
  CHECK(s2.test == s.test);
  CHECK_THROWS_AS(stratified_split(fm, 1.0, 3), InvalidArgument);
}

TEST_CASE("dataset views") {
  const auto pop = sample_population(2, 2, 1);
  FeatureMatrix fm;
  fm.values = Eigen::MatrixXd::Random(8, 45);
  fm.labels = {0, 1, 2, 3, 0, 1, 2, 3};
  CHECK(dataset_view(fm, pop, DatasetKind::AllClass).rows() == 8);
  const auto divers = dataset_view(fm, pop, DatasetKind::Diver);
  CHECK(divers.labels == std::vector<int>{0, 1, 0, 1});
  fm.labels[0] = 9;
  CHECK_THROWS_AS(dataset_view(fm, pop, DatasetKind::Diver), InvalidArgument);
}

TEST_CASE("dataset directory round-trip") {
  DatasetManifest m;
  m.seed = 12;
  m.frames_per_identity = 15;
  m.population = sample_population(2, 1, 12);
  for (const auto& p : m.population) m.files.push_back("identity_" + std::to_string(p.label.id) + ".poses");
  const auto frames = render_dataset(m.population, 15, m.render, 12);
  const auto dir = diverid::testing::temp_dir("dataset_io");
  write_dataset(dir, m, frames);
  const auto back = read_manifest(dir);
  CHECK(back.seed == 12);
  CHECK(back.files == m.files);
  REQUIRE(back.population.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.population[i].segments == m.population[i].segments);
    CHECK(back.population[i].label.kind == m.population[i].label.kind);
  }
  CHECK(manifest_to_json(back) == manifest_to_json(m));
  std::vector<PoseFrame> all;
  for (const auto& f : frames) all.insert(all.end(), f.begin(), f.end());
  CHECK(read_dataset_frames(dir, back) == all);
  CHECK_THROWS_AS(manifest_from_json("{\"format\": \"other\"}"), FormatError);
  CHECK_THROWS_AS(read_manifest(dir / "missing"), FormatError);
}
