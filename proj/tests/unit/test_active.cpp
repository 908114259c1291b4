// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "ncd/active.hpp"
#include "ncd/datagen.hpp"

#include <filesystem>
#include <random>

using namespace ncd;

namespace {

det::DetectorConfig detector_config(std::uint64_t seed = 6) {
  det::DetectorConfig c;
  c.z0Size = 3;
  c.l2Size = 2;
  c.cseWidth = 12;
  c.stateSize = 6;
  c.cpWidth = 10;
  c.classifierWidth = 8;
  c.seed = seed;
  return c;
}

active::LatentBox unit_box(Eigen::Index dim) { return {-Vector::Ones(dim), Vector::Ones(dim)}; }

active::CollisionSample sample(double pd, Eigen::Index dim = 9) {
  active::CollisionSample s;
  s.z = Vector::Constant(dim, pd);
  s.pd = pd;
  s.pdPerDomain = Vector::Constant(3, pd / 3.0);
  s.label = pd > 0.0 ? 1 : 0;
  return s;
}

/// Synthetic labels whose PD is linear in the first latent coordinate.
std::vector<active::CollisionSample> linear_samples(std::size_t n, std::uint64_t seed) {
  const Matrix z = active::sample_uniform(unit_box(9), n, seed);
  std::vector<active::CollisionSample> out;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    active::CollisionSample s;
    s.z = z.row(r).transpose();
    s.pd = 0.1 * (s.z[0] + 0.3 * s.z[3]);
    s.pdPerDomain = Vector::Zero(3);
    s.pdPerDomain[0] = s.pd;
    s.label = s.pd > 0.0 ? 1 : 0;
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("latent box is the componentwise hull of the codes") {
  Matrix codes(3, 2);
  codes << 0, 5, -1, 2, 3, 4;
  const active::LatentBox box = active::latent_box(codes);
  CHECK(box.lo == Vector::Map(std::vector<double>{-1, 2}.data(), 2));
  CHECK(box.hi == Vector::Map(std::vector<double>{3, 5}.data(), 2));
  for (Eigen::Index r = 0; r < 3; ++r) CHECK(box.contains(codes.row(r).transpose()));
  CHECK_THROWS_AS(active::latent_box(Matrix(0, 2)), Error);
}

TEST_CASE("uniform samples fill the box with the right moments and are reproducible") {
  active::LatentBox box{Vector::Zero(3), Vector::Constant(3, 2.0)};
  box.lo[2] = -4.0;
  const Matrix z = active::sample_uniform(box, 20000, 61);
  for (Eigen::Index r = 0; r < z.rows(); ++r) REQUIRE(box.contains(z.row(r).transpose()));
  for (Eigen::Index k = 0; k < 3; ++k) {
    const double width = box.hi[k] - box.lo[k];
    const Vector col = z.col(k);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    CHECK(mean == doctest::Approx(box.centre()[k]).epsilon(0.02 * width));
    CHECK(var == doctest::Approx(width * width / 12.0).epsilon(0.03));
  }
  CHECK(active::sample_uniform(box, 10, 7) == active::sample_uniform(box, 10, 7));
  CHECK(active::sample_uniform(box, 10, 7) != active::sample_uniform(box, 10, 8));
}

TEST_CASE("partition sends each PD to exactly one subset") {
  const double eps = 1e-4;
  CHECK(active::partition(0.01, eps) == active::Subset::kPositive);
  CHECK(active::partition(-0.01, eps) == active::Subset::kNegative);
  CHECK(active::partition(0.0, eps) == active::Subset::kBoundary);
  CHECK(active::partition(eps, eps) == active::Subset::kBoundary);
  CHECK(active::partition(std::nextafter(eps, 1.0), eps) == active::Subset::kPositive);
  CHECK(active::partition(-1e-300, eps) == active::Subset::kNegative);
  CHECK_THROWS_AS(active::partition(0.0, 0.0), Error);
  std::mt19937_64 rng(62);
  std::normal_distribution<double> normal(0.0, 2e-4);
  active::CollisionDataset data(eps);
  for (int i = 0; i < 1000; ++i) data.append({sample(normal(rng))});
  const active::SubsetCounts c = data.counts();
  CHECK(c.total() == data.size());
  CHECK(data.indices(active::Subset::kPositive).size() + data.indices(active::Subset::kNegative).size() +
            data.indices(active::Subset::kBoundary).size() ==
        data.size());
  CHECK(c.boundary > 0);
}

TEST_CASE("boundary loss is zero exactly at one half") {
  nn::Tape tape;
  CHECK(tape.scalar(active::boundary_loss(tape, tape.constant(Matrix::Constant(4, 1, 0.5)))) == 0.0);
  Matrix p(2, 1);
  p << 0.2, 0.9;
  CHECK(tape.scalar(active::boundary_loss(tape, tape.constant(p))) == doctest::Approx(0.35));
}

TEST_CASE("ranking loss vanishes when the summed states respect the PD order") {
  std::vector<active::CollisionSample> samples = {sample(-0.2), sample(0.1), sample(0.3)};
  std::vector<const active::CollisionSample*> batch;
  for (const auto& s : samples) batch.push_back(&s);
  active::UpdateOptions options;
  options.alpha = 0.05;
  std::mt19937_64 rng(63);
  nn::Tape tape;
  Matrix s(3, 3), logit = Matrix::Zero(3, 1);
  s << -0.1, -0.1, 0.0, 0.0, 0.0, 0.1, 0.1, 0.1, 0.1;
  const det::Detector::Graph ordered{tape.constant(logit), tape.constant(Matrix::Constant(3, 1, 0.5)), tape.constant(s)};
  CHECK(active::detector_loss(tape, ordered, batch, options, rng).rank == 0.0);
  Matrix flipped = s.colwise().reverse();
  const det::Detector::Graph reversed{tape.constant(logit), tape.constant(Matrix::Constant(3, 1, 0.5)), tape.constant(flipped)};
  CHECK(active::detector_loss(tape, reversed, batch, options, rng).rank > 0.0);
}

TEST_CASE("boundary samples enter only the boundary term") {
  std::vector<active::CollisionSample> samples = {sample(0.0), sample(5e-5)};
  std::vector<const active::CollisionSample*> batch{&samples[0], &samples[1]};
  active::UpdateOptions options;
  std::mt19937_64 rng(64);
  nn::Tape tape;
  const det::Detector::Graph g{tape.constant(Matrix::Constant(2, 1, 3.0)), tape.constant(Matrix::Constant(2, 1, 0.5)),
                               tape.constant(Matrix::Zero(2, 3))};
  const active::LossTerms terms = active::detector_loss(tape, g, batch, options, rng);
  CHECK(terms.ce == 0.0);
  CHECK(terms.boundary == 0.0);
  options.boundarySet = false;
  CHECK(active::detector_loss(tape, g, batch, options, rng).ce > 0.0);
}

TEST_CASE("projection leaves a point already on the boundary unchanged") {
  det::Detector d(detector_config());
  d.zero_classifier();
  const Vector z = Vector::Constant(9, 0.2);
  const active::ProjectionResult r = active::project_to_boundary(d, z, unit_box(9));
  CHECK(r.converged);
  CHECK(r.iterations == 0);
  CHECK(r.z == z);
}

TEST_CASE("projection reduces the residual and stays in the box") {
  det::Detector d(detector_config(7));
  const active::LatentBox box = unit_box(9);
  std::vector<active::CollisionSample> train = linear_samples(400, 65);
  active::TrainSchedule schedule{1e-2, 64, 20};
  active::model_update(d, train, {}, {}, schedule, 3);
  const Matrix starts = active::sample_uniform(box, 50, 66);
  int close = 0;
  for (Eigen::Index r = 0; r < starts.rows(); ++r) {
    const Vector z = starts.row(r).transpose();
    const double before = std::abs(d.forward(z).prob - 0.5);
    const active::ProjectionResult p = active::project_to_boundary(d, z, box);
    CHECK(!p.abandoned);
    CHECK(box.contains(p.z));
    CHECK(std::abs(p.prob - 0.5) <= before);
    CHECK(p.iterations <= 100);
    close += std::abs(p.prob - 0.5) <= 0.05 ? 1 : 0;
  }
  CHECK(close >= 45);
}

TEST_CASE("aggregation adds exactly N_aug labelled samples, projected half first") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  ae::AutoencoderConfig aeConfig;
  aeConfig.z0Size = 3;
  aeConfig.l2Size = 2;
  aeConfig.width = 8;
  ae::Autoencoder model(static_cast<int>(family.rest().vertex_count()), aeConfig);
  model.set_feature_scale(1e-3);
  const geom::CollisionOracle oracle(family.rest(), ae::domain_map(model.attention()));
  const active::Labeler labeler(model, oracle);
  const active::LatentBox box = unit_box(9);
  det::Detector d(detector_config());

  active::CollisionDataset data;
  data.append(active::bootstrap(20, box, labeler, 67));
  REQUIRE(data.size() == 20);
  const active::AggregateResult agg = active::aggregate(data, d, box, labeler, 11, 68);
  CHECK(agg.samples.size() == 11);
  CHECK(agg.projectedCount == 5);
  REQUIRE(agg.projections.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(agg.samples[i].z == agg.projections[i].z);
  for (const auto& s : agg.samples) {
    CHECK(s.pdPerDomain.size() == 3);
    CHECK(s.label == (s.pd > 0.0 ? 1 : 0));
  }
  const std::size_t before = data.size();
  data.append(agg.samples);
  CHECK(data.size() - before == 11);
  CHECK_THROWS_AS(active::aggregate(active::CollisionDataset{}, d, box, labeler, 4, 1), Error);
}

TEST_CASE("dataset save and load round trip") {
  active::CollisionDataset data(2e-4);
  for (double pd : {-0.3, 0.0, 1e-4, 0.2}) data.append({sample(pd)});
  const auto dir = std::filesystem::temp_directory_path() / "ncd_dataset";
  std::filesystem::create_directories(dir);
  data.save((dir / "d").string());
  const active::CollisionDataset back = active::CollisionDataset::load((dir / "d").string());
  CHECK(back.eps() == data.eps());
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back.samples()[i].z == data.samples()[i].z);
    CHECK(back.samples()[i].pd == data.samples()[i].pd);
    CHECK(back.samples()[i].pdPerDomain == data.samples()[i].pdPerDomain);
    CHECK(back.samples()[i].label == data.samples()[i].label);
  }
  CHECK_THROWS_AS(data.append({sample(0.1, 4)}), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("elbow point examples") {
  const active::ElbowResult knee = active::elbow_point({1, 2, 3, 4}, {0.5, 0.9, 0.92, 0.93});
  CHECK(knee.found);
  CHECK(knee.x == 2.0);

  const active::ElbowResult linear = active::elbow_point({1, 2, 3, 4}, {0.1, 0.2, 0.3, 0.4});
  CHECK_FALSE(linear.found);
  CHECK(linear.x == 4.0);

  std::vector<double> xs, ys;
  for (int i = 0; i <= 100; ++i) {
    xs.push_back(i / 100.0);
    ys.push_back(std::sqrt(i / 100.0));
  }
  const active::ElbowResult concave = active::elbow_point(xs, ys);
  CHECK(concave.found);
  CHECK(std::abs(concave.x - 0.25) <= 0.01 + 1e-12);

  CHECK_THROWS_AS(active::elbow_point({1, 2}, {0.1, 0.2}), Error);
  CHECK_THROWS_AS(active::elbow_point({1, 1, 2}, {0.1, 0.2, 0.3}), Error);
}

TEST_CASE("detection metrics on perfect and all-negative predictions") {
  const std::vector<int> labels{1, 0, 1, 1, 0};
  Vector perfect(5);
  perfect << 0.9, 0.1, 0.6, 0.5, 0.4;
  const active::DetectionMetrics p = active::detection_metrics(perfect, labels);
  CHECK(p.accuracy == 1.0);
  CHECK(p.falseNegativeRate == 0.0);
  CHECK(p.positives == 3);
  const active::DetectionMetrics n = active::detection_metrics(Vector::Constant(5, 0.1), labels);
  CHECK(n.accuracy == doctest::Approx(0.4));
  CHECK(n.falseNegativeRate == 1.0);
  CHECK_THROWS_AS(active::detection_metrics(Vector::Zero(2), labels), Error);
}

TEST_CASE("cross entropy falls over the first ten epochs and training is reproducible") {
  const std::vector<active::CollisionSample> train = linear_samples(300, 69);
  const std::vector<active::CollisionSample> validation = linear_samples(100, 70);
  active::TrainSchedule schedule{1e-2, 64, 10};
  auto run = [&]() {
    det::Detector d(detector_config());
    return std::make_pair(active::model_update(d, train, validation, {}, schedule, 4), d.forward(Vector::Zero(9)).prob);
  };
  const auto [logs, prob] = run();
  REQUIRE(logs.size() == 10);
  CHECK(logs.back().ce < logs.front().ce);
  CHECK(logs.back().validationAccuracy > 0.8);
  CHECK(run().second == prob);
}

TEST_CASE("ranking margin scales the mean absolute PD") {
  CHECK(active::ranking_margin({sample(-0.2), sample(0.4)}, 0.05) == doctest::Approx(0.015));
  CHECK(active::ranking_margin({}) == 0.0);
}
