// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "../support/oracles.hpp"
#include "ncd/detector.hpp"

#include <filesystem>
#include <random>

using namespace ncd;

namespace {

det::DetectorConfig small_config(int k = 3, std::uint64_t seed = 5) {
  det::DetectorConfig c;
  c.z0Size = k;
  c.l2Size = 2;
  c.cseWidth = 12;
  c.stateSize = 6;
  c.cpWidth = 10;
  c.classifierWidth = 8;
  c.seed = seed;
  return c;
}

Vector random_code(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

nn::Parameter* find(det::Detector& d, const std::string& name) {
  for (nn::Parameter* p : d.trainable())
    if (p->name == name) return p;
  return nullptr;
}

}  // namespace

TEST_CASE("detector probability lies strictly inside (0, 1)") {
  const det::Detector d(small_config());
  std::mt19937_64 rng(51);
  for (int i = 0; i < 50; ++i) {
    const det::DetectorOutput out = d.forward(random_code(rng, d.flat_size()) * 3.0);
    CHECK(out.prob > 0.0);
    CHECK(out.prob < 1.0);
    CHECK(out.s.size() == 3);
    CHECK(out.prob == doctest::Approx(1.0 / (1.0 + std::exp(-out.logit))));
  }
}

TEST_CASE("batch and single evaluations agree") {
  const det::Detector d(small_config());
  std::mt19937_64 rng(52);
  Matrix codes(6, d.flat_size());
  for (Eigen::Index r = 0; r < codes.rows(); ++r) codes.row(r) = random_code(rng, d.flat_size()).transpose();
  const Vector probs = d.probabilities(codes);
  for (Eigen::Index r = 0; r < codes.rows(); ++r)
    CHECK(probs[r] == doctest::Approx(d.forward(codes.row(r).transpose()).prob).epsilon(1e-12));
  CHECK_THROWS_AS(d.forward(Vector::Zero(d.flat_size() + 1)), Error);
}

TEST_CASE("with a constant shared state each local state reads only its own code") {
  det::Detector d(small_config());
  nn::Parameter* w = find(d, "CSE.2.W");
  nn::Parameter* b = find(d, "CSE.2.b");
  REQUIRE(w);
  REQUIRE(b);
  w->value.setZero();
  b->value.setZero();
  std::mt19937_64 rng(53);
  const Vector z = random_code(rng, d.flat_size());
  const Vector base = d.forward(z).s;
  for (int j = 0; j < 3; ++j) {
    Vector moved = z;
    moved.segment(3 + 2 * j, 2) += Vector::Constant(2, 0.7);
    moved.head(3) += Vector::Constant(3, 0.4);
    const Vector s = d.forward(moved).s;
    for (int i = 0; i < 3; ++i) {
      if (i == j) CHECK(std::abs(s[i] - base[i]) > 1e-9);
      else CHECK(s[i] == doctest::Approx(base[i]).epsilon(1e-12));
    }
  }
  Vector same = z;
  same.segment(3, 2) = same.segment(5, 2);
  const Vector s = d.forward(same).s;
  CHECK(s[0] == doctest::Approx(s[1]).epsilon(1e-12));
}

TEST_CASE("parameter count is affine in the top-level code size") {
  std::vector<double> k, count;
  for (int size : {4, 8, 16}) {
    k.push_back(size);
    count.push_back(static_cast<double>(det::Detector(small_config(size)).parameter_count()));
  }
  const double mk = (k[0] + k[1] + k[2]) / 3, mc = (count[0] + count[1] + count[2]) / 3;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 3; ++i) {
    sxy += (k[i] - mk) * (count[i] - mc);
    sxx += (k[i] - mk) * (k[i] - mk);
    syy += (count[i] - mc) * (count[i] - mc);
  }
  CHECK(sxy * sxy / (sxx * syy) > 0.999);
  CHECK(count[1] > count[0]);
}

TEST_CASE("a zeroed classifier gives probability one half and zero gradient") {
  det::Detector d(small_config());
  d.zero_classifier();
  std::mt19937_64 rng(54);
  const Vector z = random_code(rng, d.flat_size());
  CHECK(d.forward(z).prob == 0.5);
  CHECK(d.gradient(z).isZero());
}

TEST_CASE("detector gradient matches finite differences over 64 probes") {
  det::Detector d(small_config());
  std::mt19937_64 rng(55);
  Vector centre = random_code(rng, d.flat_size()) * 0.1;
  Vector half = random_code(rng, d.flat_size()).cwiseAbs() + Vector::Constant(d.flat_size(), 0.5);
  d.set_normalization(centre, half);
  double worst = 0.0;
  for (int probe = 0; probe < 64; ++probe) {
    const Vector z = random_code(rng, d.flat_size());
    const Vector fd = oracle::finite_difference([&](const Vector& v) { return d.forward(v).prob; }, z);
    worst = std::max(worst, oracle::relative_gap(d.gradient(z), fd));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("normalisation rejects bad lengths and negative widths") {
  det::Detector d(small_config());
  CHECK_THROWS_AS(d.set_normalization(Vector::Zero(2), Vector::Ones(2)), Error);
  CHECK_THROWS_AS(d.set_normalization(Vector::Zero(d.flat_size()), -Vector::Ones(d.flat_size())), Error);
  det::DetectorConfig bad = small_config();
  bad.cpWidth = 0;
  CHECK_THROWS_AS(det::Detector{bad}, Error);
}

TEST_CASE("detector checkpoints round trip with normalisation") {
  det::Detector d(small_config());
  d.set_normalization(Vector::Constant(d.flat_size(), 0.3), Vector::Constant(d.flat_size(), 2.0));
  const auto dir = std::filesystem::temp_directory_path() / "ncd_det_ckpt";
  std::filesystem::create_directories(dir);
  d.save((dir / "d").string());
  det::Detector other(small_config(3, 77));
  other.load((dir / "d").string());
  std::mt19937_64 rng(56);
  const Vector z = random_code(rng, d.flat_size());
  CHECK(other.forward(z).prob == d.forward(z).prob);
  CHECK(other.centre() == d.centre());
  std::filesystem::remove_all(dir);
}
