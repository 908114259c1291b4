// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "../support/oracles.hpp"
#include "ncd/autoencoder.hpp"

#include <filesystem>
#include <random>

using namespace ncd;

namespace {

ae::AutoencoderConfig small_config(double sparsity = 0.01, int epochs = 200) {
  ae::AutoencoderConfig c;
  c.z0Size = 3;
  c.l2Size = 2;
  c.width = 16;
  c.sparsityWeight = sparsity;
  c.learningRate = 0.01;
  c.finalLearningRate = 0.01;
  c.batchSize = 8;
  c.epochs = epochs;
  c.seed = 4;
  return c;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * normal(rng);
  return m;
}

}  // namespace

TEST_CASE("latent codes have the bilevel shape and flatten losslessly") {
  const ae::Autoencoder model(6, small_config());
  std::mt19937_64 rng(41);
  const Vector f = random_matrix(rng, 18, 1).col(0);
  const ae::LatentCode code = model.encode({f});
  CHECK(code.z0.size() == 3);
  REQUIRE(code.zSub.size() == 3);
  for (const Vector& z : code.zSub) CHECK(z.size() == 2);
  CHECK(model.flat_size() == 9);
  const ae::LatentCode back = ae::LatentCode::from_flat(code.flat(), 3, 2);
  CHECK(back.flat() == code.flat());
  CHECK(model.decode(code).values.size() == 18);
}

TEST_CASE("encode and decode are pure functions") {
  const ae::Autoencoder model(6, small_config());
  std::mt19937_64 rng(42);
  const Matrix f = random_matrix(rng, 5, 18);
  CHECK(model.encode_batch(f) == model.encode_batch(f));
  const Matrix z = random_matrix(rng, 5, 9);
  CHECK(model.decode_batch(z) == model.decode_batch(z));
  for (Eigen::Index r = 0; r < z.rows(); ++r)
    CHECK((model.decode(Vector(z.row(r).transpose())).values - model.decode_batch(z).row(r).transpose()).norm() < 1e-12);
}

TEST_CASE("decoder output is the sum of its level terms") {
  const ae::Autoencoder model(6, small_config());
  std::mt19937_64 rng(43);
  for (int probe = 0; probe < 10; ++probe) {
    const Vector z = random_matrix(rng, 9, 1).col(0);
    Vector sum = Vector::Zero(18);
    for (int i = 0; i <= 3; ++i) sum += model.decode_term(z, i).values;
    CHECK((sum - model.decode(z).values).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(model.decode_term(Vector::Zero(9), 4), Error);
  CHECK_THROWS_AS(model.decode(Vector::Zero(8)), Error);
}

TEST_CASE("decoder gradient matches finite differences over 64 probes") {
  ae::Autoencoder model(6, small_config());
  model.set_feature_scale(0.7);
  std::mt19937_64 rng(44);
  const Matrix mix = random_matrix(rng, 18, 1);
  auto f = [&](const Vector& z, Vector* grad) {
    nn::Tape tape;
    const nn::Var in = grad ? tape.variable(z.transpose()) : tape.constant(z.transpose());
    const nn::Var out = tape.sum(tape.matmul(model.decode(tape, in), tape.constant(mix)));
    if (grad) {
      tape.backward(out);
      *grad = tape.gradient(in).row(0).transpose();
    }
    return tape.scalar(out);
  };
  double worst = 0.0;
  for (int probe = 0; probe < 64; ++probe) {
    const Vector z = random_matrix(rng, 9, 1).col(0);
    Vector g;
    f(z, &g);
    worst = std::max(worst, oracle::relative_gap(g, oracle::finite_difference([&](const Vector& v) { return f(v, nullptr); }, z)));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("attention rows are probability distributions") {
  const ae::Autoencoder model(7, small_config());
  const Matrix w = model.attention().weights;
  REQUIRE(w.rows() == 7);
  REQUIRE(w.cols() == 3);
  CHECK((w.array() > 0.0).all());
  CHECK((w.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("domain map takes the argmax and breaks ties toward index 0") {
  ae::AttentionMap a{Matrix(3, 3)};
  a.weights << 0.2, 0.5, 0.3, 0.4, 0.4, 0.2, 1.0 / 3, 1.0 / 3, 1.0 / 3;
  const geom::DomainMap map = ae::domain_map(a);
  CHECK(map.count == 3);
  CHECK(map.domainOf == std::vector<int>{1, 0, 0});
}

TEST_CASE("feature scale must be positive and finite") {
  ae::Autoencoder model(4, small_config());
  CHECK_THROWS_AS(model.set_feature_scale(0.0), Error);
  CHECK_THROWS_AS(model.set_feature_scale(std::nan("")), Error);
}

TEST_CASE("training memorises a repeated sample") {
  ae::Autoencoder model(6, small_config(0.0, 300));
  std::mt19937_64 rng(45);
  const Matrix one = random_matrix(rng, 1, 18, 0.1);
  const Matrix features = one.replicate(16, 1);
  const ae::TrainingLog log = ae::train_autoencoder(model, features);
  REQUIRE(!log.reconstruction.empty());
  CHECK(log.reconstruction.back() * 10.0 <= log.initialReconstruction);
  const Vector back = model.decode(model.encode({one.row(0).transpose()})).values;
  CHECK((back - one.row(0).transpose()).norm() < 0.1 * one.norm());
}

TEST_CASE("sparsity weight lowers the attention entropy") {
  std::mt19937_64 rng(46);
  const Matrix features = random_matrix(rng, 32, 18, 0.1);
  auto final_entropy = [&](double weight) {
    ae::Autoencoder model(6, small_config(weight, 60));
    return ae::train_autoencoder(model, features).entropy.back();
  };
  CHECK(final_entropy(1.0) < final_entropy(0.0));
}

TEST_CASE("checkpoint round trip reproduces the decoder") {
  ae::Autoencoder model(6, small_config());
  model.set_feature_scale(2.5);
  const auto dir = std::filesystem::temp_directory_path() / "ncd_ae_ckpt";
  std::filesystem::create_directories(dir);
  model.save((dir / "ae").string());
  ae::AutoencoderConfig other = small_config();
  other.seed = 99;
  ae::Autoencoder loaded(6, other);
  loaded.load((dir / "ae").string());
  std::mt19937_64 rng(47);
  const Matrix z = random_matrix(rng, 4, 9);
  CHECK(loaded.decode_batch(z) == model.decode_batch(z));
  CHECK(loaded.feature_scale() == 2.5);
  std::filesystem::remove_all(dir);
}
