// SPDX-License-Identifier: Apache-2.0
#include "ncd/selftest.hpp"

#include "ncd/experiment.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace ncd {

namespace {

std::string num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

SelfTestResult feature_round_trip() {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const mesh::Mesh m = family.pose_mesh(family.sample_parameters(rng));
    const Eigen::Matrix3d r = Eigen::Quaterniond::UnitRandom().toRotationMatrix();
    std::vector<Vec3> moved;
    for (const Vec3& v : m.vertices) moved.push_back(r * v + Vec3(0.3, -1.2, 2.0));
    const mesh::FeatureVector a = mesh::feature_transform(m);
    const mesh::FeatureVector b = mesh::feature_transform(mesh::with_vertices(m, moved));
    const mesh::FeatureVector c = mesh::feature_transform(mesh::feature_inverse(a, family.rest()));
    worst = std::max({worst, (a.values - b.values).cwiseAbs().maxCoeff(), (a.values - c.values).cwiseAbs().maxCoeff()});
  }
  return {"feature transform rigid invariance and round trip", worst < 1e-8, "max deviation " + num(worst)};
}

SelfTestResult bvh_matches_brute_force() {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  std::mt19937_64 rng(12);
  std::size_t meshes = 0, mismatches = 0, pairs = 0;
  for (int i = 0; i < 8; ++i) {
    const mesh::Mesh m = family.pose_mesh(family.sample_parameters(rng));
    const geom::Bvh bvh(m);
    const std::vector<std::pair<int, int>> fast = geom::intersecting_pairs(m, bvh);
    std::vector<std::pair<int, int>> brute;
    for (std::size_t a = 0; a < m.triangles.size(); ++a)
      for (std::size_t b = a + 1; b < m.triangles.size(); ++b)
        if (!geom::share_vertex(m.triangles[a], m.triangles[b]) && geom::tri_tri_intersect(m.triangle(a), m.triangle(b)))
          brute.emplace_back(static_cast<int>(a), static_cast<int>(b));
    mismatches += fast == brute ? 0 : 1;
    pairs += brute.size();
    ++meshes;
  }
  return {"BVH pair set equals brute force", mismatches == 0,
          std::to_string(meshes) + " meshes, " + std::to_string(pairs) + " pairs, " + std::to_string(mismatches) +
              " mismatches"};
}

SelfTestResult detector_gradient() {
  det::Detector detector(det::DetectorConfig{4, 2, 16, 8, 8, 8, 1.0, 3});
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int probe = 0; probe < 8; ++probe) {
    Vector z(detector.flat_size());
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
    const Vector numeric =
        nn::central_difference([&](const Vector& x) { return detector.forward(x).prob; }, z, 1e-5);
    worst = std::max(worst, nn::relative_error(detector.gradient(z), numeric, 1e-8));
  }
  return {"detector gradient against central differences", worst < 1e-4, "max relative error " + num(worst)};
}

SelfTestResult decoder_gradient() {
  const ae::Autoencoder model(6, ae::AutoencoderConfig{2, 2, 8, 0.01, 0.01, 1e-4, 16, 1, 4});
  std::mt19937_64 rng(14);
  std::normal_distribution<double> normal;
  Vector target(model.feature_size());
  for (Eigen::Index k = 0; k < target.size(); ++k) target[k] = 0.1 * normal(rng);
  const handler::ScalarFunction e = handler::cartesian_objective(model, target);
  double worst = 0.0;
  for (int probe = 0; probe < 8; ++probe) {
    Vector z(model.flat_size());
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
    Vector g;
    e(z, &g);
    const Vector numeric = nn::central_difference([&](const Vector& x) { return e(x, nullptr); }, z, 1e-5);
    worst = std::max(worst, nn::relative_error(g, numeric, 1e-8));
  }
  return {"decoder objective gradient against central differences", worst < 1e-4, "max relative error " + num(worst)};
}

SelfTestResult alm_disk() {
  const Vector centre = Vector::Zero(2);
  const handler::ScalarFunction disk = [&](const Vector& z, Vector* grad) {
    if (grad) *grad = 2.0 * (z - centre);
    return (z - centre).squaredNorm() - 1.0;
  };
  Vector user(2);
  user << 2.0, 1.0;
  const handler::AlmResult r = handler::alm_solve(user, handler::latent_objective(user), disk);
  const Vector expected = user / user.norm();
  const double error = (r.z - expected).norm();
  return {"ALM matches the closed-form projection onto a disk", r.feasible && error < 1e-4, "error " + num(error)};
}

SelfTestResult config_round_trip() {
  exp::ExperimentConfig config;
  config.set("n_aug", "123");
  config.set("eps", "0.00025");
  config.set("seeds", "4,7");
  const exp::ExperimentConfig back = exp::ExperimentConfig::parse(config.to_text());
  return {"config text round trip", back == config && back.nAug == 123 && back.seeds.size() == 2, ""};
}

}  // namespace

std::vector<SelfTestResult> run_selftest() {
  std::vector<SelfTestResult> results;
  for (auto* check : {feature_round_trip, bvh_matches_brute_force, detector_gradient, decoder_gradient, alm_disk,
                      config_round_trip}) {
    try {
      results.push_back(check());
    } catch (const std::exception& e) {
      results.push_back({"unnamed check", false, std::string("threw: ") + e.what()});
    }
  }
  return results;
}

}  // namespace ncd
