// SPDX-License-Identifier: Apache-2.0
#include "ncd/datagen.hpp"

#include <json.hpp>

#include <Eigen/Geometry>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace ncd::datagen {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
constexpr int kSubsteps = 8;
}  // namespace

PoseFamily::PoseFamily(TubeChainSpec spec) : spec_(std::move(spec)) {
  if (spec_.linkLengths.empty() || spec_.joints.size() + 1 != spec_.linkLengths.size())
    throw Error(ErrorCode::kConfig, "tube chain needs one joint between each pair of links");
  if (spec_.ringVertices < 3 || spec_.capRings < 1 || !(spec_.radius > 0.0) || !(spec_.ringSpacing > 0.0))
    throw Error(ErrorCode::kConfig, "tube chain resolution parameters out of range");

  double s = 0.0;
  for (std::size_t j = 0; j < spec_.linkLengths.size(); ++j) {
    s += spec_.linkLengths[j];
    if (j + 1 < spec_.linkLengths.size()) jointPositions_.push_back(s);
  }
  length_ = s;
  bodyRings_ = std::max(2, static_cast<int>(std::lround(length_ / spec_.ringSpacing)) + 1);

  const double r = spec_.radius;
  rings_.push_back({0.0, -r, 0.0, true});
  for (int c = spec_.capRings - 1; c >= 1; --c) {
    const double phi = 0.5 * kPi * c / spec_.capRings;
    rings_.push_back({0.0, -r * std::sin(phi), std::cos(phi), false});
  }
  for (int k = 0; k < bodyRings_; ++k) rings_.push_back({length_ * k / (bodyRings_ - 1), 0.0, 1.0, false});
  for (int c = 1; c < spec_.capRings; ++c) {
    const double phi = 0.5 * kPi * c / spec_.capRings;
    rings_.push_back({length_, r * std::sin(phi), std::cos(phi), false});
  }
  rings_.push_back({length_, r, 0.0, true});

  // Topology: consecutive rings are stitched with quads, poles with fans.
  const int m = spec_.ringVertices;
  std::vector<int> start(rings_.size());
  int next = 0;
  for (std::size_t i = 0; i < rings_.size(); ++i) {
    start[i] = next;
    next += rings_[i].pole ? 1 : m;
  }
  for (std::size_t i = 0; i + 1 < rings_.size(); ++i) {
    const int a = start[i], b = start[i + 1];
    for (int k = 0; k < m; ++k) {
      const int q = (k + 1) % m;
      if (rings_[i].pole) {
        rest_.triangles.push_back({a, b + q, b + k});
      } else if (rings_[i + 1].pole) {
        rest_.triangles.push_back({a + k, a + q, b});
      } else {
        rest_.triangles.push_back({a + k, b + q, b + k});
        rest_.triangles.push_back({a + k, a + q, b + q});
      }
    }
  }
  rest_.vertices = build(Vector::Zero(parameter_count()));
  rest_.restVertices = rest_.vertices;
}

PoseFamily PoseFamily::two_link() {
  TubeChainSpec spec;
  spec.name = "two-link";
  spec.linkLengths = {1.0, 1.0};
  spec.joints = {{110.0 * kDeg, 240.0 * kDeg, -kPi, kPi}};
  return PoseFamily(spec);
}

PoseFamily PoseFamily::three_link() {
  TubeChainSpec spec;
  spec.name = "three-link";
  spec.linkLengths = {0.9, 0.55, 0.9};
  spec.blendHalfWidth = 0.2;
  spec.joints = {{0.0, 125.0 * kDeg, -0.25 * kPi, 0.25 * kPi}, {0.0, 125.0 * kDeg, -0.25 * kPi, 0.25 * kPi}};
  return PoseFamily(spec);
}

PoseFamily PoseFamily::by_name(const std::string& name) {
  if (name == "two-link") return two_link();
  if (name == "three-link") return three_link();
  throw Error(ErrorCode::kConfig, "unknown pose family '" + name + "'");
}

std::vector<Vec3> PoseFamily::pose(const Vector& params) const {
  if (params.size() != parameter_count())
    throw Error(ErrorCode::kDimensionMismatch, "pose: expected " + std::to_string(parameter_count()) + " parameters");
  return build(params);
}

std::vector<Vec3> PoseFamily::build(const Vector& params) const {
  const std::size_t joints = spec_.joints.size();
  std::vector<Eigen::Vector3d> axes(joints);
  for (std::size_t j = 0; j < joints; ++j)
    axes[j] = Eigen::Vector3d(0.0, std::cos(params[2 * j + 1]), std::sin(params[2 * j + 1]));

  // Each joint rotates its child by a fraction of the bend angle that ramps
  // linearly across the blend zone, so the centre line bends along an arc.
  auto frame = [&](double s) {
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    for (std::size_t j = 0; j < joints; ++j) {
      const double w = std::clamp((s - jointPositions_[j] + spec_.blendHalfWidth) / (2.0 * spec_.blendHalfWidth), 0.0, 1.0);
      if (w > 0.0) r = r * Eigen::AngleAxisd(w * params[2 * j], axes[j]).toRotationMatrix();
    }
    return r;
  };

  // Centre line sampled at the body rings by midpoint integration of the tangent.
  std::vector<Vec3> centre(static_cast<std::size_t>(bodyRings_));
  centre[0] = Vec3::Zero();
  const double ds = length_ / (bodyRings_ - 1);
  for (int k = 1; k < bodyRings_; ++k) {
    Vec3 c = centre[k - 1];
    const double h = ds / kSubsteps;
    for (int q = 0; q < kSubsteps; ++q) c += h * (frame((k - 1) * ds + (q + 0.5) * h) * Vec3::UnitX());
    centre[k] = c;
  }

  const int m = spec_.ringVertices;
  std::vector<Vec3> out;
  for (const Ring& ring : rings_) {
    const int k = std::clamp(static_cast<int>(std::lround(ring.s / ds)), 0, bodyRings_ - 1);
    const Eigen::Matrix3d r = frame(ring.s);
    const Vec3 base = centre[k] + ring.axial * (r * Vec3::UnitX());
    if (ring.pole) {
      out.push_back(base);
      continue;
    }
    for (int q = 0; q < m; ++q) {
      const double psi = 2.0 * kPi * q / m;
      out.push_back(base + spec_.radius * ring.scale * (r * Vec3(0.0, std::cos(psi), std::sin(psi))));
    }
  }
  return out;
}

Vector PoseFamily::sample_parameters(std::mt19937_64& rng) const {
  Vector p(parameter_count());
  for (std::size_t j = 0; j < spec_.joints.size(); ++j) {
    const auto& range = spec_.joints[j];
    p[2 * j] = std::uniform_real_distribution<double>(range.bendMin, range.bendMax)(rng);
    p[2 * j + 1] = std::uniform_real_distribution<double>(range.azimuthMin, range.azimuthMax)(rng);
  }
  return p;
}

geom::DomainMap PoseFamily::link_domains() const {
  geom::DomainMap map;
  map.count = static_cast<int>(spec_.linkLengths.size());
  for (const Ring& ring : rings_) {
    int link = 0;
    while (link < static_cast<int>(jointPositions_.size()) && ring.s >= jointPositions_[link]) ++link;
    const int copies = ring.pole ? 1 : spec_.ringVertices;
    map.domainOf.insert(map.domainOf.end(), static_cast<std::size_t>(copies), link);
  }
  return map;
}

std::vector<mesh::Mesh> SynthResult::training_meshes() const {
  std::vector<mesh::Mesh> out;
  for (std::size_t i = 0; i < meshes.size(); ++i)
    if (reports[i].label == 0) out.push_back(meshes[i]);
  return out;
}

SynthResult synth_dataset(const PoseFamily& family, std::size_t n, std::uint64_t seed) {
  SynthResult result;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) result.poses.push_back(family.sample_parameters(rng));
  result.meshes.resize(n);
  result.reports.resize(n);
  const geom::CollisionOracle oracle(family.rest(), family.link_domains());
  parallel_for(n, [&](std::size_t i) {
    result.meshes[i] = family.pose_mesh(result.poses[i]);
    if (!mesh::validate_manifold(result.meshes[i]).valid())
      throw Error(ErrorCode::kOracle, "synthesized pose " + std::to_string(i) + " is not manifold");
    result.reports[i] = oracle.query(result.meshes[i]);
  });
  for (const auto& r : result.reports) result.collisionFree += r.label == 0 ? 1 : 0;
  if (n > 0 && result.collisionFree == n)
    throw Error(ErrorCode::kConfig, "pose family '" + family.spec().name +
                                        "' produced no self-colliding pose; the dataset must straddle the boundary");
  return result;
}

namespace fs = std::filesystem;

namespace {
std::string pose_file(std::size_t i) {
  std::ostringstream name;
  name << "pose_" << std::setw(5) << std::setfill('0') << i << ".obj";
  return name.str();
}
}  // namespace

void write_dataset(const std::string& dir, const PoseFamily& family, const SynthResult& result, std::uint64_t seed) {
  fs::create_directories(dir);
  mesh::write_obj_file((fs::path(dir) / "rest.obj").string(), family.rest().restVertices, family.rest().triangles);
  nlohmann::json manifest;
  manifest["family"] = family.spec().name;
  manifest["seed"] = seed;
  manifest["count"] = result.meshes.size();
  manifest["collision_free"] = result.collisionFree;
  manifest["collision_free_fraction"] = result.collision_free_fraction();
  manifest["poses"] = nlohmann::json::array();
  for (std::size_t i = 0; i < result.meshes.size(); ++i) {
    mesh::write_obj_file((fs::path(dir) / pose_file(i)).string(), result.meshes[i].vertices, result.meshes[i].triangles);
    manifest["poses"].push_back({{"file", pose_file(i)},
                                 {"params", std::vector<double>(result.poses[i].data(), result.poses[i].data() + result.poses[i].size())},
                                 {"pd", result.reports[i].pd},
                                 {"label", result.reports[i].label}});
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "cannot write dataset manifest in " + dir);
}

StoredDataset read_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw Error(ErrorCode::kIo, "missing manifest.json in " + dir);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad dataset manifest: ") + e.what());
  }
  StoredDataset data;
  data.family = manifest.value("family", "custom");
  const std::string restPath = (fs::path(dir) / "rest.obj").string();
  data.rest = mesh::read_obj_file(restPath);
  for (const auto& entry : manifest.at("poses")) {
    data.meshes.push_back(mesh::read_mesh_pair((fs::path(dir) / entry.at("file").get<std::string>()).string(), restPath));
    data.labels.push_back(entry.at("label").get<int>());
  }
  return data;
}

}  // namespace ncd::datagen
