// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ncd/geom.hpp"
#include "ncd/mesh.hpp"

#include <random>
#include <string>
#include <vector>

namespace ncd::datagen {

/// Closed tube made of straight links joined by bendable joints, capped with
/// hemispheres. Each joint has two parameters: bend angle and the azimuth of
/// the bend plane around the parent link axis (radians).
struct TubeChainSpec {
  struct JointRange {
    double bendMin = 0.0, bendMax = 0.0;
    double azimuthMin = 0.0, azimuthMax = 0.0;
  };

  std::string name = "custom";
  std::vector<double> linkLengths;
  std::vector<JointRange> joints;  // linkLengths.size() - 1 entries
  double radius = 0.12;
  int ringVertices = 10;
  double ringSpacing = 0.1;
  double blendHalfWidth = 0.35;  // arc-length half width of the bend zone at each joint
  int capRings = 2;
};

class PoseFamily {
 public:
  explicit PoseFamily(TubeChainSpec spec);

  /// Two links of length 1 joined by one joint; bends past 180 degrees fold the
  /// second link into the first.
  static PoseFamily two_link();
  /// Three links; the middle link is short so double bends close a U.
  static PoseFamily three_link();
  static PoseFamily by_name(const std::string& name);

  const TubeChainSpec& spec() const { return spec_; }
  const mesh::Mesh& rest() const { return rest_; }
  int parameter_count() const { return 2 * static_cast<int>(spec_.joints.size()); }

  /// Vertex positions for a pose vector (bend_0, azimuth_0, bend_1, ...).
  std::vector<Vec3> pose(const Vector& params) const;
  mesh::Mesh pose_mesh(const Vector& params) const { return mesh::with_vertices(rest_, pose(params)); }

  Vector sample_parameters(std::mt19937_64& rng) const;

  /// Vertices grouped by the link they follow (caps join the end links).
  geom::DomainMap link_domains() const;

 private:
  struct Ring {
    double s = 0.0;         // arc length along the centre line, clamped to [0, L]
    double axial = 0.0;     // offset along the tangent (caps)
    double scale = 1.0;     // ring radius as a fraction of the tube radius
    bool pole = false;
  };

  std::vector<Vec3> build(const Vector& params) const;

  TubeChainSpec spec_;
  std::vector<Ring> rings_;
  std::vector<double> jointPositions_;
  double length_ = 0.0;
  int bodyRings_ = 0;
  mesh::Mesh rest_;
};

struct SynthResult {
  std::vector<mesh::Mesh> meshes;
  std::vector<Vector> poses;
  std::vector<geom::CollisionReport> reports;
  std::size_t collisionFree = 0;

  double collision_free_fraction() const {
    return meshes.empty() ? 0.0 : static_cast<double>(collisionFree) / static_cast<double>(meshes.size());
  }
  /// The autoencoder training set: collision-free poses only.
  std::vector<mesh::Mesh> training_meshes() const;
};

/// Samples n poses, labels each with the oracle and validates manifoldness.
/// Throws kConfig when n > 0 and no sampled pose self-collides.
SynthResult synth_dataset(const PoseFamily& family, std::size_t n, std::uint64_t seed);

/// Writes rest.obj, pose_XXXXX.obj and manifest.json into `dir`.
void write_dataset(const std::string& dir, const PoseFamily& family, const SynthResult& result,
                   std::uint64_t seed);

struct StoredDataset {
  mesh::Mesh rest;
  std::vector<mesh::Mesh> meshes;  // all poses
  std::vector<int> labels;
  std::string family;
};

StoredDataset read_dataset(const std::string& dir);

}  // namespace ncd::datagen
