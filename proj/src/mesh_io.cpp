// SPDX-License-Identifier: Apache-2.0
#include "ncd/mesh.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ncd::mesh {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::kParse, "obj line " + std::to_string(line) + ": " + msg);
}

}  // namespace

Mesh read_obj(std::istream& in) {
  Mesh mesh;
  std::string raw;
  std::size_t lineNo = 0;
  while (std::getline(in, raw)) {
    ++lineNo;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::istringstream line(raw);
    std::string tag;
    if (!(line >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(line >> p.x() >> p.y() >> p.z())) parse_error(lineNo, "vertex needs three coordinates");
      std::string extra;
      if (line >> extra) parse_error(lineNo, "unexpected token '" + extra + "' after vertex");
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      Face f{};
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        if (!(line >> tok)) parse_error(lineNo, "face needs exactly three vertex indices");
        std::size_t used = 0;
        long idx = 0;
        try {
          idx = std::stol(tok, &used);
        } catch (const std::exception&) {
          parse_error(lineNo, "bad vertex index '" + tok + "'");
        }
        if (used != tok.size() || idx < 1) parse_error(lineNo, "bad vertex index '" + tok + "'");
        f[k] = static_cast<int>(idx - 1);
      }
      std::string extra;
      if (line >> extra) parse_error(lineNo, "only triangular faces are supported");
      mesh.triangles.push_back(f);
    } else {
      parse_error(lineNo, "unsupported statement '" + tag + "'");
    }
  }
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    for (int idx : mesh.triangles[t])
      if (idx >= static_cast<int>(mesh.vertices.size()))
        throw Error(ErrorCode::kParse, "obj face " + std::to_string(t + 1) + " references a missing vertex");
  mesh.restVertices = mesh.vertices;
  return mesh;
}

Mesh read_obj_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_obj(in);
}

void write_obj(std::ostream& out, const std::vector<Vec3>& vertices, const std::vector<Face>& triangles) {
  out << std::setprecision(17);
  for (const Vec3& v : vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const Face& f : triangles) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

void write_obj_file(const std::string& path, const std::vector<Vec3>& vertices,
                    const std::vector<Face>& triangles) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  write_obj(out, vertices, triangles);
}

Mesh read_mesh_pair(const std::string& deformedPath, const std::string& restPath) {
  Mesh deformed = read_obj_file(deformedPath);
  Mesh rest = read_obj_file(restPath);
  if (deformed.triangles != rest.triangles || deformed.vertices.size() != rest.vertices.size())
    throw Error(ErrorCode::kDimensionMismatch, deformedPath + " and " + restPath + " differ in topology");
  deformed.restVertices = rest.vertices;
  return deformed;
}

namespace {
constexpr char kFeatureMagic[4] = {'N', 'C', 'D', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;
}  // namespace

void write_features(std::ostream& out, const FeatureVector& features) {
  const std::uint64_t length = static_cast<std::uint64_t>(features.values.size());
  out.write(kFeatureMagic, 4);
  out.write(reinterpret_cast<const char*>(&kFeatureVersion), sizeof kFeatureVersion);
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(reinterpret_cast<const char*>(features.values.data()),
            static_cast<std::streamsize>(length * sizeof(double)));
  if (!out) throw Error(ErrorCode::kIo, "failed to write feature vector");
}

FeatureVector read_features(std::istream& in) {
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&length), sizeof length);
  if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw Error(ErrorCode::kParse, "not a feature vector file");
  if (version != kFeatureVersion)
    throw Error(ErrorCode::kParse, "unsupported feature file version " + std::to_string(version));
  FeatureVector f;
  f.values.resize(static_cast<Eigen::Index>(length));
  in.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(length * sizeof(double)));
  if (!in) throw Error(ErrorCode::kParse, "truncated feature vector file");
  return f;
}

}  // namespace ncd::mesh
