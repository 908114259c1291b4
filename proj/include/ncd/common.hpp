// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace ncd {

using Vec3 = Eigen::Vector3d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Three corner positions of a triangle.
using Triangle = std::array<Vec3, 3>;

/// Error categories. The C API and CLI map these onto status and exit codes.
enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kDegenerateInput,
  kParse,
  kNumerical,
  kConfig,
  kIo,
  kOracle,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

const char* to_string(ErrorCode code);

/// Runs body(i) for i in [0, count) on up to hardware_concurrency threads.
/// Each index is processed exactly once; callers write results by index so the
/// merged output does not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace ncd
