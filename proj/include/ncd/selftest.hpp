// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace ncd {

struct SelfTestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast internal consistency checks: feature round trip, BVH against brute
/// force, detector and decoder gradients, ALM on an analytic constraint and
/// config round trip. Takes a few seconds.
std::vector<SelfTestResult> run_selftest();

}  // namespace ncd
