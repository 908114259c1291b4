// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ncd/autoencoder.hpp"
#include "ncd/detector.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ncd::handler {

/// Scalar function of a latent code; writes the gradient when `grad` is non-null.
using ScalarFunction = std::function<double(const Vector& z, Vector* grad)>;

struct AlmConfig {
  int maxOuter = 20;
  int maxInner = 500;
  double innerTolerance = 1e-6;
  double initialPenalty = 1.0;
  double penaltyGrowth = 10.0;
  double maxPenalty = 1e6;
  double feasibilityTolerance = 1e-6;
};

struct AlmIterate {
  int outer = 0;
  double multiplier = 0.0;
  double penalty = 0.0;
  double constraint = 0.0;  // c(z) at the end of the inner solve
  double objective = 0.0;
  int innerSteps = 0;
};

struct AlmResult {
  Vector z;
  bool feasible = false;
  bool bestEffort = false;  // set whenever the solver exits infeasible
  double initialViolation = 0.0;
  double finalViolation = 0.0;
  std::vector<AlmIterate> trace;
};

/// Minimises objective(z) subject to constraint(z) <= 0 from `start` with the
/// augmented term mu psi + rho/2 psi^2, psi = max(0, c). Inner problems are solved
/// by gradient descent with a Barzilai-Borwein trial step and Armijo backtracking.
/// Stops at the first outer iterate with c <= feasibilityTolerance.
AlmResult alm_solve(const Vector& start, const ScalarFunction& objective, const ScalarFunction& constraint,
                    const AlmConfig& config = {});

/// E + mu psi + rho/2 psi^2 as a function of z.
ScalarFunction augmented_lagrangian(const ScalarFunction& objective, const ScalarFunction& constraint, double mu,
                                    double rho);

/// |z - zUser|^2 / 2.
ScalarFunction latent_objective(const Vector& zUser);
/// |D(z) - f_user|^2 / 2 in canonical rest-frame coordinates, i.e. the squared
/// vertex distance between the decoded mesh and the user's mesh.
ScalarFunction cartesian_objective(const ae::Autoencoder& decoder, const Vector& userFeatures);
/// prob(z) - 0.5.
ScalarFunction neural_constraint(const det::Detector& detector);

/// (pdUser - max(pdOut, 0)) / pdUser. Throws kInvalidArgument when pdUser <= 0.
double relative_pd_reduction(double pdUser, double pdOut);

std::string trace_json(const AlmResult& result);

}  // namespace ncd::handler
