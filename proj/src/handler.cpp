// SPDX-License-Identifier: Apache-2.0
#include "ncd/handler.hpp"

#include <json.hpp>

#include <cmath>

namespace ncd::handler {

ScalarFunction augmented_lagrangian(const ScalarFunction& objective, const ScalarFunction& constraint, double mu,
                                    double rho) {
  return [=](const Vector& z, Vector* grad) {
    Vector ge, gc;
    const double e = objective(z, grad ? &ge : nullptr);
    const double c = constraint(z, grad ? &gc : nullptr);
    const double psi = std::max(0.0, c);
    if (grad) *grad = psi > 0.0 ? Vector(ge + (mu + rho * psi) * gc) : ge;
    return e + mu * psi + 0.5 * rho * psi * psi;
  };
}

namespace {

void check_finite(double v, const Vector& g, const char* what) {
  if (!std::isfinite(v) || !g.allFinite())
    throw Error(ErrorCode::kNumerical, std::string("non-finite ") + what + " in the collision handler");
}

/// Gradient descent with a Barzilai-Borwein trial step and Armijo backtracking.
int minimise(const ScalarFunction& f, Vector& z, const AlmConfig& config) {
  Vector g;
  double value = f(z, &g);
  check_finite(value, g, "augmented Lagrangian");
  Vector prevZ, prevG;
  double step = 1.0 / std::max(1.0, g.norm());
  int it = 0;
  for (; it < config.maxInner; ++it) {
    if (g.norm() <= config.innerTolerance * (1.0 + z.norm())) break;
    if (it > 0) {
      const Vector s = z - prevZ, y = g - prevG;
      const double sy = s.dot(y);
      step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * step;
    }
    Vector next, nextG;
    double nextValue = value;
    bool accepted = false;
    for (int b = 0; b < 60; ++b, step *= 0.5) {
      next = z - step * g;
      nextValue = f(next, &nextG);
      if (std::isfinite(nextValue) && nextValue <= value - 1e-4 * step * g.squaredNorm()) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    check_finite(nextValue, nextG, "augmented Lagrangian");
    prevZ = z;
    prevG = g;
    z = next;
    g = nextG;
    value = nextValue;
  }
  return it;
}

}  // namespace

AlmResult alm_solve(const Vector& start, const ScalarFunction& objective, const ScalarFunction& constraint,
                    const AlmConfig& config) {
  if (config.maxOuter <= 0 || config.maxInner < 0 || !(config.initialPenalty > 0.0) || config.penaltyGrowth < 1.0)
    throw Error(ErrorCode::kConfig, "ALM settings out of range");
  AlmResult result;
  result.z = start;
  const double c0 = constraint(start, nullptr);
  if (!std::isfinite(c0)) throw Error(ErrorCode::kNumerical, "non-finite constraint at the start point");
  result.initialViolation = std::max(0.0, c0);

  double mu = 0.0, rho = config.initialPenalty;
  double c = c0;
  for (int outer = 0; outer < config.maxOuter; ++outer) {
    const ScalarFunction lagrangian = augmented_lagrangian(objective, constraint, mu, rho);
    AlmIterate step;
    step.outer = outer;
    step.multiplier = mu;
    step.penalty = rho;
    step.innerSteps = minimise(lagrangian, result.z, config);
    c = constraint(result.z, nullptr);
    step.constraint = c;
    step.objective = objective(result.z, nullptr);
    if (!std::isfinite(c) || !std::isfinite(step.objective))
      throw Error(ErrorCode::kNumerical, "non-finite objective or constraint after outer iteration " + std::to_string(outer));
    result.trace.push_back(step);
    if (c <= config.feasibilityTolerance) break;
    mu += rho * std::max(0.0, c);
    rho = std::min(config.maxPenalty, rho * config.penaltyGrowth);
  }
  result.feasible = c <= config.feasibilityTolerance;
  result.bestEffort = !result.feasible;
  result.finalViolation = std::max(0.0, c);
  return result;
}

ScalarFunction latent_objective(const Vector& zUser) {
  return [zUser](const Vector& z, Vector* grad) {
    if (z.size() != zUser.size()) throw Error(ErrorCode::kDimensionMismatch, "latent objective: code length differs");
    const Vector d = z - zUser;
    if (grad) *grad = d;
    return 0.5 * d.squaredNorm();
  };
}

ScalarFunction cartesian_objective(const ae::Autoencoder& decoder, const Vector& userFeatures) {
  if (userFeatures.size() != decoder.feature_size())
    throw Error(ErrorCode::kDimensionMismatch, "cartesian objective: user mesh has the wrong vertex count");
  return [&decoder, userFeatures](const Vector& z, Vector* grad) {
    nn::Tape tape;
    const nn::Var code = grad ? tape.variable(z.transpose()) : tape.constant(z.transpose());
    const nn::Var diff = tape.sub(decoder.decode(tape, code), tape.constant(userFeatures.transpose()));
    const nn::Var e = tape.scale(tape.sum(tape.square(diff)), 0.5);
    if (grad) {
      tape.backward(e);
      *grad = tape.gradient(code).row(0).transpose();
    }
    return tape.scalar(e);
  };
}

ScalarFunction neural_constraint(const det::Detector& detector) {
  return [&detector](const Vector& z, Vector* grad) {
    if (!grad) return detector.probabilities(z.transpose())[0] - 0.5;
    auto [p, g] = detector.probabilities_and_gradients(z.transpose());
    *grad = g.row(0).transpose();
    return p[0] - 0.5;
  };
}

double relative_pd_reduction(double pdUser, double pdOut) {
  if (!(pdUser > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "relative PD reduction is undefined for a non-penetrating input");
  return (pdUser - std::max(0.0, pdOut)) / pdUser;
}

std::string trace_json(const AlmResult& result) {
  nlohmann::json j;
  j["feasible"] = result.feasible;
  j["best_effort"] = result.bestEffort;
  j["initial_violation"] = result.initialViolation;
  j["final_violation"] = result.finalViolation;
  j["outer"] = nlohmann::json::array();
  for (const AlmIterate& it : result.trace)
    j["outer"].push_back({{"iteration", it.outer},
                          {"mu", it.multiplier},
                          {"rho", it.penalty},
                          {"constraint", it.constraint},
                          {"prob", it.constraint + 0.5},
                          {"objective", it.objective},
                          {"inner_steps", it.innerSteps}});
  return j.dump();
}

}  // namespace ncd::handler
