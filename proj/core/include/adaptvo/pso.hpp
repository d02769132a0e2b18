#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "adaptvo/frontend.hpp"

namespace adaptvo {

struct PsoConfig {
  int particles = 24;
  int iterations = 60;
  double inertia = 0.7298;
  double cognitive = 1.49618;
  double social = 1.49618;
  std::uint64_t seed = 0;
  std::vector<Eigen::VectorXd> initial_positions;  // optional; remaining particles start uniformly

  void validate() const;
};

struct PsoResult {
  Eigen::VectorXd best_position;
  double best_score = 0.0;
  std::vector<double> best_history;  // global best after initialization and after each iteration
  long long evaluations = 0;
};

/// Global-best PSO maximizing `objective` over the box [lower, upper].
/// Velocities are clamped to half the box extent per axis; positions are
/// clamped to the box and the offending velocity component zeroed.
PsoResult pso_maximize(const std::function<double(const Eigen::VectorXd&)>& objective, const Eigen::VectorXd& lower,
                       const Eigen::VectorXd& upper, const PsoConfig& config);

struct PsoParamsResult {
  FrontendParams params;
  Eigen::Vector3d raw;
  double score = 0.0;
  std::vector<double> best_history;
  long long evaluations = 0;  // distinct parameter sets scored
};

/// Searches the raw action box [-1,1]^3; each particle is scored after the
/// policy's action quantization, and scores are cached per parameter set.
PsoParamsResult pso_optimize(const std::function<double(const FrontendParams&)>& objective, const PsoConfig& config);

}  // namespace adaptvo
