#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "adaptvo/nn.hpp"
#include "adaptvo/policy.hpp"
#include "adaptvo/rollout.hpp"

namespace adaptvo {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 20;
  int minibatch = 256;  // samples per gradient step
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  int envs = 8;
  int rollout = 128;
  double lr_start = 3e-4;
  double lr_end = 3e-5;
  bool normalize_advantages = true;
  double reward_scale = 0.01;  // applied to training rewards before GAE

  void validate() const;
};

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

/// delta_t = r_t + gamma v_{t+1} (1 - done_t) - v_t, A_t = delta_t + gamma lambda (1 - done_t) A_{t+1};
/// v_T is `bootstrap`.
GaeResult compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values, const Eigen::VectorXd& dones,
                      double bootstrap, double gamma, double lambda);

/// Zero mean, unit (population) std; a constant vector maps to zeros.
Eigen::VectorXd normalize_advantages(const Eigen::VectorXd& advantages);

/// Linear decay from lr_start at update 0 to lr_end at update total-1.
double scheduled_lr(const PpoConfig& config, long long update, long long total_updates);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  double initial_ratio_error = 0.0;  // max |ratio - 1| before the first step
};

struct SurrogateTerm {
  double objective = 0.0;   // min(r A, clip(r, 1-eps, 1+eps) A)
  double d_log_prob = 0.0;  // derivative of the objective w.r.t. log pi (r = exp(log pi - log pi_old))
};
SurrogateTerm clipped_surrogate(double ratio, double advantage, double clip);

/// Clipped-surrogate update of actor, log-std and critic in place.
PpoStats ppo_update(PolicyModel& model, AdamState& actor_opt, AdamState& critic_opt, const RolloutBuffer& buffer,
                    const PpoConfig& config, double lr, std::uint64_t seed);

/// Actor parameters followed by the three log-std entries.
Eigen::VectorXd actor_params(const PolicyModel& model);
void set_actor_params(PolicyModel& model, const Eigen::VectorXd& params);

}  // namespace adaptvo
