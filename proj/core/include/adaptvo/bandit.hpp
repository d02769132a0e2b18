#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "adaptvo/encoder.hpp"
#include "adaptvo/nn.hpp"
#include "adaptvo/rng.hpp"
#include "adaptvo/rollout.hpp"

namespace adaptvo {

struct BanditConfig {
  double lr = 3e-4;
  int batch = 64;
  int replay_capacity = 10000;
  int gradient_steps = 500;
  int transitions_per_step = 1;  // fresh transitions gathered before each gradient step
  int warmup_transitions = 64;   // gathered before the first gradient step
  std::vector<int> critic_hidden = {64, 64};
  bool freeze_encoder = false;
  double worst_reward = -10.0;   // reward floor, also used when no drift is measurable
  std::uint64_t seed = 0;

  void validate() const;
};

/// One single-step decision: the image seen, the normalized 2-d action
/// (FAST threshold, patch size) and the immediate reward.
struct BanditTransition {
  std::vector<float> thumbnail;  // 64x64, row-major
  Eigen::Vector2d action = Eigen::Vector2d::Zero();
  double reward = 0.0;
};

using TransitionSource = std::function<BanditTransition(Rng&)>;

/// Samples a frame pair, a random (FAST threshold, patch size) action, runs
/// detection on the first frame and tracking into the second, and rewards the
/// negative mean drift.
TransitionSource tracking_transition_source(const std::vector<TrainingScene>& scenes, const EvalConfig& config,
                                            double worst_reward = -10.0);

/// Fixed-capacity ring buffer of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(BanditTransition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const BanditTransition& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<BanditTransition> items_;
};

MlpNet make_bandit_critic(const BanditConfig& config, Rng& rng);

double bandit_predict(const ConvEncoder& encoder, const MlpNet& critic, const BanditTransition& t);

struct BanditResult {
  ConvEncoder encoder;
  MlpNet critic;
  std::vector<double> loss_history;  // minibatch MSE per gradient step
  std::size_t replay_size = 0;
  std::size_t max_replay_size = 0;
};

/// Regresses the immediate reward from (encoder latent, action) with squared
/// error; encoder gradients flow through the critic unless frozen.
BanditResult pretrain_encoder_bandit(const TransitionSource& source, ConvEncoder encoder, MlpNet critic,
                                     const BanditConfig& config);

}  // namespace adaptvo
