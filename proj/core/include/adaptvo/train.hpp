#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "adaptvo/checkpoint.hpp"
#include "adaptvo/ppo.hpp"
#include "adaptvo/rollout.hpp"

namespace adaptvo {

struct TrainConfig {
  PpoConfig ppo;
  int updates = 300;  // total schedule length, including updates already done when resuming
  ModelShape shape;
  EvalConfig eval;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CurveRow {
  long long update = 0;
  double lr = 0.0;
  double mean_train_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double kl = 0.0;
};

inline constexpr const char* kCurveHeader = "update,lr,mean_train_reward,policy_loss,value_loss,clip_fraction,kl";
void write_curve_csv(const std::filesystem::path& path, const std::vector<CurveRow>& rows);

/// Fresh checkpoint: actor warm-started at `reference`, observation
/// normalizer fitted on reference-parameter runs over the training scenes.
Checkpoint init_training(const TrainConfig& config, const std::vector<TrainingScene>& scenes,
                         const FrontendParams& reference, std::optional<ConvEncoder> encoder = {});

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<CurveRow> curve;
};

using UpdateCallback = std::function<void(const CurveRow&, const Checkpoint&)>;

/// Runs updates start.update_index .. config.updates-1: collect_rollout over
/// envs assigned round-robin to scenes, GAE, PPO with the scheduled lr.
TrainResult train(const TrainConfig& config, const std::vector<TrainingScene>& scenes, Checkpoint start,
                  const UpdateCallback& on_update = {});

}  // namespace adaptvo
