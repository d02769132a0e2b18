#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adaptvo/frontend.hpp"
#include "adaptvo/policy.hpp"
#include "adaptvo/reward.hpp"
#include "adaptvo/sequence_io.hpp"

namespace adaptvo {

/// Tracker and reward settings shared by evaluation, reference runs and
/// training so that every path scores frames identically.
struct EvalConfig {
  TrackerConfig tracker;
  RewardConfig reward;
  CostModel cost;
};

/// A named sequence whose frames carry ground-truth flow to the next frame.
struct TrainingScene {
  std::string name;
  std::vector<SequenceFrame> frames;
  double fps = 80.0;
};

struct FrameOutcome {
  FrameStats stats;
  RewardBreakdown reward;
  FrontendParams params;
  int n_active = 0;
};

/// One tracker step on frame k of `frames` followed by its reward. Drift uses
/// the flow attached to frame k-1, when present.
FrameOutcome evaluate_step(TrackerState& state, const std::vector<SequenceFrame>& frames, std::size_t k,
                           const FrontendParams& params, const EvalConfig& config);

std::vector<FrameOutcome> run_static(const std::vector<SequenceFrame>& frames, const FrontendParams& params,
                                     const EvalConfig& config);

/// Deterministic policy (mean action) over a whole sequence.
std::vector<FrameOutcome> run_policy(const std::vector<SequenceFrame>& frames, const PolicyModel& model,
                                     const EvalConfig& config);

std::vector<FrameRecord> to_records(const std::string& sequence, const std::vector<FrameOutcome>& outcomes,
                                    bool drift_available);

/// Per-frame rewards of a fixed parameter set on one sequence.
struct ReferenceRun {
  FrontendParams params;
  std::vector<RewardBreakdown> rewards;
};

ReferenceRun make_reference_run(const TrainingScene& scene, const FrontendParams& params, const EvalConfig& config);

/// One simulated environment: a scene, the tracker running on it and the
/// position within the episode.
struct EnvState {
  const TrainingScene* scene = nullptr;
  const ReferenceRun* reference = nullptr;
  TrackerState tracker;
  std::size_t step = 0;
  Eigen::Vector3d last_action = Eigen::Vector3d::Zero();
};

struct RolloutBuffer {
  int envs = 0;
  int steps = 0;
  // Column (env * steps + t) holds one transition.
  Eigen::MatrixXd obs;          // normalized observations
  Eigen::MatrixXd critic_in;    // privileged critic inputs
  Eigen::MatrixXd actions;      // raw sampled actions (3 x N)
  Eigen::VectorXd log_probs;
  Eigen::VectorXd values;
  Eigen::VectorXd rewards;      // r_policy - r_reference
  Eigen::VectorXd dones;        // 1 when the episode ended after this step
  Eigen::VectorXd bootstrap;    // per env: value after the last step (0 when done)

  std::size_t size() const { return static_cast<std::size_t>(envs) * steps; }
  friend bool operator==(const RolloutBuffer&, const RolloutBuffer&) = default;
};

struct RolloutOptions {
  int steps = 128;
  bool deterministic = false;  // act with the mean instead of sampling
  std::uint64_t seed = 0;
  long long update_index = 0;  // keys the per-env random streams
};

/// Advances every environment `steps` times. Episodes restart from frame 0
/// when a scene runs out of frames.
RolloutBuffer collect_rollout(std::vector<EnvState>& envs, const PolicyModel& model, const EvalConfig& config,
                              const RolloutOptions& options);

}  // namespace adaptvo
