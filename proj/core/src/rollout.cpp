#include "adaptvo/rollout.hpp"

#include <string>

#include "adaptvo/error.hpp"
#include "adaptvo/rng.hpp"

namespace adaptvo {

FrameOutcome evaluate_step(TrackerState& state, const std::vector<SequenceFrame>& frames, std::size_t k,
                           const FrontendParams& params, const EvalConfig& config) {
  const GrayImage& image = frames.at(k).image;
  const StepResult step = step_tracker(state, image, params, config.tracker);
  const FlowField* flow = nullptr;
  if (k > 0 && frames[k - 1].gt_flow_to_next) flow = &*frames[k - 1].gt_flow_to_next;
  FrameOutcome o;
  o.stats = step.stats;
  o.params = params;
  o.reward = frame_reward(state.tracks, flow, step.stats, params, image.width(), image.height(), config.reward,
                          config.cost);
  o.n_active = static_cast<int>(state.tracks.size());
  return o;
}

std::vector<FrameOutcome> run_static(const std::vector<SequenceFrame>& frames, const FrontendParams& params,
                                     const EvalConfig& config) {
  TrackerState state;
  std::vector<FrameOutcome> out;
  out.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) out.push_back(evaluate_step(state, frames, k, params, config));
  return out;
}

std::vector<FrameOutcome> run_policy(const std::vector<SequenceFrame>& frames, const PolicyModel& model,
                                     const EvalConfig& config) {
  TrackerState state;
  Eigen::Vector3d last = Eigen::Vector3d::Zero();
  std::vector<FrameOutcome> out;
  out.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const Eigen::VectorXd obs =
        model.normalizer.apply(build_observation(model, {&frames[k].image, state.cur_count, state.prev_count, last}));
    const Eigen::Vector3d action = policy_forward(model, obs).mean;
    out.push_back(evaluate_step(state, frames, k, map_action(action), config));
    last = action.cwiseMax(-1.0).cwiseMin(1.0);
  }
  return out;
}

std::vector<FrameRecord> to_records(const std::string& sequence, const std::vector<FrameOutcome>& outcomes,
                                    bool drift_available) {
  std::vector<FrameRecord> out;
  out.reserve(outcomes.size());
  for (std::size_t k = 0; k < outcomes.size(); ++k)
    out.push_back(make_record(sequence, static_cast<int>(k), outcomes[k].stats, outcomes[k].reward,
                              outcomes[k].n_active, drift_available));
  return out;
}

ReferenceRun make_reference_run(const TrainingScene& scene, const FrontendParams& params, const EvalConfig& config) {
  ReferenceRun run;
  run.params = params;
  for (const FrameOutcome& o : run_static(scene.frames, params, config)) run.rewards.push_back(o.reward);
  return run;
}

RolloutBuffer collect_rollout(std::vector<EnvState>& envs, const PolicyModel& model, const EvalConfig& config,
                              const RolloutOptions& options) {
  if (envs.empty()) throw Error(ErrorCode::EmptyInput, "no environments");
  if (options.steps < 1) throw Error(ErrorCode::InvalidArgument, "rollout steps must be >= 1");
  for (std::size_t e = 0; e < envs.size(); ++e) {
    if (!envs[e].scene || envs[e].scene->frames.empty())
      throw Error(ErrorCode::EmptySequence, "environment " + std::to_string(e) + " has no frames");
    if (!envs[e].reference || envs[e].reference->rewards.size() != envs[e].scene->frames.size())
      throw Error(ErrorCode::MissingReferenceRun, "environment " + std::to_string(e) + " (" + envs[e].scene->name +
                                                      ") lacks a reference run covering its frames");
  }

  RolloutBuffer buf;
  buf.envs = static_cast<int>(envs.size());
  buf.steps = options.steps;
  const Eigen::Index n = static_cast<Eigen::Index>(buf.size());
  buf.obs.resize(model.obs_dim(), n);
  buf.critic_in.resize(model.critic_dim(), n);
  buf.actions.resize(kActionDim, n);
  buf.log_probs.resize(n);
  buf.values.resize(n);
  buf.rewards.resize(n);
  buf.dones.resize(n);
  buf.bootstrap.resize(buf.envs);

  for (int e = 0; e < buf.envs; ++e) {
    EnvState& env = envs[static_cast<std::size_t>(e)];
    Rng rng(mix_seed(options.seed, {static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(options.update_index)}));
    const auto& frames = env.scene->frames;
    for (int t = 0; t < buf.steps; ++t) {
      if (env.step >= frames.size()) {
        env.tracker = TrackerState{};
        env.step = 0;
        env.last_action.setZero();
      }
      const std::size_t k = env.step;
      const Eigen::Index col = static_cast<Eigen::Index>(e) * buf.steps + t;
      const Eigen::VectorXd obs = model.normalizer.apply(
          build_observation(model, {&frames[k].image, env.tracker.cur_count, env.tracker.prev_count, env.last_action}));
      const Eigen::VectorXd cin = critic_input(model, obs, static_cast<int>(k));
      const PolicyOutput out = policy_forward(model, obs);
      const Eigen::Vector3d action = options.deterministic ? out.mean : sample_action(out, rng);

      buf.obs.col(col) = obs;
      buf.critic_in.col(col) = cin;
      buf.actions.col(col) = action;
      buf.log_probs(col) = gaussian_log_prob(action, out.mean, model.log_std);
      buf.values(col) = value_forward(model, cin);

      const FrameOutcome o = evaluate_step(env.tracker, frames, k, map_action(action), config);
      buf.rewards(col) = training_reward(o.reward, static_cast<int>(k), env.reference->rewards[k], static_cast<int>(k));
      env.last_action = action.cwiseMax(-1.0).cwiseMin(1.0);
      ++env.step;
      buf.dones(col) = env.step >= frames.size() ? 1.0 : 0.0;
    }
    if (env.step >= frames.size()) {
      buf.bootstrap(e) = 0.0;
    } else {
      const Eigen::VectorXd obs = model.normalizer.apply(build_observation(
          model, {&frames[env.step].image, env.tracker.cur_count, env.tracker.prev_count, env.last_action}));
      buf.bootstrap(e) = value_forward(model, critic_input(model, obs, static_cast<int>(env.step)));
    }
  }
  return buf;
}

}  // namespace adaptvo
