#include "adaptvo/train.hpp"

#include <cstdio>
#include <fstream>

#include "adaptvo/error.hpp"

namespace adaptvo {

void TrainConfig::validate() const {
  ppo.validate();
  if (updates < 0) throw Error(ErrorCode::InvalidArgument, "updates must be >= 0");
  eval.reward.validate();
  eval.cost.validate();
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurveRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << kCurveHeader << '\n';
  char buf[512];
  for (const CurveRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.update, r.lr, r.mean_train_reward,
                  r.policy_loss, r.value_loss, r.clip_fraction, r.kl);
    out << buf;
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Checkpoint init_training(const TrainConfig& config, const std::vector<TrainingScene>& scenes,
                         const FrontendParams& reference, std::optional<ConvEncoder> encoder) {
  config.validate();
  reference.validate();
  if (scenes.empty()) throw Error(ErrorCode::EmptyInput, "training needs at least one scene");
  Rng rng(mix_seed(config.seed, 0x1417ULL));
  Checkpoint c;
  c.model = make_model(config.shape, rng, reference, std::move(encoder));
  c.reference = reference;

  // Observations seen while the reference parameters drive the tracker.
  const Eigen::Vector3d ref_action = unmap_action(reference);
  std::vector<Eigen::VectorXd> samples;
  for (const TrainingScene& s : scenes) {
    TrackerState state;
    for (std::size_t k = 0; k < s.frames.size(); ++k) {
      samples.push_back(
          build_observation(c.model, {&s.frames[k].image, state.cur_count, state.prev_count, ref_action}));
      step_tracker(state, s.frames[k].image, reference, config.eval.tracker);
    }
  }
  if (samples.empty()) throw Error(ErrorCode::EmptySequence, "training scenes have no frames");
  Eigen::MatrixXd m(samples.front().size(), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = samples[i];
  c.model.normalizer = ObsNormalizer::fit(m);
  return c;
}

TrainResult train(const TrainConfig& config, const std::vector<TrainingScene>& scenes, Checkpoint start,
                  const UpdateCallback& on_update) {
  config.validate();
  if (scenes.empty()) throw Error(ErrorCode::EmptyInput, "training needs at least one scene");
  if (!start.reference) throw Error(ErrorCode::MissingReferenceRun, "checkpoint carries no reference parameters");

  std::vector<ReferenceRun> refs;
  refs.reserve(scenes.size());
  for (const TrainingScene& s : scenes) refs.push_back(make_reference_run(s, *start.reference, config.eval));

  std::vector<EnvState> envs(static_cast<std::size_t>(config.ppo.envs));
  for (std::size_t e = 0; e < envs.size(); ++e) {
    envs[e].scene = &scenes[e % scenes.size()];
    envs[e].reference = &refs[e % scenes.size()];
  }

  TrainResult res;
  res.checkpoint = std::move(start);
  Checkpoint& ck = res.checkpoint;
  for (long long u = ck.update_index; u < config.updates; ++u) {
    RolloutOptions ro;
    ro.steps = config.ppo.rollout;
    ro.seed = mix_seed(config.seed, 0x2011ULL);
    ro.update_index = u;
    const RolloutBuffer buf = collect_rollout(envs, ck.model, config.eval, ro);

    const double lr = scheduled_lr(config.ppo, u, config.updates);
    const PpoStats st = ppo_update(ck.model, ck.actor_opt, ck.critic_opt, buf, config.ppo, lr,
                                   mix_seed(config.seed, {0x990ULL, static_cast<std::uint64_t>(u)}));
    ck.update_index = u + 1;

    CurveRow row{u, lr, buf.rewards.mean(), st.policy_loss, st.value_loss, st.clip_fraction, st.kl};
    res.curve.push_back(row);
    if (on_update) on_update(row, ck);
  }
  return res;
}

}  // namespace adaptvo
