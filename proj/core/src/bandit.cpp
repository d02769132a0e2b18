#include "adaptvo/bandit.hpp"

#include <algorithm>

#include "adaptvo/error.hpp"
#include "adaptvo/policy.hpp"

namespace adaptvo {
namespace {

FeatureMap to_map(const std::vector<float>& thumb) {
  if (thumb.size() != static_cast<std::size_t>(kEncoderInputSize) * kEncoderInputSize)
    throw Error(ErrorCode::DimensionMismatch, "bandit thumbnail must be 64x64");
  FeatureMap m{1, kEncoderInputSize, {}};
  m.data.assign(thumb.begin(), thumb.end());
  return m;
}

}  // namespace

void BanditConfig::validate() const {
  if (batch < 1) throw Error(ErrorCode::InvalidArgument, "bandit batch must be >= 1");
  if (replay_capacity < batch) throw Error(ErrorCode::InvalidArgument, "replay capacity must be >= batch");
  if (gradient_steps < 0 || transitions_per_step < 0 || warmup_transitions < 0)
    throw Error(ErrorCode::InvalidArgument, "bandit step counts must be >= 0");
  if (!(lr > 0.0)) throw Error(ErrorCode::InvalidArgument, "bandit lr must be > 0");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::InvalidArgument, "replay capacity must be >= 1");
}

void ReplayBuffer::push(BanditTransition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

TransitionSource tracking_transition_source(const std::vector<TrainingScene>& scenes, const EvalConfig& config,
                                            double worst_reward) {
  std::vector<const TrainingScene*> usable;
  for (const auto& s : scenes)
    if (s.frames.size() >= 2) usable.push_back(&s);
  if (usable.empty()) throw Error(ErrorCode::EmptyInput, "bandit pretraining needs a scene with >= 2 frames");
  return [usable, config, worst_reward](Rng& rng) {
    const TrainingScene& scene = *usable[std::uniform_int_distribution<std::size_t>(0, usable.size() - 1)(rng)];
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, scene.frames.size() - 2)(rng);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    BanditTransition t;
    t.action = Eigen::Vector2d(u(rng), u(rng));
    const FrontendParams params = map_action(Eigen::Vector3d(t.action(0), t.action(1), 0.0));

    TrackerState state;
    evaluate_step(state, scene.frames, k, params, config);
    // A two-frame sequence so the drift of the second step uses flow k -> k+1.
    const std::vector<SequenceFrame> pair{scene.frames[k], scene.frames[k + 1]};
    const FrameOutcome o = evaluate_step(state, pair, 1, params, config);
    t.reward = o.reward.drift_count > 0 ? std::max(-o.reward.mean_drift_px, worst_reward) : worst_reward;

    const FeatureMap thumb = encoder_input(scene.frames[k].image);
    t.thumbnail.assign(thumb.data.begin(), thumb.data.end());
    return t;
  };
}

MlpNet make_bandit_critic(const BanditConfig& config, Rng& rng) {
  std::vector<int> sizes{kEncoderLatentDim + 2};
  sizes.insert(sizes.end(), config.critic_hidden.begin(), config.critic_hidden.end());
  sizes.push_back(1);
  return MlpNet::random(sizes, rng, Activation::Tanh, 1.0);
}

double bandit_predict(const ConvEncoder& encoder, const MlpNet& critic, const BanditTransition& t) {
  Eigen::VectorXd in(kEncoderLatentDim + 2);
  in << encode_thumbnail(to_map(t.thumbnail), encoder), t.action;
  return mlp_forward(critic, in)(0);
}

BanditResult pretrain_encoder_bandit(const TransitionSource& source, ConvEncoder encoder, MlpNet critic,
                                     const BanditConfig& config) {
  config.validate();
  if (critic.input_dim() != kEncoderLatentDim + 2 || critic.output_dim() != 1)
    throw Error(ErrorCode::DimensionMismatch, "bandit critic must map latent + 2-d action to a scalar");
  Rng rng(mix_seed(config.seed, 0xBA4D17ULL));
  ReplayBuffer replay(static_cast<std::size_t>(config.replay_capacity));
  BanditResult res;
  AdamState enc_opt, critic_opt;
  const int warmup = std::max(config.warmup_transitions, 1);
  for (int i = 0; i < warmup; ++i) replay.push(source(rng));
  res.max_replay_size = replay.size();

  for (int step = 0; step < config.gradient_steps; ++step) {
    for (int i = 0; i < config.transitions_per_step; ++i) replay.push(source(rng));
    res.max_replay_size = std::max(res.max_replay_size, replay.size());
    const int b = config.batch;
    std::uniform_int_distribution<std::size_t> pick(0, replay.size() - 1);
    std::vector<std::size_t> idx(static_cast<std::size_t>(b));
    for (auto& i : idx) i = pick(rng);

    std::vector<EncoderCache> caches(static_cast<std::size_t>(b));
    Eigen::MatrixXd in(kEncoderLatentDim + 2, b);
    Eigen::VectorXd target(b);
    for (int j = 0; j < b; ++j) {
      const BanditTransition& t = replay[idx[static_cast<std::size_t>(j)]];
      in.col(j) << encode_thumbnail(to_map(t.thumbnail), encoder, &caches[static_cast<std::size_t>(j)]), t.action;
      target(j) = t.reward;
    }
    MlpCache cache;
    const Eigen::MatrixXd pred = mlp_forward(critic, in, &cache);
    const Eigen::RowVectorXd err = pred.row(0) - target.transpose();
    res.loss_history.push_back(err.squaredNorm() / b);
    const Eigen::MatrixXd dpred = 2.0 * err / b;
    const MlpGrads g = mlp_backward(critic, cache, dpred);

    Eigen::VectorXd cp = flatten(critic);
    adam_step(cp, flatten(g), critic_opt, config.lr);
    unflatten(critic, cp);

    if (!config.freeze_encoder) {
      Eigen::VectorXd eg = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(encoder.num_params()));
      for (int j = 0; j < b; ++j)
        encoder_backward(encoder, caches[static_cast<std::size_t>(j)], g.input.col(j).head(kEncoderLatentDim), eg);
      Eigen::VectorXd ep = flatten(encoder);
      adam_step(ep, eg, enc_opt, config.lr);
      unflatten(encoder, ep);
    }
  }
  res.encoder = std::move(encoder);
  res.critic = std::move(critic);
  res.replay_size = replay.size();
  return res;
}

}  // namespace adaptvo
