#include "adaptvo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adaptvo/error.hpp"

namespace adaptvo {

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be in (0,1]");
  if (!(gae_lambda > 0.0 && gae_lambda <= 1.0)) throw Error(ErrorCode::InvalidArgument, "gae_lambda must be in (0,1]");
  if (!(clip > 0.0)) throw Error(ErrorCode::InvalidArgument, "clip must be > 0");
  if (epochs < 1 || minibatch < 1 || envs < 1 || rollout < 1)
    throw Error(ErrorCode::InvalidArgument, "epochs, minibatch, envs and rollout must be >= 1");
  if (static_cast<long long>(minibatch) > static_cast<long long>(envs) * rollout)
    throw Error(ErrorCode::InvalidArgument, "minibatch exceeds envs x rollout");
  if (!(lr_start > 0.0 && lr_end > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rates must be > 0");
  if (!(reward_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "reward_scale must be > 0");
}

GaeResult compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values, const Eigen::VectorXd& dones,
                      double bootstrap, double gamma, double lambda) {
  if (rewards.size() != values.size() || rewards.size() != dones.size())
    throw Error(ErrorCode::LengthMismatch, "rewards, values and dones differ in length");
  const Eigen::Index n = rewards.size();
  GaeResult g{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  double next_value = bootstrap, next_adv = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double live = 1.0 - dones(t);
    const double delta = rewards(t) + gamma * next_value * live - values(t);
    next_adv = delta + gamma * lambda * live * next_adv;
    g.advantages(t) = next_adv;
    next_value = values(t);
  }
  g.returns = g.advantages + values;
  return g;
}

Eigen::VectorXd normalize_advantages(const Eigen::VectorXd& a) {
  if (a.size() == 0) return a;
  const double mean = a.mean();
  const Eigen::VectorXd c = a.array() - mean;
  const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(a.size()));
  if (!(sd > 1e-12)) return Eigen::VectorXd::Zero(a.size());
  return c / sd;
}

double scheduled_lr(const PpoConfig& c, long long update, long long total) {
  if (total <= 1) return c.lr_start;
  const double f = std::clamp(static_cast<double>(update) / static_cast<double>(total - 1), 0.0, 1.0);
  return c.lr_start + (c.lr_end - c.lr_start) * f;
}

Eigen::VectorXd actor_params(const PolicyModel& m) {
  const Eigen::VectorXd w = flatten(m.actor);
  Eigen::VectorXd p(w.size() + kActionDim);
  p << w, m.log_std;
  return p;
}

void set_actor_params(PolicyModel& m, const Eigen::VectorXd& p) {
  const Eigen::Index n = p.size() - kActionDim;
  unflatten(m.actor, p.head(n));
  m.log_std = p.tail(kActionDim).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

namespace {

Eigen::VectorXd batch_log_probs(const Eigen::MatrixXd& actions, const Eigen::MatrixXd& mean,
                                const Eigen::Vector3d& log_std) {
  Eigen::VectorXd lp(actions.cols());
  for (Eigen::Index i = 0; i < actions.cols(); ++i)
    lp(i) = gaussian_log_prob(actions.col(i), mean.col(i), log_std);
  return lp;
}

template <typename Idx>
Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const Idx& idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = m.col(idx[static_cast<std::size_t>(j)]);
  return out;
}

}  // namespace

SurrogateTerm clipped_surrogate(double ratio, double advantage, double clip) {
  const double s1 = ratio * advantage;
  const double s2 = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage;
  // The gradient vanishes when the clipped branch is the active minimum.
  return s1 <= s2 ? SurrogateTerm{s1, s1} : SurrogateTerm{s2, 0.0};
}

PpoStats ppo_update(PolicyModel& model, AdamState& actor_opt, AdamState& critic_opt, const RolloutBuffer& buf,
                    const PpoConfig& config, double lr, std::uint64_t seed) {
  if (buf.size() == 0) throw Error(ErrorCode::EmptyBuffer, "rollout buffer is empty");
  const Eigen::Index n = static_cast<Eigen::Index>(buf.size());

  Eigen::VectorXd adv(n), ret(n);
  for (int e = 0; e < buf.envs; ++e) {
    const Eigen::Index o = static_cast<Eigen::Index>(e) * buf.steps;
    const GaeResult g = compute_gae(buf.rewards.segment(o, buf.steps) * config.reward_scale,
                                    buf.values.segment(o, buf.steps), buf.dones.segment(o, buf.steps),
                                    buf.bootstrap(e), config.gamma, config.gae_lambda);
    adv.segment(o, buf.steps) = g.advantages;
    ret.segment(o, buf.steps) = g.returns;
  }
  if (config.normalize_advantages) adv = normalize_advantages(adv);

  PpoStats stats;
  {
    const Eigen::MatrixXd pre = mlp_forward(model.actor, buf.obs);
    const Eigen::VectorXd lp = batch_log_probs(buf.actions, pre.array().tanh().matrix(), model.log_std);
    stats.initial_ratio_error = ((lp - buf.log_probs).array().exp() - 1.0).abs().maxCoeff();
  }

  Rng rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Eigen::Index mb = std::min<Eigen::Index>(std::max(1, config.minibatch), n);
  long long steps = 0;
  double clipped = 0.0, counted = 0.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += mb) {
      const Eigen::Index b = std::min(mb, n - start);
      const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + b);
      const Eigen::MatrixXd obs = gather(buf.obs, idx);
      const Eigen::MatrixXd cin = gather(buf.critic_in, idx);
      const Eigen::MatrixXd act = gather(buf.actions, idx);

      // Actor.
      MlpCache cache;
      const Eigen::MatrixXd pre = mlp_forward(model.actor, obs, &cache);
      const Eigen::MatrixXd mu = pre.array().tanh().matrix();
      const Eigen::Vector3d ls = model.log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
      const Eigen::Vector3d sigma = ls.array().exp().matrix();
      Eigen::MatrixXd dpre(kActionDim, b);
      Eigen::Vector3d dls = Eigen::Vector3d::Zero();
      double ploss = 0.0, kl = 0.0;
      for (Eigen::Index j = 0; j < b; ++j) {
        const Eigen::Index i = idx[static_cast<std::size_t>(j)];
        const Eigen::Vector3d z = ((act.col(j) - mu.col(j)).array() / sigma.array()).matrix();
        const double lp = gaussian_log_prob(act.col(j), mu.col(j), model.log_std);
        const double ratio = std::exp(lp - buf.log_probs(i));
        const SurrogateTerm term = clipped_surrogate(ratio, adv(i), config.clip);
        ploss -= term.objective;
        kl += (ratio - 1.0) - std::log(ratio);
        if (std::abs(ratio - 1.0) > config.clip) clipped += 1.0;
        counted += 1.0;
        const double g = -term.d_log_prob / static_cast<double>(b);  // d(loss)/d(log p)
        for (int d = 0; d < kActionDim; ++d) {
          dpre(d, j) = g * z(d) / sigma(d) * (1.0 - mu(d, j) * mu(d, j));
          dls(d) += g * (z(d) * z(d) - 1.0);
        }
      }
      for (int d = 0; d < kActionDim; ++d) {
        dls(d) -= config.entropy_coef;  // entropy = sum(log_std) + const
        if (model.log_std(d) < kLogStdMin || model.log_std(d) > kLogStdMax) dls(d) = 0.0;
      }
      const MlpGrads ag = mlp_backward(model.actor, cache, dpre);
      Eigen::VectorXd agrad(static_cast<Eigen::Index>(model.actor.num_params()) + kActionDim);
      agrad << flatten(ag), dls;
      Eigen::VectorXd ap = actor_params(model);
      adam_step(ap, agrad, actor_opt, lr);
      set_actor_params(model, ap);

      // Critic.
      MlpCache ccache;
      const Eigen::MatrixXd v = mlp_forward(model.critic, cin, &ccache);
      Eigen::MatrixXd dv(1, b);
      double vloss = 0.0;
      for (Eigen::Index j = 0; j < b; ++j) {
        const double err = v(0, j) - ret(idx[static_cast<std::size_t>(j)]);
        vloss += err * err;
        dv(0, j) = config.value_coef * 2.0 * err / static_cast<double>(b);
      }
      const MlpGrads cg = mlp_backward(model.critic, ccache, dv);
      Eigen::VectorXd cp = flatten(model.critic);
      adam_step(cp, flatten(cg), critic_opt, lr);
      unflatten(model.critic, cp);

      stats.policy_loss += ploss / static_cast<double>(b);
      stats.value_loss += vloss / static_cast<double>(b);
      stats.kl += kl / static_cast<double>(b);
      ++steps;
    }
  }
  stats.policy_loss /= static_cast<double>(steps);
  stats.value_loss /= static_cast<double>(steps);
  stats.kl /= static_cast<double>(steps);
  stats.clip_fraction = counted > 0 ? clipped / counted : 0.0;
  return stats;
}

}  // namespace adaptvo
