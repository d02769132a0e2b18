#include "adaptvo/pso.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <tuple>

#include "adaptvo/error.hpp"
#include "adaptvo/policy.hpp"
#include "adaptvo/rng.hpp"

namespace adaptvo {

void PsoConfig::validate() const {
  if (particles < 2) throw Error(ErrorCode::InvalidArgument, "PSO needs at least 2 particles");
  if (iterations < 0) throw Error(ErrorCode::InvalidArgument, "PSO iterations must be >= 0");
  if (static_cast<int>(initial_positions.size()) > particles)
    throw Error(ErrorCode::InvalidArgument, "more initial positions than particles");
}

PsoResult pso_maximize(const std::function<double(const Eigen::VectorXd&)>& objective, const Eigen::VectorXd& lower,
                       const Eigen::VectorXd& upper, const PsoConfig& config) {
  config.validate();
  const Eigen::Index dim = lower.size();
  if (upper.size() != dim || dim == 0) throw Error(ErrorCode::DimensionMismatch, "PSO bounds differ in dimension");
  if (!((upper - lower).array() >= 0.0).all()) throw Error(ErrorCode::InvalidArgument, "PSO bounds are inverted");
  const Eigen::VectorXd vmax = 0.5 * (upper - lower);

  Rng rng(mix_seed(config.seed, 0x9505ULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int np = config.particles;
  std::vector<Eigen::VectorXd> x(np), v(np), pbest(np);
  std::vector<double> pscore(np);
  PsoResult res;

  for (int i = 0; i < np; ++i) {
    x[i].resize(dim);
    v[i].resize(dim);
    for (Eigen::Index d = 0; d < dim; ++d) {
      x[i](d) = lower(d) + unit(rng) * (upper(d) - lower(d));
      v[i](d) = (2.0 * unit(rng) - 1.0) * vmax(d);
    }
    if (i < static_cast<int>(config.initial_positions.size())) {
      if (config.initial_positions[i].size() != dim)
        throw Error(ErrorCode::DimensionMismatch, "initial position dimension differs");
      x[i] = config.initial_positions[i].cwiseMax(lower).cwiseMin(upper);
      v[i].setZero();
    }
    pbest[i] = x[i];
    pscore[i] = objective(x[i]);
    ++res.evaluations;
  }
  int g = static_cast<int>(std::max_element(pscore.begin(), pscore.end()) - pscore.begin());
  res.best_position = pbest[g];
  res.best_score = pscore[g];
  res.best_history.push_back(res.best_score);

  for (int it = 0; it < config.iterations; ++it) {
    for (int i = 0; i < np; ++i) {
      for (Eigen::Index d = 0; d < dim; ++d) {
        const double r1 = unit(rng), r2 = unit(rng);
        double vel = config.inertia * v[i](d) + config.cognitive * r1 * (pbest[i](d) - x[i](d)) +
                     config.social * r2 * (res.best_position(d) - x[i](d));
        vel = std::clamp(vel, -vmax(d), vmax(d));
        double pos = x[i](d) + vel;
        if (pos < lower(d) || pos > upper(d)) {
          pos = std::clamp(pos, lower(d), upper(d));
          vel = 0.0;
        }
        v[i](d) = vel;
        x[i](d) = pos;
      }
      const double s = objective(x[i]);
      ++res.evaluations;
      if (s > pscore[i]) {
        pscore[i] = s;
        pbest[i] = x[i];
      }
    }
    // Synchronous global-best update after the whole swarm moved.
    for (int i = 0; i < np; ++i)
      if (pscore[i] > res.best_score) {
        res.best_score = pscore[i];
        res.best_position = pbest[i];
      }
    res.best_history.push_back(res.best_score);
  }
  return res;
}

PsoParamsResult pso_optimize(const std::function<double(const FrontendParams&)>& objective, const PsoConfig& config) {
  using Key = std::tuple<int, int, std::uint64_t>;
  std::map<Key, double> cache;
  auto wrapped = [&](const Eigen::VectorXd& raw) {
    const FrontendParams p = map_action(Eigen::Vector3d(raw(0), raw(1), raw(2)));
    const Key key{p.fast_threshold, p.klt_patch_size, std::bit_cast<std::uint64_t>(p.ransac_threshold)};
    if (const auto it = cache.find(key); it != cache.end()) return it->second;
    const double s = objective(p);
    cache.emplace(key, s);
    return s;
  };
  const PsoResult r =
      pso_maximize(wrapped, Eigen::VectorXd::Constant(3, -1.0), Eigen::VectorXd::Constant(3, 1.0), config);
  PsoParamsResult out;
  out.raw = Eigen::Vector3d(r.best_position(0), r.best_position(1), r.best_position(2));
  out.params = map_action(out.raw);
  out.score = r.best_score;
  out.best_history = r.best_history;
  out.evaluations = static_cast<long long>(cache.size());
  return out;
}

}  // namespace adaptvo
