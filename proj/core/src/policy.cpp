#include "adaptvo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "adaptvo/error.hpp"

namespace adaptvo {
namespace {

double mean_std(std::span<const float> v, double* std_out) {
  double s = 0.0;
  for (float x : v) s += x;
  const double m = v.empty() ? 0.0 : s / static_cast<double>(v.size());
  double q = 0.0;
  for (float x : v) q += (x - m) * (x - m);
  *std_out = v.empty() ? 0.0 : std::sqrt(q / static_cast<double>(v.size()));
  return m;
}

}  // namespace

Eigen::VectorXd texture_stats(const GrayImage& image) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(kTextureStatsDim);
  if (image.empty()) return s;
  const int w = image.width(), h = image.height();

  double sd = 0.0;
  s(0) = mean_std(image.data(), &sd);
  s(1) = sd;

  std::vector<double> mag;
  double lap_sum = 0.0, lap_sq = 0.0;
  if (w >= 3 && h >= 3) {
    mag.reserve(static_cast<std::size_t>(w - 2) * (h - 2));
    for (int y = 1; y < h - 1; ++y)
      for (int x = 1; x < w - 1; ++x) {
        const double c = image(x, y);
        const double gx = 0.5 * (static_cast<double>(image(x + 1, y)) - image(x - 1, y));
        const double gy = 0.5 * (static_cast<double>(image(x, y + 1)) - image(x, y - 1));
        mag.push_back(std::sqrt(gx * gx + gy * gy));
        const double lap = static_cast<double>(image(x + 1, y)) + image(x - 1, y) + image(x, y + 1) + image(x, y - 1) - 4 * c;
        lap_sum += lap;
        lap_sq += lap * lap;
      }
  }
  if (!mag.empty()) {
    const double n = static_cast<double>(mag.size());
    double msum = 0.0;
    int above[3] = {0, 0, 0};
    for (double m : mag) {
      msum += m;
      above[0] += m > 0.02;
      above[1] += m > 0.05;
      above[2] += m > 0.1;
    }
    s(2) = msum / n;
    // Type-7 quantiles via selection; ascending p lets each search start
    // where the previous one left off.
    const double ps[4] = {0.25, 0.5, 0.75, 0.9};
    auto first = mag.begin();
    for (int k = 0; k < 4; ++k) {
      const double h = (n - 1.0) * ps[k];
      const auto lo = static_cast<std::ptrdiff_t>(std::floor(h));
      const auto it = mag.begin() + lo;
      std::nth_element(first, it, mag.end());
      const double a = *it;
      const double b = lo + 1 < static_cast<std::ptrdiff_t>(mag.size()) ? *std::min_element(it + 1, mag.end()) : a;
      s(3 + k) = a + (h - static_cast<double>(lo)) * (b - a);
      first = it;
    }
    const double lm = lap_sum / n;
    s(7) = std::max(0.0, lap_sq / n - lm * lm);
    for (int k = 0; k < 3; ++k) s(8 + k) = above[k] / n;
  }

  int hist[4] = {0, 0, 0, 0};
  for (float v : image.data()) hist[std::clamp(static_cast<int>(v * 4.0f), 0, 3)]++;
  for (int k = 0; k < 4; ++k) s(11 + k) = hist[k] / static_cast<double>(image.size());

  const GrayImage small = resize_area(image, std::max(1, w / 4), std::max(1, h / 4));
  mean_std(small.data(), &sd);
  s(15) = sd;
  return s;
}

Eigen::VectorXd fourier_features(int frame_index, int num_bands, int horizon) {
  if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "Fourier horizon must be >= 1");
  if (num_bands < 0) throw Error(ErrorCode::InvalidArgument, "Fourier band count must be >= 0");
  Eigen::VectorXd f(2 * num_bands);
  const double t = static_cast<double>(frame_index) / horizon;
  for (int k = 0; k < num_bands; ++k) {
    const double a = std::ldexp(std::numbers::pi, k) * t;
    f(k) = std::sin(a);
    f(num_bands + k) = std::cos(a);
  }
  return f;
}

FrontendParams map_action(const Eigen::Vector3d& raw) {
  const Eigen::Vector3d r = raw.cwiseMax(-1.0).cwiseMin(1.0);
  FrontendParams p;
  const double f = 104.5 + 104.5 * r(0);
  p.fast_threshold = std::clamp(static_cast<int>(std::ceil(f - 0.5)), kFastThresholdMin, kFastThresholdMax);
  const double v = 22.0 + 19.0 * r(1);
  const int k = std::clamp(static_cast<int>(std::ceil((v - 1.0) / 2.0 - 0.5)), (kPatchSizeMin - 1) / 2,
                           (kPatchSizeMax - 1) / 2);
  p.klt_patch_size = 2 * k + 1;
  p.ransac_threshold = std::clamp(1.5 + 1.5 * r(2), kRansacThresholdMin, kRansacThresholdMax);
  return p;
}

Eigen::Vector3d unmap_action(const FrontendParams& params) {
  params.validate();
  return {(params.fast_threshold - 104.5) / 104.5, (params.klt_patch_size - 22.0) / 19.0,
          (params.ransac_threshold - 1.5) / 1.5};
}

const char* to_string(ObsMode mode) { return mode == ObsMode::Encoder ? "encoder" : "texture"; }

ObsMode obs_mode_from_string(const std::string& name) {
  if (name == "texture") return ObsMode::TextureStats;
  if (name == "encoder") return ObsMode::Encoder;
  throw Error(ErrorCode::InvalidArgument, "unknown observation mode '" + name + "'");
}

ObsNormalizer ObsNormalizer::identity(int dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

ObsNormalizer ObsNormalizer::fit(const Eigen::MatrixXd& samples) {
  if (samples.cols() == 0) throw Error(ErrorCode::EmptyInput, "cannot fit a normalizer to zero samples");
  ObsNormalizer n;
  n.mean = samples.rowwise().mean();
  n.std = ((samples.colwise() - n.mean).array().square().rowwise().mean()).sqrt().matrix();
  for (Eigen::Index i = 0; i < n.std.size(); ++i)
    if (!(n.std(i) >= 1e-6)) n.std(i) = 1.0;
  return n;
}

Eigen::VectorXd ObsNormalizer::apply(const Eigen::VectorXd& x) const {
  if (x.size() != mean.size()) throw Error(ErrorCode::DimensionMismatch, "normalizer dimension differs");
  return ((x - mean).array() / std.array()).matrix();
}

int observation_dim(ObsMode mode) {
  return (mode == ObsMode::Encoder ? kEncoderLatentDim : kTextureStatsDim) + 2 + kActionDim;
}

int PolicyModel::obs_dim() const { return observation_dim(mode); }

bool operator==(const PolicyModel& a, const PolicyModel& b) {
  return a.mode == b.mode && a.max_features == b.max_features && a.horizon == b.horizon &&
         a.normalizer == b.normalizer && a.actor == b.actor && a.log_std == b.log_std && a.critic == b.critic &&
         a.encoder == b.encoder;
}

Eigen::VectorXd build_observation(const PolicyModel& model, const ObservationInput& in) {
  if (!in.image) throw Error(ErrorCode::InvalidArgument, "observation needs an image");
  Eigen::VectorXd code;
  if (model.mode == ObsMode::Encoder) {
    if (!model.encoder) throw Error(ErrorCode::InvalidArgument, "encoder observation mode without an encoder");
    code = encode_image(*in.image, *model.encoder);
  } else {
    code = texture_stats(*in.image);
  }
  Eigen::VectorXd obs(code.size() + 2 + kActionDim);
  obs.head(code.size()) = code;
  const double cap = std::max(1, model.max_features);
  obs(code.size()) = std::clamp(in.count_cur / cap, 0.0, 1.0);
  obs(code.size() + 1) = std::clamp(in.count_prev / cap, 0.0, 1.0);
  obs.tail(kActionDim) = in.last_action;
  return obs;
}

Eigen::VectorXd critic_input(const PolicyModel& model, const Eigen::VectorXd& normalized_obs, int frame_index) {
  Eigen::VectorXd c(normalized_obs.size() + 2 * kFourierBands);
  c << normalized_obs, fourier_features(frame_index, kFourierBands, model.horizon);
  return c;
}

PolicyOutput policy_forward(const PolicyModel& model, const Eigen::VectorXd& normalized_obs) {
  if (normalized_obs.size() != model.actor.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "observation dimension differs from the actor input");
  const Eigen::VectorXd pre = mlp_forward(model.actor, normalized_obs);
  PolicyOutput out;
  out.mean = pre.array().tanh().matrix();
  out.std = model.log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax).array().exp().matrix();
  return out;
}

double value_forward(const PolicyModel& model, const Eigen::VectorXd& critic_in) {
  if (critic_in.size() != model.critic.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "critic input dimension differs");
  return mlp_forward(model.critic, critic_in)(0);
}

double gaussian_log_prob(const Eigen::Vector3d& action, const Eigen::Vector3d& mean, const Eigen::Vector3d& log_std) {
  const Eigen::Vector3d ls = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  const Eigen::Vector3d z = ((action - mean).array() / ls.array().exp()).matrix();
  return -0.5 * z.squaredNorm() - ls.sum() - 0.5 * kActionDim * std::log(2.0 * std::numbers::pi);
}

Eigen::Vector3d sample_action(const PolicyOutput& out, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d a;
  for (int i = 0; i < kActionDim; ++i) a(i) = out.mean(i) + out.std(i) * n(rng);
  return a;
}

PolicyModel make_model(const ModelShape& shape, Rng& rng, const std::optional<FrontendParams>& warm_start,
                       std::optional<ConvEncoder> encoder) {
  PolicyModel m;
  m.mode = shape.mode;
  m.max_features = shape.max_features;
  m.horizon = shape.horizon;
  m.encoder = std::move(encoder);
  if (m.mode == ObsMode::Encoder && !m.encoder)
    throw Error(ErrorCode::InvalidArgument, "encoder observation mode needs an encoder");
  m.normalizer = ObsNormalizer::identity(m.obs_dim());

  std::vector<int> actor_sizes{m.obs_dim()};
  actor_sizes.insert(actor_sizes.end(), shape.hidden.begin(), shape.hidden.end());
  actor_sizes.push_back(kActionDim);
  std::vector<int> critic_sizes{m.critic_dim()};
  critic_sizes.insert(critic_sizes.end(), shape.hidden.begin(), shape.hidden.end());
  critic_sizes.push_back(1);

  m.actor = MlpNet::random(actor_sizes, rng, Activation::Tanh, 0.01);
  m.critic = MlpNet::random(critic_sizes, rng, Activation::Tanh, 1.0);
  m.log_std = Eigen::Vector3d::Constant(std::clamp(shape.init_log_std, kLogStdMin, kLogStdMax));
  if (warm_start) {
    // tanh(bias) lands on the reference action; the tiny output weights keep
    // the initial mean close to it for every observation.
    const Eigen::Vector3d raw = unmap_action(*warm_start).cwiseMax(-0.999).cwiseMin(0.999);
    m.actor.biases.back() = raw.array().atanh().matrix();
  }
  return m;
}

}  // namespace adaptvo
