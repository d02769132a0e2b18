#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>

#include "adaptvo/encoder.hpp"
#include "adaptvo/frontend.hpp"
#include "adaptvo/image.hpp"
#include "adaptvo/nn.hpp"
#include "adaptvo/rng.hpp"

namespace adaptvo {

inline constexpr int kTextureStatsDim = 16;
inline constexpr int kFourierBands = 17;
inline constexpr int kActionDim = 3;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 1.0;

/// Layout: mean, std, gradient-magnitude mean, its 25/50/75/90th
/// percentiles, Laplacian variance, fraction of gradients above
/// 0.02/0.05/0.1, 4-bin intensity histogram, std of the 4x-downsampled image.
/// Gradients and the Laplacian are evaluated on interior pixels only.
Eigen::VectorXd texture_stats(const GrayImage& image);

/// [sin(2^k pi t), cos(2^k pi t)] for k < num_bands, t = frame_index / horizon
/// (all sines first, then all cosines).
Eigen::VectorXd fourier_features(int frame_index, int num_bands = kFourierBands, int horizon = 128);

/// Raw actions are clamped to [-1,1]. Rounding is half-down for the FAST
/// threshold and toward the smaller odd value for the patch size.
FrontendParams map_action(const Eigen::Vector3d& raw);
/// A raw vector that map_action sends back to `params`.
Eigen::Vector3d unmap_action(const FrontendParams& params);

enum class ObsMode { TextureStats, Encoder };
const char* to_string(ObsMode mode);
ObsMode obs_mode_from_string(const std::string& name);

/// Frozen per-dimension standardization of observations.
struct ObsNormalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static ObsNormalizer identity(int dim);
  /// Column-per-sample data; dimensions with std < 1e-6 keep std 1.
  static ObsNormalizer fit(const Eigen::MatrixXd& samples);
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  friend bool operator==(const ObsNormalizer&, const ObsNormalizer&) = default;
};

/// Everything needed at inference plus the privileged critic.
struct PolicyModel {
  ObsMode mode = ObsMode::TextureStats;
  int max_features = 400;
  int horizon = 128;
  ObsNormalizer normalizer;
  MlpNet actor;                                  // obs -> pre-tanh action mean
  Eigen::Vector3d log_std = Eigen::Vector3d::Constant(-1.5);
  MlpNet critic;                                 // obs + fourier -> value
  std::optional<ConvEncoder> encoder;            // required in Encoder mode

  int obs_dim() const;
  int critic_dim() const { return obs_dim() + 2 * kFourierBands; }

  friend bool operator==(const PolicyModel&, const PolicyModel&);
};

int observation_dim(ObsMode mode);

struct ObservationInput {
  const GrayImage* image = nullptr;
  int count_cur = 0;
  int count_prev = 0;
  Eigen::Vector3d last_action = Eigen::Vector3d::Zero();
};

/// Unnormalized observation: image code, the two feature counts divided by
/// max_features (clamped to [0,1]), then the previous raw action.
Eigen::VectorXd build_observation(const PolicyModel& model, const ObservationInput& input);

/// Normalized observation followed by the Fourier encoding of frame_index.
Eigen::VectorXd critic_input(const PolicyModel& model, const Eigen::VectorXd& normalized_obs, int frame_index);

struct PolicyOutput {
  Eigen::Vector3d mean;
  Eigen::Vector3d std;
};

/// `normalized_obs` has already passed through the model's normalizer.
PolicyOutput policy_forward(const PolicyModel& model, const Eigen::VectorXd& normalized_obs);
double value_forward(const PolicyModel& model, const Eigen::VectorXd& critic_in);

double gaussian_log_prob(const Eigen::Vector3d& action, const Eigen::Vector3d& mean, const Eigen::Vector3d& log_std);
Eigen::Vector3d sample_action(const PolicyOutput& out, Rng& rng);

struct ModelShape {
  ObsMode mode = ObsMode::TextureStats;
  std::vector<int> hidden = {256, 256};
  int max_features = 400;
  int horizon = 128;
  double init_log_std = -1.5;
};

/// Random actor and critic. When `warm_start` is given the actor's output
/// weights are shrunk and its bias set so the initial mean action maps to
/// those parameters.
PolicyModel make_model(const ModelShape& shape, Rng& rng, const std::optional<FrontendParams>& warm_start = {},
                       std::optional<ConvEncoder> encoder = {});

}  // namespace adaptvo
