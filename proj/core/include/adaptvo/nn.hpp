#pragma once

#include <vector>

#include <Eigen/Core>

#include "adaptvo/rng.hpp"

namespace adaptvo {

enum class Activation { Tanh, Relu, Identity };

/// Fully connected network. Hidden layers use `hidden`; the output layer is
/// linear. Batches are column-major: one sample per column.
struct MlpNet {
  std::vector<int> sizes;  // [input, hidden..., output]
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;
  Activation hidden = Activation::Tanh;

  /// Zero-initialized network.
  static MlpNet zeros(std::vector<int> sizes, Activation hidden = Activation::Tanh);
  /// Scaled-uniform (Glorot) init; the output layer is additionally scaled
  /// by `output_gain`.
  static MlpNet random(std::vector<int> sizes, Rng& rng, Activation hidden = Activation::Tanh,
                       double output_gain = 1.0);

  int input_dim() const { return sizes.front(); }
  int output_dim() const { return sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  std::size_t num_params() const;

  friend bool operator==(const MlpNet& a, const MlpNet& b);
};

struct MlpCache {
  std::vector<Eigen::MatrixXd> activations;  // input, then each layer's output
};

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Eigen::MatrixXd input;  // gradient w.r.t. the batch input
};

Eigen::MatrixXd mlp_forward(const MlpNet& net, const Eigen::MatrixXd& input, MlpCache* cache = nullptr);
Eigen::VectorXd mlp_forward(const MlpNet& net, const Eigen::VectorXd& input);

/// Reverse pass for the batch recorded in `cache`; gradients are summed over
/// the batch columns.
MlpGrads mlp_backward(const MlpNet& net, const MlpCache& cache, const Eigen::MatrixXd& upstream);

/// Parameters in declared order: for each layer, W (column-major) then b.
Eigen::VectorXd flatten(const MlpNet& net);
Eigen::VectorXd flatten(const MlpGrads& grads);
void unflatten(MlpNet& net, const Eigen::VectorXd& params);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long long t = 0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// In-place Adam update with bias correction. The state is sized lazily.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, double lr,
               const AdamOptions& options = {});

}  // namespace adaptvo
