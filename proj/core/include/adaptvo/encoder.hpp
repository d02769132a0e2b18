#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "adaptvo/image.hpp"
#include "adaptvo/rng.hpp"

namespace adaptvo {

inline constexpr int kEncoderInputSize = 64;
inline constexpr int kEncoderLatentDim = 32;

/// One 3x3, stride-2, zero-padded convolution stage followed by ReLU.
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weights;  // [out][in][ky][kx]
  std::vector<double> biases;   // [out]

  double& w(int o, int i, int ky, int kx) { return weights[((static_cast<std::size_t>(o) * in_channels + i) * 3 + ky) * 3 + kx]; }
  double w(int o, int i, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * 3 + ky) * 3 + kx];
  }
};

/// Three conv stages (1 -> 8 -> 16 -> 32 channels, 64 -> 8 px) and a tanh
/// projection to a 32-d latent.
struct ConvEncoder {
  std::array<ConvLayer, 3> conv;
  Eigen::MatrixXd proj_w;  // latent x (32 * 8 * 8)
  Eigen::VectorXd proj_b;

  static ConvEncoder zeros();
  static ConvEncoder random(Rng& rng);

  std::size_t num_params() const;
  friend bool operator==(const ConvEncoder&, const ConvEncoder&);
};

/// Feature map in channel-major layout.
struct FeatureMap {
  int channels = 0, size = 0;
  std::vector<double> data;  // [c][y][x]

  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * size + y) * size + x]; }
};

/// Direct stride-2 convolution with zero padding of one pixel, then ReLU.
FeatureMap conv_forward(const ConvLayer& layer, const FeatureMap& input);

struct EncoderCache {
  std::array<FeatureMap, 4> maps;  // thumbnail, then each conv output
  Eigen::VectorXd latent;
};

/// Area-resized 64x64 thumbnail as a single-channel map.
FeatureMap encoder_input(const GrayImage& image);

Eigen::VectorXd encode_image(const GrayImage& image, const ConvEncoder& encoder);
Eigen::VectorXd encode_thumbnail(const FeatureMap& thumbnail, const ConvEncoder& encoder, EncoderCache* cache = nullptr);

/// Accumulates parameter gradients (same layout as flatten) for one sample.
void encoder_backward(const ConvEncoder& encoder, const EncoderCache& cache, const Eigen::VectorXd& upstream,
                      Eigen::VectorXd& grad_accum);

/// Parameters in order: conv1 w,b, conv2 w,b, conv3 w,b, projection W (column-major), b.
Eigen::VectorXd flatten(const ConvEncoder& encoder);
void unflatten(ConvEncoder& encoder, const Eigen::VectorXd& params);

}  // namespace adaptvo
