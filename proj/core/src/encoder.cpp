#include "adaptvo/encoder.hpp"

#include <cmath>

#include "adaptvo/error.hpp"

namespace adaptvo {
namespace {

constexpr int kChannels[4] = {1, 8, 16, 32};
constexpr int kFinalSize = kEncoderInputSize / 8;
constexpr int kFlatDim = 32 * kFinalSize * kFinalSize;

ConvLayer make_layer(int in, int out) {
  ConvLayer l;
  l.in_channels = in;
  l.out_channels = out;
  l.weights.assign(static_cast<std::size_t>(out) * in * 9, 0.0);
  l.biases.assign(static_cast<std::size_t>(out), 0.0);
  return l;
}

}  // namespace

ConvEncoder ConvEncoder::zeros() {
  ConvEncoder e;
  for (int s = 0; s < 3; ++s) e.conv[s] = make_layer(kChannels[s], kChannels[s + 1]);
  e.proj_w = Eigen::MatrixXd::Zero(kEncoderLatentDim, kFlatDim);
  e.proj_b = Eigen::VectorXd::Zero(kEncoderLatentDim);
  return e;
}

ConvEncoder ConvEncoder::random(Rng& rng) {
  ConvEncoder e = zeros();
  for (auto& layer : e.conv) {
    // He init suits the ReLU stages.
    std::normal_distribution<double> n(0.0, std::sqrt(2.0 / (layer.in_channels * 9)));
    for (double& w : layer.weights) w = n(rng);
  }
  const double limit = std::sqrt(6.0 / (kFlatDim + kEncoderLatentDim));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index j = 0; j < e.proj_w.cols(); ++j)
    for (Eigen::Index i = 0; i < e.proj_w.rows(); ++i) e.proj_w(i, j) = u(rng);
  return e;
}

std::size_t ConvEncoder::num_params() const {
  std::size_t n = 0;
  for (const auto& l : conv) n += l.weights.size() + l.biases.size();
  return n + static_cast<std::size_t>(proj_w.size() + proj_b.size());
}

bool operator==(const ConvEncoder& a, const ConvEncoder& b) {
  for (int s = 0; s < 3; ++s)
    if (a.conv[s].weights != b.conv[s].weights || a.conv[s].biases != b.conv[s].biases) return false;
  return a.proj_w == b.proj_w && a.proj_b == b.proj_b;
}

FeatureMap conv_forward(const ConvLayer& layer, const FeatureMap& in) {
  if (in.channels != layer.in_channels) throw Error(ErrorCode::DimensionMismatch, "conv input channel count");
  FeatureMap out{layer.out_channels, in.size / 2, {}};
  out.data.assign(static_cast<std::size_t>(out.channels) * out.size * out.size, 0.0);
  for (int o = 0; o < out.channels; ++o) {
    double* dst = out.data.data() + static_cast<std::size_t>(o) * out.size * out.size;
    for (int y = 0; y < out.size; ++y) {
      for (int x = 0; x < out.size; ++x) {
        double acc = layer.biases[o];
        for (int i = 0; i < in.channels; ++i)
          for (int ky = 0; ky < 3; ++ky) {
            const int sy = 2 * y + ky - 1;
            if (sy < 0 || sy >= in.size) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = 2 * x + kx - 1;
              if (sx < 0 || sx >= in.size) continue;
              acc += layer.w(o, i, ky, kx) * in.at(i, sy, sx);
            }
          }
        dst[y * out.size + x] = acc > 0.0 ? acc : 0.0;
      }
    }
  }
  return out;
}

FeatureMap encoder_input(const GrayImage& image) {
  const GrayImage thumb = resize_area(image, kEncoderInputSize, kEncoderInputSize);
  FeatureMap m{1, kEncoderInputSize, {}};
  m.data.assign(thumb.data().begin(), thumb.data().end());
  return m;
}

Eigen::VectorXd encode_thumbnail(const FeatureMap& thumbnail, const ConvEncoder& encoder, EncoderCache* cache) {
  if (thumbnail.channels != 1 || thumbnail.size != kEncoderInputSize)
    throw Error(ErrorCode::DimensionMismatch, "encoder expects a 64x64 single-channel thumbnail");
  std::array<FeatureMap, 4> maps;
  maps[0] = thumbnail;
  for (int s = 0; s < 3; ++s) maps[s + 1] = conv_forward(encoder.conv[s], maps[s]);
  const Eigen::Map<const Eigen::VectorXd> flat(maps[3].data.data(), kFlatDim);
  Eigen::VectorXd latent = (encoder.proj_w * flat + encoder.proj_b).array().tanh().matrix();
  if (cache) {
    cache->maps = std::move(maps);
    cache->latent = latent;
  }
  return latent;
}

Eigen::VectorXd encode_image(const GrayImage& image, const ConvEncoder& encoder) {
  return encode_thumbnail(encoder_input(image), encoder);
}

void encoder_backward(const ConvEncoder& e, const EncoderCache& cache, const Eigen::VectorXd& upstream,
                      Eigen::VectorXd& g) {
  if (g.size() != static_cast<Eigen::Index>(e.num_params())) g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(e.num_params()));
  std::array<Eigen::Index, 3> w_off{}, b_off{};
  Eigen::Index o = 0;
  for (int s = 0; s < 3; ++s) {
    w_off[s] = o;
    o += static_cast<Eigen::Index>(e.conv[s].weights.size());
    b_off[s] = o;
    o += static_cast<Eigen::Index>(e.conv[s].biases.size());
  }
  const Eigen::Index pw_off = o, pb_off = o + e.proj_w.size();

  const Eigen::VectorXd dz = upstream.array() * (1.0 - cache.latent.array().square());
  const Eigen::Map<const Eigen::VectorXd> flat(cache.maps[3].data.data(), kFlatDim);
  g.segment(pw_off, e.proj_w.size()).reshaped(e.proj_w.rows(), e.proj_w.cols()) += dz * flat.transpose();
  g.segment(pb_off, e.proj_b.size()) += dz;
  Eigen::VectorXd dflat = e.proj_w.transpose() * dz;
  std::vector<double> dout(dflat.data(), dflat.data() + dflat.size());

  for (int s = 2; s >= 0; --s) {
    const ConvLayer& layer = e.conv[s];
    const FeatureMap& in = cache.maps[s];
    const FeatureMap& out = cache.maps[s + 1];
    std::vector<double> din(in.data.size(), 0.0);
    for (int oc = 0; oc < layer.out_channels; ++oc)
      for (int y = 0; y < out.size; ++y)
        for (int x = 0; x < out.size; ++x) {
          const std::size_t oi = (static_cast<std::size_t>(oc) * out.size + y) * out.size + x;
          if (out.data[oi] <= 0.0) continue;  // ReLU gate
          const double d = dout[oi];
          if (d == 0.0) continue;
          g(b_off[s] + oc) += d;
          for (int ic = 0; ic < layer.in_channels; ++ic)
            for (int ky = 0; ky < 3; ++ky) {
              const int sy = 2 * y + ky - 1;
              if (sy < 0 || sy >= in.size) continue;
              for (int kx = 0; kx < 3; ++kx) {
                const int sx = 2 * x + kx - 1;
                if (sx < 0 || sx >= in.size) continue;
                const std::size_t ii = (static_cast<std::size_t>(ic) * in.size + sy) * in.size + sx;
                const std::size_t wi = ((static_cast<std::size_t>(oc) * layer.in_channels + ic) * 3 + ky) * 3 + kx;
                g(w_off[s] + static_cast<Eigen::Index>(wi)) += d * in.data[ii];
                din[ii] += d * layer.weights[wi];
              }
            }
        }
    dout = std::move(din);
  }
}

Eigen::VectorXd flatten(const ConvEncoder& e) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(e.num_params()));
  Eigen::Index o = 0;
  for (const auto& l : e.conv) {
    for (double w : l.weights) p(o++) = w;
    for (double b : l.biases) p(o++) = b;
  }
  p.segment(o, e.proj_w.size()) = e.proj_w.reshaped();
  o += e.proj_w.size();
  p.segment(o, e.proj_b.size()) = e.proj_b;
  return p;
}

void unflatten(ConvEncoder& e, const Eigen::VectorXd& p) {
  if (p.size() != static_cast<Eigen::Index>(e.num_params()))
    throw Error(ErrorCode::DimensionMismatch, "encoder parameter vector length differs");
  Eigen::Index o = 0;
  for (auto& l : e.conv) {
    for (double& w : l.weights) w = p(o++);
    for (double& b : l.biases) b = p(o++);
  }
  e.proj_w = p.segment(o, e.proj_w.size()).reshaped(e.proj_w.rows(), e.proj_w.cols());
  o += e.proj_w.size();
  e.proj_b = p.segment(o, e.proj_b.size());
}

}  // namespace adaptvo
