#include "adaptvo/nn.hpp"

#include <cmath>
#include <string>

#include "adaptvo/error.hpp"

namespace adaptvo {
namespace {

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw Error(ErrorCode::InvalidArgument, "an MLP needs at least input and output sizes");
  for (int s : sizes)
    if (s < 1) throw Error(ErrorCode::InvalidArgument, "MLP layer sizes must be >= 1");
}

void activate(Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::Tanh: z = z.array().tanh(); break;
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Identity: break;
  }
}

// Derivative expressed through the activation output y.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& y, Activation a) {
  switch (a) {
    case Activation::Tanh: return (1.0 - y.array().square()).matrix();
    case Activation::Relu: return (y.array() > 0.0).cast<double>().matrix();
    case Activation::Identity: break;
  }
  return Eigen::MatrixXd::Ones(y.rows(), y.cols());
}

}  // namespace

MlpNet MlpNet::zeros(std::vector<int> sizes, Activation hidden) {
  check_sizes(sizes);
  MlpNet net;
  net.sizes = std::move(sizes);
  net.hidden = hidden;
  for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
    net.weights.push_back(Eigen::MatrixXd::Zero(net.sizes[l + 1], net.sizes[l]));
    net.biases.push_back(Eigen::VectorXd::Zero(net.sizes[l + 1]));
  }
  return net;
}

MlpNet MlpNet::random(std::vector<int> sizes, Rng& rng, Activation hidden, double output_gain) {
  MlpNet net = zeros(std::move(sizes), hidden);
  for (int l = 0; l < net.num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / (net.sizes[l] + net.sizes[l + 1]));
    const double gain = l + 1 == net.num_layers() ? output_gain : 1.0;
    std::uniform_real_distribution<double> u(-limit, limit);
    auto& w = net.weights[l];
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = gain * u(rng);
  }
  return net;
}

std::size_t MlpNet::num_params() const {
  std::size_t n = 0;
  for (int l = 0; l < num_layers(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

bool operator==(const MlpNet& a, const MlpNet& b) {
  if (a.sizes != b.sizes || a.hidden != b.hidden) return false;
  for (int l = 0; l < a.num_layers(); ++l)
    if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
  return true;
}

Eigen::MatrixXd mlp_forward(const MlpNet& net, const Eigen::MatrixXd& input, MlpCache* cache) {
  if (input.rows() != net.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "MLP input has " + std::to_string(input.rows()) + " rows, expected " +
                                                  std::to_string(net.input_dim()));
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Eigen::MatrixXd x = input;
  for (int l = 0; l < net.num_layers(); ++l) {
    Eigen::MatrixXd z = net.weights[l] * x;
    z.colwise() += net.biases[l];
    if (l + 1 < net.num_layers()) activate(z, net.hidden);
    x = std::move(z);
    if (cache) cache->activations.push_back(x);
  }
  return x;
}

Eigen::VectorXd mlp_forward(const MlpNet& net, const Eigen::VectorXd& input) {
  return mlp_forward(net, Eigen::MatrixXd(input), nullptr).col(0);
}

MlpGrads mlp_backward(const MlpNet& net, const MlpCache& cache, const Eigen::MatrixXd& upstream) {
  if (cache.activations.size() != static_cast<std::size_t>(net.num_layers()) + 1)
    throw Error(ErrorCode::DimensionMismatch, "MLP cache does not match the network depth");
  const Eigen::MatrixXd& out = cache.activations.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
    throw Error(ErrorCode::DimensionMismatch, "upstream gradient shape differs from the MLP output");
  MlpGrads g;
  g.weights.resize(static_cast<std::size_t>(net.num_layers()));
  g.biases.resize(static_cast<std::size_t>(net.num_layers()));
  Eigen::MatrixXd delta = upstream;
  for (int l = net.num_layers() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& x = cache.activations[l];
    g.weights[l] = delta * x.transpose();
    g.biases[l] = delta.rowwise().sum();
    Eigen::MatrixXd dx = net.weights[l].transpose() * delta;
    if (l > 0) dx.array() *= activation_grad(x, net.hidden).array();
    delta = std::move(dx);
  }
  g.input = std::move(delta);
  return g;
}

Eigen::VectorXd flatten(const MlpNet& net) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(net.num_params()));
  Eigen::Index o = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    p.segment(o, net.weights[l].size()) = net.weights[l].reshaped();
    o += net.weights[l].size();
    p.segment(o, net.biases[l].size()) = net.biases[l];
    o += net.biases[l].size();
  }
  return p;
}

Eigen::VectorXd flatten(const MlpGrads& grads) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) n += grads.weights[l].size() + grads.biases[l].size();
  Eigen::VectorXd p(n);
  Eigen::Index o = 0;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    p.segment(o, grads.weights[l].size()) = grads.weights[l].reshaped();
    o += grads.weights[l].size();
    p.segment(o, grads.biases[l].size()) = grads.biases[l];
    o += grads.biases[l].size();
  }
  return p;
}

void unflatten(MlpNet& net, const Eigen::VectorXd& params) {
  if (params.size() != static_cast<Eigen::Index>(net.num_params()))
    throw Error(ErrorCode::DimensionMismatch, "parameter vector length differs from the network");
  Eigen::Index o = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    auto& w = net.weights[l];
    w = params.segment(o, w.size()).reshaped(w.rows(), w.cols());
    o += w.size();
    net.biases[l] = params.segment(o, net.biases[l].size());
    o += net.biases[l].size();
  }
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, double lr,
               const AdamOptions& o) {
  if (grads.size() != params.size()) throw Error(ErrorCode::DimensionMismatch, "gradient length differs");
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
    state.t = 0;
  }
  ++state.t;
  state.m = o.beta1 * state.m + (1.0 - o.beta1) * grads;
  state.v = o.beta2 * state.v + (1.0 - o.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.t));
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + o.epsilon);
}

}  // namespace adaptvo
