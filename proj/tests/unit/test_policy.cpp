#include <cmath>

#include "doctest.h"
#include "adaptvo/checkpoint.hpp"
#include "adaptvo/encoder.hpp"
#include "adaptvo/error.hpp"
#include "adaptvo/policy.hpp"
#include "oracles.hpp"

using namespace adaptvo;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Direct transcription of the documented feature layout.
Eigen::VectorXd texture_stats_oracle(const GrayImage& img) {
  const int w = img.width(), h = img.height();
  Eigen::VectorXd s(16);
  double m = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m += img(x, y);
  m /= w * h;
  double v = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) v += (img(x, y) - m) * (img(x, y) - m);
  s(0) = m;
  s(1) = std::sqrt(v / (w * h));
  std::vector<double> g, lap;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      const double gx = (static_cast<double>(img(x + 1, y)) - img(x - 1, y)) / 2;
      const double gy = (static_cast<double>(img(x, y + 1)) - img(x, y - 1)) / 2;
      g.push_back(std::hypot(gx, gy));
      lap.push_back(static_cast<double>(img(x + 1, y)) + img(x - 1, y) + img(x, y + 1) + img(x, y - 1) - 4.0 * img(x, y));
    }
  double gm = 0.0;
  for (double a : g) gm += a;
  s(2) = gm / g.size();
  s(3) = oracle::quantile(g, 0.25);
  s(4) = oracle::quantile(g, 0.5);
  s(5) = oracle::quantile(g, 0.75);
  s(6) = oracle::quantile(g, 0.9);
  double lm = 0.0;
  for (double a : lap) lm += a;
  lm /= lap.size();
  double lv = 0.0;
  for (double a : lap) lv += (a - lm) * (a - lm);
  s(7) = lv / lap.size();
  for (int k = 0; k < 3; ++k) {
    const double thr[] = {0.02, 0.05, 0.1};
    int c = 0;
    for (double a : g) c += a > thr[k];
    s(8 + k) = static_cast<double>(c) / g.size();
  }
  for (int b = 0; b < 4; ++b) {
    int c = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) c += std::min(3, static_cast<int>(std::floor(img(x, y) * 4.0f))) == b;
    s(11 + b) = static_cast<double>(c) / (w * h);
  }
  // 4x area downsample (dimensions divisible by 4 here), stored as an image.
  const int sw = w / 4, sh = h / 4;
  std::vector<double> small;
  for (int y = 0; y < sh; ++y)
    for (int x = 0; x < sw; ++x) {
      double a = 0.0;
      for (int dy = 0; dy < 4; ++dy)
        for (int dx = 0; dx < 4; ++dx) a += img(4 * x + dx, 4 * y + dy);
      small.push_back(static_cast<float>(a / 16));  // images store float pixels
    }
  double sm = 0.0;
  for (double a : small) sm += a;
  sm /= small.size();
  double sv = 0.0;
  for (double a : small) sv += (a - sm) * (a - sm);
  s(15) = std::sqrt(sv / small.size());
  return s;
}

PolicyModel small_model(std::uint64_t seed, const std::optional<FrontendParams>& warm = {}) {
  ModelShape shape;
  shape.hidden = {16, 8};
  Rng rng(seed);
  return make_model(shape, rng, warm);
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("texture statistics of a uniform image") {
  const Eigen::VectorXd s = texture_stats(GrayImage(32, 24, 0.3f));
  REQUIRE(s.size() == kTextureStatsDim);
  CHECK(s(0) == doctest::Approx(0.3));
  for (int i = 1; i <= 10; ++i) CHECK(s(i) == doctest::Approx(0.0));
  CHECK(s(11) == 0.0);
  CHECK(s(12) == 1.0);  // 0.3 falls in [0.25, 0.5)
  CHECK(s(15) == doctest::Approx(0.0));
}

TEST_CASE("texture statistics match the direct transcription") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const GrayImage img = oracle::smooth_texture(64, 48, seed);
    const Eigen::VectorXd got = texture_stats(img), want = texture_stats_oracle(img);
    for (int i = 0; i < 16; ++i) {
      INFO("statistic " << i);
      CHECK(got(i) == doctest::Approx(want(i)).epsilon(1e-9));
    }
  }
}

TEST_CASE("texture statistics under intensity complement") {
  // Gradient, Laplacian and spread statistics are invariant; the mean flips
  // and the histogram reverses. Values stay off the bin edges.
  GrayImage img = oracle::smooth_texture(40, 32, 8);
  for (float& v : img.data())
    if (std::abs(v * 4 - std::round(v * 4)) < 1e-3) v += 2e-3f;
  GrayImage inv(40, 32);
  for (std::size_t i = 0; i < img.size(); ++i) inv.data()[i] = 1.0f - img.data()[i];
  const Eigen::VectorXd a = texture_stats(img), b = texture_stats(inv);
  CHECK(b(0) == doctest::Approx(1.0 - a(0)).epsilon(1e-6));
  for (int i = 1; i <= 10; ++i) CHECK(b(i) == doctest::Approx(a(i)).epsilon(1e-5));
  for (int k = 0; k < 4; ++k) CHECK(b(11 + k) == doctest::Approx(a(14 - k)));
  CHECK(b(15) == doctest::Approx(a(15)).epsilon(1e-5));
}

TEST_CASE("Fourier features are sin/cos octaves of the episode phase") {
  const Eigen::VectorXd f = fourier_features(32, 17, 128);
  REQUIRE(f.size() == 34);
  for (int k = 0; k < 17; ++k) {
    CHECK(f(k) == doctest::Approx(std::sin(std::pow(2.0, k) * kPi * 0.25)).epsilon(1e-9));
    CHECK(f(17 + k) == doctest::Approx(std::cos(std::pow(2.0, k) * kPi * 0.25)).epsilon(1e-9));
  }
  const Eigen::VectorXd z = fourier_features(0);
  CHECK(z.head(17).norm() == 0.0);
  CHECK(z.tail(17).sum() == 17.0);
}

TEST_CASE("action mapping at the centre and the bounds") {
  const FrontendParams mid = map_action(Eigen::Vector3d::Zero());
  CHECK(mid.fast_threshold == 104);
  CHECK(mid.klt_patch_size == 21);
  CHECK(mid.ransac_threshold == 1.5);
  const FrontendParams lo = map_action(Eigen::Vector3d::Constant(-5.0));
  CHECK(lo.fast_threshold == 0);
  CHECK(lo.klt_patch_size == 3);
  CHECK(lo.ransac_threshold == 0.0);
  const FrontendParams hi = map_action(Eigen::Vector3d::Constant(1.0));
  CHECK(hi.fast_threshold == 209);
  CHECK(hi.klt_patch_size == 41);
  CHECK(hi.ransac_threshold == 3.0);
}

TEST_CASE("every parameter value is reachable and unmap inverts map") {
  std::vector<int> fast_hits(210, 0), patch_hits(42, 0);
  for (int i = 0; i <= 20000; ++i) {
    const double r = -1.0 + 2.0 * i / 20000.0;
    const FrontendParams p = map_action(Eigen::Vector3d(r, r, r));
    ++fast_hits[p.fast_threshold];
    ++patch_hits[p.klt_patch_size];
    CHECK(p.klt_patch_size % 2 == 1);
  }
  for (int t = 0; t <= 209; ++t) CHECK(fast_hits[t] > 0);
  for (int w = 3; w <= 41; w += 2) CHECK(patch_hits[w] > 0);
  for (int t : {0, 1, 57, 104, 208, 209})
    for (int w : {3, 9, 21, 39, 41})
      for (double r : {0.0, 0.25, 1.0, 2.9, 3.0}) {
        const FrontendParams p{t, w, r};
        const FrontendParams q = map_action(unmap_action(p));
        CHECK(q.fast_threshold == t);
        CHECK(q.klt_patch_size == w);
        CHECK(q.ransac_threshold == doctest::Approx(r).epsilon(1e-12));
      }
}

TEST_CASE("gaussian log-probability matches the density formula") {
  const Eigen::Vector3d a(0.1, -0.4, 0.9), m(0.0, 0.2, 1.0), ls(-1.0, 0.0, 0.5);
  double want = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double sd = std::exp(ls(i));
    want += std::log(std::exp(-0.5 * (a(i) - m(i)) * (a(i) - m(i)) / (sd * sd)) / (sd * std::sqrt(2 * kPi)));
  }
  CHECK(gaussian_log_prob(a, m, ls) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("zero networks give a zero mean and a bias-only value") {
  PolicyModel m = small_model(3);
  m.actor = MlpNet::zeros(m.actor.sizes);
  m.critic = MlpNet::zeros(m.critic.sizes);
  m.critic.biases.back()(0) = 2.5;
  const Eigen::VectorXd obs = Eigen::VectorXd::Random(m.obs_dim());
  const PolicyOutput out = policy_forward(m, obs);
  CHECK(out.mean.norm() == 0.0);
  CHECK(out.std(0) == doctest::Approx(std::exp(-1.5)));
  CHECK(value_forward(m, critic_input(m, obs, 7)) == 2.5);
  CHECK_THROWS_AS(policy_forward(m, Eigen::VectorXd::Zero(3)), Error);
}

TEST_CASE("hand-built actor: one linear layer through tanh") {
  PolicyModel m = small_model(4);
  m.actor = MlpNet::zeros({m.obs_dim(), kActionDim});
  m.actor.weights[0](0, 0) = 2.0;
  m.actor.weights[0](2, 1) = -1.0;
  m.actor.biases[0] = Eigen::Vector3d(0.0, 0.3, 0.1);
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(m.obs_dim());
  obs(0) = 0.25;
  obs(1) = 0.5;
  const PolicyOutput out = policy_forward(m, obs);
  CHECK(out.mean(0) == doctest::Approx(std::tanh(0.5)));
  CHECK(out.mean(1) == doctest::Approx(std::tanh(0.3)));
  CHECK(out.mean(2) == doctest::Approx(std::tanh(-0.4)));
}

TEST_CASE("warm start puts the initial mean action on the reference parameters") {
  const FrontendParams ref{37, 15, 0.8};
  const PolicyModel m = small_model(5, ref);
  const PolicyOutput out = policy_forward(m, Eigen::VectorXd::Zero(m.obs_dim()));
  CHECK(map_action(out.mean) == FrontendParams{37, 15, 0.8});
}

TEST_CASE("observation layout: code, clamped counts, last action") {
  PolicyModel m = small_model(6);
  const GrayImage img = oracle::smooth_texture(32, 32, 4);
  ObservationInput in;
  in.image = &img;
  in.count_cur = 200;
  in.count_prev = 900;
  in.last_action = Eigen::Vector3d(0.1, -0.2, 0.3);
  const Eigen::VectorXd o = build_observation(m, in);
  REQUIRE(o.size() == m.obs_dim());
  CHECK((o.head(16) - texture_stats(img)).norm() == 0.0);
  CHECK(o(16) == doctest::Approx(0.5));
  CHECK(o(17) == 1.0);
  CHECK((o.tail(3) - in.last_action).norm() == 0.0);
}

TEST_CASE("normalizer fit gives zero mean, unit population std, and ignores constant rows") {
  Eigen::MatrixXd x(2, 4);
  x << 1, 2, 3, 4, 5, 5, 5, 5;
  const ObsNormalizer n = ObsNormalizer::fit(x);
  CHECK(n.mean(0) == 2.5);
  CHECK(n.std(0) == doctest::Approx(std::sqrt(1.25)));
  CHECK(n.std(1) == 1.0);
  const Eigen::VectorXd y = n.apply(Eigen::Vector2d(4, 5));
  CHECK(y(0) == doctest::Approx(1.5 / std::sqrt(1.25)));
  CHECK(y(1) == 0.0);
}

TEST_CASE("zero encoder yields a zero latent") {
  const Eigen::VectorXd z = encode_image(oracle::smooth_texture(80, 60, 1), ConvEncoder::zeros());
  REQUIRE(z.size() == kEncoderLatentDim);
  CHECK(z.norm() == 0.0);
}

TEST_CASE("encoder is deterministic and bounded") {
  Rng rng(8);
  const ConvEncoder e = ConvEncoder::random(rng);
  const GrayImage img = oracle::smooth_texture(80, 60, 2);
  const Eigen::VectorXd a = encode_image(img, e), b = encode_image(img, e);
  CHECK(a == b);
  CHECK(a.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(a.norm() > 0.0);
}

TEST_CASE("direct convolution on a hand example") {
  ConvLayer l;
  l.in_channels = 1;
  l.out_channels = 1;
  l.weights.assign(9, 0.0);
  l.biases = {0.5};
  l.w(0, 0, 1, 1) = 1.0;  // centre tap
  l.w(0, 0, 0, 0) = -2.0;  // top-left tap
  FeatureMap in{1, 4, {}};
  for (int i = 0; i < 16; ++i) in.data.push_back(i);
  const FeatureMap out = conv_forward(l, in);
  REQUIRE(out.size == 2);
  // Output (x, y) reads input centre (2x, 2y); top-left neighbour is zero padding at the border.
  CHECK(out.at(0, 0, 0) == doctest::Approx(0.0 + 0.5));
  CHECK(out.at(0, 0, 1) == doctest::Approx(2.0 + 0.5));
  CHECK(out.at(0, 1, 1) == doctest::Approx(std::max(0.0, 10.0 - 2 * 5.0 + 0.5)));
  CHECK(out.at(0, 1, 0) == doctest::Approx(8.0 + 0.5));
}

TEST_CASE("encoder parameter gradients match central differences") {
  Rng rng(12);
  ConvEncoder e = ConvEncoder::random(rng);
  const FeatureMap thumb = encoder_input(oracle::smooth_texture(64, 64, 5));
  Eigen::VectorXd up = Eigen::VectorXd::Random(kEncoderLatentDim);
  EncoderCache cache;
  (void)encode_thumbnail(thumb, e, &cache);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(e.num_params()));
  encoder_backward(e, cache, up, grad);
  const Eigen::VectorXd theta = flatten(e);
  REQUIRE(theta.size() == grad.size());
  std::mt19937_64 pick(3);
  int checked = 0;
  for (int k = 0; k < 60; ++k) {
    const auto i = static_cast<Eigen::Index>(pick() % static_cast<std::uint64_t>(theta.size()));
    const double h = 1e-6;
    Eigen::VectorXd tp = theta, tm = theta;
    tp(i) += h;
    tm(i) -= h;
    ConvEncoder ep = e, em = e;
    unflatten(ep, tp);
    unflatten(em, tm);
    const double fd = (up.dot(encode_thumbnail(thumb, ep)) - up.dot(encode_thumbnail(thumb, em))) / (2 * h);
    if (std::abs(fd) < 1e-8 && std::abs(grad(i)) < 1e-8) continue;
    ++checked;
    CHECK(std::abs(fd - grad(i)) <= 1e-4 * std::max(std::abs(fd), std::abs(grad(i))) + 1e-9);
  }
  CHECK(checked > 10);
}

TEST_CASE("checkpoint round trip is exact") {
  Checkpoint c;
  c.model = small_model(9, FrontendParams{20, 21, 1.0});
  c.model.normalizer.mean = Eigen::VectorXd::Random(c.model.obs_dim());
  c.model.normalizer.std = Eigen::VectorXd::Constant(c.model.obs_dim(), 1.0 / 3.0);
  c.update_index = 17;
  c.actor_opt.m = Eigen::VectorXd::Random(5);
  c.actor_opt.v = Eigen::VectorXd::Random(5).cwiseAbs();
  c.actor_opt.t = 17;
  c.reference = FrontendParams{20, 21, 1.0};
  const std::string text = serialize_checkpoint(c);
  CHECK(deserialize_checkpoint(text) == c);
  CHECK(serialize_checkpoint(deserialize_checkpoint(text)) == text);

  const auto dir = oracle::scratch_dir("ckpt");
  save_checkpoint(dir / "c.txt", c);
  CHECK(load_checkpoint(dir / "c.txt") == c);
}

TEST_CASE("checkpoint with an encoder and stand-alone encoder files round trip") {
  Rng rng(10);
  const ConvEncoder enc = ConvEncoder::random(rng);
  ModelShape shape;
  shape.mode = ObsMode::Encoder;
  shape.hidden = {8};
  Checkpoint c;
  c.model = make_model(shape, rng, {}, enc);
  CHECK(deserialize_checkpoint(serialize_checkpoint(c)) == c);
  CHECK(deserialize_encoder(serialize_encoder(enc)) == enc);
  const auto dir = oracle::scratch_dir("enc");
  save_encoder(dir / "e.txt", enc);
  CHECK(load_encoder(dir / "e.txt") == enc);
}

TEST_CASE("corrupt checkpoints are rejected") {
  Checkpoint c;
  c.model = small_model(11);
  std::string text = serialize_checkpoint(c);
  for (const std::string& bad : {text.substr(0, text.size() / 2), std::string("garbage"), std::string()}) {
    try {
      (void)deserialize_checkpoint(bad);
      FAIL("expected CorruptCheckpoint");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::CorruptCheckpoint);
    }
  }
  CHECK_THROWS_AS((void)deserialize_encoder("adaptvo-encoder 1\nconv oops\n"), Error);
}

}  // TEST_SUITE
