// Acceptance checks. Usage: adaptvo_acceptance <criterion 1..8>
// Prints exactly one line, "PASS <n> <name>: <details>" or "FAIL ...", and
// exits non-zero on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "adaptvo/checkpoint.hpp"
#include "adaptvo/error.hpp"
#include "adaptvo/frontend.hpp"
#include "adaptvo/nn.hpp"
#include "adaptvo/ppo.hpp"
#include "adaptvo/pso.hpp"
#include "adaptvo/reward.hpp"
#include "adaptvo/rollout.hpp"
#include "adaptvo/simworld.hpp"
#include "adaptvo/train.hpp"
#include "adaptvo_cli/commands.hpp"
#include "adaptvo_cli/config.hpp"
#include "oracles.hpp"

using namespace adaptvo;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kPi = 3.14159265358979323846;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Collects named sub-checks; the criterion passes when all of them do.
struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (detail.tellp() > 0) detail << "; ";
    detail << what << (ok ? "" : " [failed]");
  }
};

// ---------------------------------------------------------------------------
// 1. Reward and cost formulas.

void reward_formulas(Verdict& v) {
  const auto t0 = Clock::now();
  v.check(r_drift(std::vector<double>{}) == -35.0, "r_drift({}) = " + fmt("%.6g", r_drift(std::vector<double>{})));
  const double one = r_drift(std::vector<double>{0.0});
  v.check(std::abs(one - 5.0) < 1e-12, "r_drift({0}) = " + fmt("%.6g", one));
  const double two = r_drift(std::vector<double>{10.0, 10.0});
  v.check(std::abs(two - -17.154) <= 1e-3, "r_drift({10,10}) = " + fmt("%.6f", two));

  v.check(std::abs(r_cover(1.0) - 0.24) < 1e-12, "r_cover(1) = " + fmt("%.6g", r_cover(1.0)));
  v.check(std::abs(r_cover(0.0) - -0.87) < 1e-12, "r_cover(0) = " + fmt("%.6g", r_cover(0.0)));
  const double jump = std::max(std::abs(r_cover(0.3) - r_cover(std::nextafter(0.3, 0.0))),
                               std::abs(r_cover(0.3) - r_cover(std::nextafter(0.3, 1.0))));
  v.check(jump <= 1e-12, "r_cover jump at 0.3 = " + fmt("%.2e", jump));

  // Bisection on the library's r_comp; it is monotone non-increasing.
  double lo = 0.05, hi = 0.1;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (r_comp(mid) > 0.0 ? lo : hi) = mid;
  }
  const double root = 0.5 * (lo + hi);
  v.check(std::abs(root - 0.079984) <= 1e-5, "r_comp root = " + fmt("%.7f", root) + " s");

  FrameStats s;
  s.n_klt = 1000;
  s.n_ransac = 50;
  s.tracked_count = 200;
  CostModel cost;
  cost.beta = 10.0;
  const double tau_ms = estimate_runtime(s, 21, cost) * 1e3;
  v.check(std::abs(tau_ms - 9.0246) <= 1e-3, "tau = " + fmt("%.5f", tau_ms) + " ms");

  const double secs = seconds_since(t0);
  v.check(secs < 1.0, "runtime " + fmt("%.3f", secs) + " s");
}

// ---------------------------------------------------------------------------
// 2. Frontend against oracles.

GrayImage from_u8(const std::vector<std::uint8_t>& px, int w, int h) {
  GrayImage img(w, h);
  for (std::size_t i = 0; i < px.size(); ++i) img.data()[i] = static_cast<float>(px[i]) / 255.0f;
  return img;
}

struct KltShiftError {
  double worst = 0.0;        // largest per-point error
  double median_point = 0.0; // median per-point error
  double shift = 0.0;        // error of the grid's median displacement
  int lost = 0;
};

KltShiftError klt_shift_error(const GrayImage& a, const GrayImage& b, Point2 shift) {
  const auto pa = build_pyramid(a, 3), pb = build_pyramid(b, 3);
  std::vector<Point2> pts;
  for (int y = 25; y <= 75; y += 10)
    for (int x = 25; x <= 95; x += 10) pts.emplace_back(x, y);
  const auto res = track_klt(pa, pb, pts, KltOptions{});
  KltShiftError e;
  std::vector<double> err, dx, dy;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!res[i].converged) {
      ++e.lost;
      continue;
    }
    const Point2 d = res[i].position - pts[i];
    err.push_back((d - shift).norm());
    dx.push_back(d.x());
    dy.push_back(d.y());
  }
  if (err.empty()) return {1e9, 1e9, 1e9, e.lost};
  e.worst = *std::max_element(err.begin(), err.end());
  e.median_point = oracle::quantile(err, 0.5);
  e.shift = (Point2(oracle::quantile(dx, 0.5), oracle::quantile(dy, 0.5)) - shift).norm();
  return e;
}

void frontend_oracles(Verdict& v) {
  const auto t0 = Clock::now();

  int fast_mismatch = 0, fast_total = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    // Mix of pure noise and smoother content so both dense and sparse
    // detections are exercised.
    std::vector<std::uint8_t> px(64 * 64);
    if (seed % 2 == 0) {
      std::uniform_int_distribution<int> d(0, 255);
      for (auto& p : px) p = static_cast<std::uint8_t>(d(rng));
    } else {
      const GrayImage t = oracle::smooth_texture(64, 64, seed);
      for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(std::lround(t.data()[i] * 255.0f));
    }
    const int threshold = 5 + static_cast<int>(seed % 9) * 5;
    const auto want = oracle::fast_detect(px, 64, 64, threshold);
    const auto got = detect_fast(from_u8(px, 64, 64), threshold);
    fast_total += static_cast<int>(want.size());
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i)
      same = static_cast<int>(got[i].position.x()) == want[i].x && static_cast<int>(got[i].position.y()) == want[i].y &&
             got[i].score == want[i].score;
    fast_mismatch += !same;
  }
  v.check(fast_mismatch == 0, "FAST: " + std::to_string(200 - fast_mismatch) + "/200 images identical (" +
                                  std::to_string(fast_total) + " corners)");

  // Full-contrast texture: with sensor noise of variance 0.01 a faint texture
  // leaves even an ideal estimator above 0.5 px per point.
  const GrayImage a = oracle::smooth_texture(120, 100, 21, 0.0, 0.0, 2.0);
  const GrayImage b = oracle::smooth_texture(120, 100, 21, 3.0, 2.0, 2.0);
  const KltShiftError clean = klt_shift_error(a, b, Point2(3, 2));
  v.check(clean.lost == 0 && clean.worst < 0.1, "KLT noise-free worst point error " + fmt("%.4f", clean.worst) + " px");
  AugmentConfig noise;
  Rng na(1), nb(2);
  const KltShiftError noisy =
      klt_shift_error(apply_sensor_noise(a, noise, na), apply_sensor_noise(b, noise, nb), Point2(3, 2));
  v.check(noisy.shift < 0.5 && noisy.median_point < 0.5,
          "KLT with sensor noise: shift error " + fmt("%.4f", noisy.shift) + " px, median point error " +
              fmt("%.3f", noisy.median_point) + " px, worst " + fmt("%.3f", noisy.worst) + " px, " +
              std::to_string(noisy.lost) + " lost");

  double recall = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto tv = oracle::make_two_view(5000 + s, 100, 0.2, 0.3);
    RansacOptions ro;
    ro.seed = s;
    const auto est = estimate_fundamental_ransac(tv.prev, tv.cur, 1.0, ro);
    int hit = 0, total = 0;
    for (std::size_t i = 0; i < tv.inlier.size(); ++i)
      if (tv.inlier[i]) {
        ++total;
        hit += est.inliers[i];
      }
    recall += static_cast<double>(hit) / total;
  }
  recall /= 100.0;
  v.check(recall >= 0.95, "RANSAC mean recall " + fmt("%.4f", recall));

  // Tukey fence, quartiles worked by hand (type-7).
  struct Case {
    std::vector<double> x;
    std::vector<std::uint8_t> keep;
  };
  const std::vector<Case> cases = {
      {{1, 2, 3, 4, 5, 6, 7, 8, 100}, {1, 1, 1, 1, 1, 1, 1, 1, 0}},  // Q1 3, Q3 7, fence 13
      {{1, 2, 3, 4, 5, 6, 7, 8, 13}, {1, 1, 1, 1, 1, 1, 1, 1, 1}},   // value on the fence is kept
      {{0, 50, 0, 0}, {1, 0, 1, 1}},                                 // Q1 0, Q3 12.5, fence 31.25
      {{2.5, 2.5, 2.5, 2.5}, {1, 1, 1, 1}},                          // IQR 0
      {{4.0}, {1}},
      {{1, 1, 1, 1, 9}, {1, 1, 1, 1, 0}},                            // IQR 0, 9 above Q3
      {{0.5, 1.5}, {1, 1}},                                          // Q1 0.75, Q3 1.25, fence 2
  };
  int tukey_ok = 0;
  for (const auto& c : cases) tukey_ok += tukey_filter(c.x) == c.keep;
  v.check(tukey_ok == static_cast<int>(cases.size()),
          "Tukey " + std::to_string(tukey_ok) + "/" + std::to_string(cases.size()) + " hand cases");

  const double secs = seconds_since(t0);
  v.check(secs < 120.0, "runtime " + fmt("%.1f", secs) + " s");
}

// ---------------------------------------------------------------------------
// 3. Numerics.

double probe(const MlpNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& up) {
  return (mlp_forward(net, x).array() * up.array()).sum();
}

bool close_rel(double fd, double an) {
  const double scale = std::max(std::abs(fd), std::abs(an));
  return scale < 1e-6 ? std::abs(fd - an) < 1e-6 : std::abs(fd - an) <= 1e-4 * scale;
}

void numerics(Verdict& v) {
  int bad = 0, checked = 0;
  for (int k = 0; k < 50; ++k) {
    Rng rng(static_cast<std::uint64_t>(100 + k));
    const int in = 2 + k % 6, h1 = 4 + k % 9, h2 = 3 + (k * 5) % 7, out = 1 + k % 3;
    const std::vector<int> sizes = k % 2 ? std::vector<int>{in, h1, h2, out} : std::vector<int>{in, h1, out};
    const MlpNet net = MlpNet::random(sizes, rng, Activation::Tanh);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(in, 4), up = Eigen::MatrixXd::Random(out, 4);
    MlpCache cache;
    (void)mlp_forward(net, x, &cache);
    const MlpGrads g = mlp_backward(net, cache, up);
    const Eigen::VectorXd theta = flatten(net), grad = flatten(g);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp(i) += h;
      tm(i) -= h;
      MlpNet np = net, nm = net;
      unflatten(np, tp);
      unflatten(nm, tm);
      bad += !close_rel((probe(np, x, up) - probe(nm, x, up)) / (2 * h), grad(i));
      ++checked;
    }
  }
  v.check(bad == 0, "MLP: " + std::to_string(checked - bad) + "/" + std::to_string(checked) +
                        " parameter gradients within 1e-4 relative over 50 nets");

  // GAE hand example: delta_1 = 1 - 0.5, delta_0 = 1 + 0.99 * 0.5 - 0.5,
  // A_0 = 0.995 + 0.99 * 0.95 * 0.5.
  const GaeResult g = compute_gae(Eigen::Vector2d(1, 1), Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0, 0), 0.0, 0.99, 0.95);
  v.check(std::abs(g.advantages(0) - 1.46525) <= 1e-6 && std::abs(g.advantages(1) - 0.5) <= 1e-12,
          "GAE A0 = " + fmt("%.7f", g.advantages(0)) + ", A1 = " + fmt("%.7f", g.advantages(1)));

  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  const int T = 16;
  Eigen::VectorXd r(T), val(T), done = Eigen::VectorXd::Zero(T);
  for (int i = 0; i < T; ++i) {
    r(i) = n(rng);
    val(i) = n(rng);
  }
  done(6) = 1.0;
  const double boot = -0.4, gamma = 0.98;
  const GaeResult g0 = compute_gae(r, val, done, boot, gamma, 0.0), g1 = compute_gae(r, val, done, boot, gamma, 1.0);
  double e0 = 0.0, e1 = 0.0;
  for (int t = 0; t < T; ++t) {
    const double next = t + 1 < T ? val(t + 1) : boot;
    e0 = std::max(e0, std::abs(g0.advantages(t) - (r(t) + gamma * next * (1 - done(t)) - val(t))));
    double ret = 0.0, w = 1.0;
    int k = t;
    for (; k < T; ++k) {
      ret += w * r(k);
      if (done(k) != 0.0) break;
      w *= gamma;
    }
    if (k == T) ret += w * boot;
    e1 = std::max(e1, std::abs(g1.advantages(t) - (ret - val(t))));
  }
  v.check(e0 < 1e-12 && e1 < 1e-12, "GAE lambda=0 error " + fmt("%.1e", e0) + ", lambda=1 error " + fmt("%.1e", e1));

  Eigen::VectorXd p(1);
  p << 1.0;
  AdamState st;
  adam_step(p, Eigen::VectorXd::Constant(1, 0.5), st, 0.1);
  adam_step(p, Eigen::VectorXd::Constant(1, -0.2), st, 0.1);
  const double p1 = 1.0 - 0.1 * 0.5 / (std::sqrt(0.25) + 1e-8);
  const double p2 = p1 - 0.1 * (0.025 / (1 - 0.81)) / (std::sqrt(0.00028975 / (1 - 0.999 * 0.999)) + 1e-8);
  v.check(std::abs(p(0) - p2) < 1e-12, "Adam two-step error " + fmt("%.1e", std::abs(p(0) - p2)));
}

// ---------------------------------------------------------------------------
// 4. Simulator.

void simulator(Verdict& v) {
  const PinholeCamera cam = PinholeCamera::from_fov(96, 72, 60.0 * kPi / 180.0);
  double worst_median = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Scene scene = generate_scene(300 + s, TextureSpec{}, 5);
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Pose a;
    const Pose b(Eigen::Quaterniond(Eigen::AngleAxisd(0.01 * u(rng), Eigen::Vector3d(u(rng), u(rng), u(rng)).normalized())),
                 Eigen::Vector3d(0.05 * u(rng), 0.05 * u(rng), 0.05 * u(rng)));
    const GrayImage ia = render_frame(scene, a, cam).image, ib = render_frame(scene, b, cam).image;
    const FlowField f = gt_flow(scene, a, b, cam);
    std::vector<double> err;
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x)
        if (f.is_valid(x, y))
          err.push_back(std::abs(oracle::bilinear(ib, x + f.du[f.index(x, y)], y + f.dv[f.index(x, y)]) - ia(x, y)));
    worst_median = err.empty() ? 1.0 : std::max(worst_median, oracle::quantile(err, 0.5));
  }
  v.check(worst_median < 0.02, "photometric median error, worst of 20 scenes " + fmt("%.5f", worst_median));

  const Scene scene = generate_scene(7, TextureSpec{}, 5);
  const Eigen::Quaterniond q(Eigen::AngleAxisd(0.03, Eigen::Vector3d(0.2, 1.0, -0.3).normalized()));
  const FlowField f = gt_flow(scene, Pose(), Pose(q, Eigen::Vector3d::Zero()), cam);
  const Eigen::Matrix3d H = cam.K() * q.toRotationMatrix().transpose() * cam.K().inverse();
  double worst = 0.0;
  int valid = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      if (!f.is_valid(x, y)) continue;
      ++valid;
      const Eigen::Vector3d h = H * Eigen::Vector3d(x, y, 1);
      worst = std::max({worst, std::abs(f.du[f.index(x, y)] - (h.x() / h.z() - x)),
                        std::abs(f.dv[f.index(x, y)] - (h.y() / h.z() - y))});
    }
  v.check(valid > cam.width * cam.height / 2 && worst < 1e-6,
          "rotation flow vs homography " + fmt("%.2e", worst) + " px over " + std::to_string(valid) + " pixels");

  const double level = std::pow(0.5, 1.0 / 2.2);
  const GrayImage img(400, 300, static_cast<float>(level));
  Rng rng(99);
  const GrayImage out = apply_sensor_noise(img, AugmentConfig{}, rng);
  const double base = std::pow(static_cast<double>(static_cast<float>(level)), 2.2);
  double s1 = 0.0, s2 = 0.0;
  for (float x : out.data()) {
    const double lin = std::pow(static_cast<double>(x), 2.2) - base;
    s1 += lin;
    s2 += lin * lin;
  }
  const double nn = static_cast<double>(out.size());
  const double var = (s2 - s1 * s1 / nn) / (nn - 1);
  v.check(var >= 0.009 && var <= 0.011, "linear noise variance " + fmt("%.5f", var) + " over 120000 pixels");
}

// ---------------------------------------------------------------------------
// 5. PSO on the sphere.

void pso_sphere(Verdict& v) {
  int hits = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed + 77);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    const Eigen::Vector3d c(u(rng), u(rng), u(rng));
    PsoConfig cfg;
    cfg.seed = seed;
    cfg.iterations = 200;
    const PsoResult r = pso_maximize([&](const Eigen::VectorXd& x) { return -(x - c).squaredNorm(); },
                                     -Eigen::Vector3d::Ones(), Eigen::Vector3d::Ones(), cfg);
    const double d = (r.best_position - c).norm();
    worst = std::max(worst, d);
    hits += d < 1e-2;
  }
  v.check(hits == 10, std::to_string(hits) + "/10 seeds within 1e-2, worst distance " + fmt("%.2e", worst));
}

// ---------------------------------------------------------------------------
// 6. End-to-end learning at desk scale.

struct SetMetrics {
  double r_total = 0.0, age = 0.0, tau_ms = 0.0;
};

SetMetrics evaluate(const std::vector<TrainingScene>& scenes, const std::function<std::vector<FrameOutcome>(const TrainingScene&)>& run) {
  SetMetrics m;
  for (const auto& s : scenes) {
    const SequenceMetrics sm = sequence_metrics(to_records(s.name, run(s), true), s.fps);
    m.r_total += sm.mean_r_total;
    m.age += sm.feature_age;
    m.tau_ms += sm.tau_ms;
  }
  const double n = static_cast<double>(scenes.size());
  m.r_total /= n;
  m.age /= n;
  m.tau_ms /= n;
  return m;
}

void end_to_end_learning(Verdict& v) {
  // Desk-scale setup; blur and noise are on by default in the world config.
  WorldConfig world;
  world.width = 96;
  world.height = 72;
  std::vector<TrainingScene> train_scenes, held_out;
  for (int i = 0; i < 8; ++i) {
    Episode ep = generate_episode(world, 1000 + static_cast<std::uint64_t>(i));
    (i < 5 ? train_scenes : held_out).push_back({"scene_" + std::to_string(i), std::move(ep.frames), world.fps});
  }
  const EvalConfig eval;

  // Static baseline: PSO on the training scenes.
  PsoConfig pc;
  pc.particles = 12;
  pc.iterations = 15;
  pc.seed = 1;
  const int pso_frames = 64;
  const auto objective = [&](const FrontendParams& p) {
    double sum = 0.0;
    int n = 0;
    for (const auto& s : train_scenes) {
      const std::vector<SequenceFrame> frames(s.frames.begin(), s.frames.begin() + pso_frames);
      for (const auto& o : run_static(frames, p, eval)) {
        sum += o.reward.r_total;
        ++n;
      }
    }
    return sum / n;
  };
  const auto pso_t0 = Clock::now();
  const PsoParamsResult baseline = pso_optimize(objective, pc);
  const double pso_secs = seconds_since(pso_t0);

  TrainConfig tc;
  tc.updates = 300;
  tc.seed = 7;
  tc.eval = eval;
  const auto t0 = Clock::now();
  const TrainResult res = train(tc, train_scenes, init_training(tc, train_scenes, baseline.params));
  const double train_secs = seconds_since(t0);

  const SetMetrics base = evaluate(held_out, [&](const TrainingScene& s) { return run_static(s.frames, baseline.params, eval); });
  const SetMetrics pol =
      evaluate(held_out, [&](const TrainingScene& s) { return run_policy(s.frames, res.checkpoint.model, eval); });

  double first10 = 0.0, last10 = 0.0;
  const std::size_t n = res.curve.size();
  for (std::size_t i = 0; i < 10 && i < n; ++i) {
    first10 += res.curve[i].mean_train_reward / 10.0;
    last10 += res.curve[n - 1 - i].mean_train_reward / 10.0;
  }

  const double age_ratio = pol.age / base.age, tau_ratio = pol.tau_ms / base.tau_ms;
  v.check(true, "PSO baseline (" + std::to_string(baseline.params.fast_threshold) + ", " +
                    std::to_string(baseline.params.klt_patch_size) + ", " + fmt("%.3f", baseline.params.ransac_threshold) +
                    ") in " + fmt("%.0f", pso_secs) + " s");
  v.check(n >= 300 && train_secs < 1800.0,
          std::to_string(n) + " PPO updates x 8 envs in " + fmt("%.0f", train_secs) + " s");
  v.check(pol.r_total >= base.r_total,
          "held-out r_total policy " + fmt("%.2f", pol.r_total) + " vs static " + fmt("%.2f", base.r_total));
  v.check(age_ratio >= 1.0, "age ratio " + fmt("%.3f", age_ratio) + " (" + fmt("%.2f", pol.age) + "/" +
                                fmt("%.2f", base.age) + ")");
  v.check(tau_ratio <= 1.2, "tau ratio " + fmt("%.3f", tau_ratio) + " (" + fmt("%.2f", pol.tau_ms) + "/" +
                                fmt("%.2f", base.tau_ms) + " ms)");
  v.check(last10 > first10, "train reward last 10 " + fmt("%.2f", last10) + " > first 10 " + fmt("%.2f", first10));
}

// ---------------------------------------------------------------------------
// 7. Baseline subtraction identity.

void reference_replay(Verdict& v) {
  WorldConfig world;
  world.width = 96;
  world.height = 72;
  world.n_frames = 40;
  std::vector<TrainingScene> scenes;
  for (int i = 0; i < 3; ++i) {
    Episode ep = generate_episode(world, 50 + static_cast<std::uint64_t>(i));
    scenes.push_back({"scene_" + std::to_string(i), std::move(ep.frames), world.fps});
  }
  const EvalConfig eval;
  const FrontendParams ref{24, 9, 1.7};
  ModelShape shape;
  Rng rng(3);
  PolicyModel model = make_model(shape, rng, ref);
  model.actor.weights.back().setZero();  // the mean action is tanh(bias) for every observation
  std::vector<ReferenceRun> refs;
  for (const auto& s : scenes) refs.push_back(make_reference_run(s, ref, eval));
  std::vector<EnvState> envs(8);
  for (std::size_t e = 0; e < envs.size(); ++e) {
    envs[e].scene = &scenes[e % scenes.size()];
    envs[e].reference = &refs[e % scenes.size()];
  }
  RolloutOptions ro;
  ro.steps = 100;  // wraps every episode at least twice
  ro.deterministic = true;
  const RolloutBuffer b = collect_rollout(envs, model, eval, ro);
  int nonzero = 0;
  for (Eigen::Index i = 0; i < b.rewards.size(); ++i) nonzero += b.rewards(i) != 0.0;
  const FrontendParams acted = map_action(b.actions.col(0));
  v.check(acted == ref, "replayed action maps to the reference parameters");
  v.check(nonzero == 0, std::to_string(b.rewards.size() - nonzero) + "/" + std::to_string(b.rewards.size()) +
                            " env-steps with training reward exactly 0");
}

// ---------------------------------------------------------------------------
// 8. Determinism of the command-line pipeline.

bool run_pipeline(const std::filesystem::path& root) {
  cli::RunConfig c;
  c.seed = 5;
  c.world.width = 64;
  c.world.height = 48;
  c.world.n_frames = 24;
  c.sim_scenes = 2;
  c.ppo.envs = 2;
  c.ppo.rollout = 16;
  c.ppo.minibatch = 16;
  c.ppo.epochs = 2;
  c.train_updates = 5;
  std::ostringstream log;
  if (cli::cmd_simulate(c, root / "data", log) != 0) return false;
  cli::write_params_file(root / "params.txt", cli::ParamsFile{FrontendParams{20, 9, 1.5}, 0.0, "train", 0});
  cli::TrackOptions t;
  t.dataset = root / "data";
  t.params_file = root / "params.txt";
  t.require_drift = true;
  t.out = root / "metrics.csv";
  if (cli::cmd_track(c, t, log) != 0) return false;
  cli::TrainOptions tr;
  tr.dataset = root / "data";
  tr.params_file = root / "params.txt";
  tr.out = root / "train";
  return cli::cmd_train(c, tr, log) == 0;
}

void determinism(Verdict& v) {
  const auto a = oracle::scratch_dir("acceptance_run_a"), b = oracle::scratch_dir("acceptance_run_b");
  v.check(run_pipeline(a) && run_pipeline(b), "simulate, track and 5-update train ran twice");
  for (const char* part : {"data", "metrics.csv", "train"}) {
    const bool same = std::filesystem::is_directory(a / part) ? oracle::same_tree(a / part, b / part)
                                                               : oracle::read_bytes(a / part) == oracle::read_bytes(b / part) &&
                                                                     !oracle::read_bytes(a / part).empty();
    v.check(same, std::string(part) + (same ? " byte-identical" : " differs"));
  }
}

struct Criterion {
  const char* name;
  void (*run)(Verdict&);
};

const Criterion kCriteria[] = {
    {"reward_formulas", reward_formulas},   {"frontend_oracles", frontend_oracles},
    {"numerics", numerics},                 {"simulator", simulator},
    {"pso_sphere", pso_sphere},             {"end_to_end_learning", end_to_end_learning},
    {"reference_replay", reference_replay}, {"determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 0;
  if (n < 1 || n > 8) {
    std::fprintf(stderr, "usage: %s <criterion 1..8>\n", argv[0]);
    return 2;
  }
  const Criterion& c = kCriteria[n - 1];
  Verdict v;
  const auto t0 = Clock::now();
  try {
    c.run(v);
  } catch (const std::exception& e) {
    v.check(false, std::string("exception: ") + e.what());
  }
  std::printf("%s %d %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", n, c.name, v.detail.str().c_str(), seconds_since(t0));
  return v.pass ? 0 : 1;
}
