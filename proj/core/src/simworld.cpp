#include "adaptvo/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "adaptvo/error.hpp"

namespace adaptvo {
namespace {

double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x9E3779B185EBCA87ULL ^
                                                       static_cast<std::uint64_t>(iy) * 0xC2B2AE3D27D4EB4FULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double sx = fade(x - fx), sy = fade(y - fy);
  const double a = lattice(seed, ix, iy), b = lattice(seed, ix + 1, iy);
  const double c = lattice(seed, ix, iy + 1), d = lattice(seed, ix + 1, iy + 1);
  return (a + (b - a) * sx) * (1 - sy) + (c + (d - c) * sx) * sy;
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Eigen::Matrix3d small_rotation(double rx, double ry, double rz) {
  return (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

// Second derivatives of the natural cubic spline through (t_i, y_i).
std::vector<double> natural_spline_moments(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  std::vector<double> diag(n - 2), upper(n - 2), rhs(n - 2);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = t[i] - t[i - 1], h1 = t[i + 1] - t[i];
    diag[i - 1] = 2.0 * (h0 + h1);
    upper[i - 1] = h1;
    rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
  }
  // Thomas algorithm; the sub-diagonal entry for row i is h_{i-1}.
  for (std::size_t i = 1; i < n - 2; ++i) {
    const double sub = t[i + 1] - t[i];
    const double w = sub / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  for (std::size_t i = n - 2; i-- > 0;) {
    const double next = i + 1 < n - 2 ? m[i + 2] : 0.0;
    m[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
  }
  return m;
}

double eval_spline(const std::vector<double>& t, const std::vector<double>& y, const std::vector<double>& m,
                   std::size_t seg, double x) {
  const double h = t[seg + 1] - t[seg];
  const double a = (t[seg + 1] - x) / h;
  const double b = (x - t[seg]) / h;
  return a * y[seg] + b * y[seg + 1] + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0;
}

}  // namespace

void TextureSpec::validate() const {
  if (octaves < 1) throw Error(ErrorCode::InvalidArgument, "texture octaves must be >= 1");
  if (!(contrast >= 0.0 && contrast <= 1.0)) throw Error(ErrorCode::InvalidArgument, "texture contrast outside [0,1]");
  if (!(base_frequency > 0.0)) throw Error(ErrorCode::InvalidArgument, "texture base frequency must be positive");
}

double texture_value(const TextureSpec& texture, double u, double v) {
  if (texture.contrast == 0.0) return 0.5;
  double sum = 0.0, norm = 0.0, amp = 1.0, freq = texture.base_frequency;
  for (int o = 0; o < texture.octaves; ++o) {
    sum += amp * value_noise(mix_seed(texture.seed, static_cast<std::uint64_t>(o)), u * freq, v * freq);
    norm += amp;
    amp *= 0.5;
    freq *= 2.0;
  }
  return std::clamp(0.5 + 0.5 * texture.contrast * (sum / norm), 0.0, 1.0);
}

Scene generate_scene(std::uint64_t seed, const TextureSpec& texture, int num_planes) {
  if (num_planes < 1) throw Error(ErrorCode::InvalidArgument, "a scene needs at least one plane");
  texture.validate();
  Rng rng(mix_seed(seed, 0x5CE7EULL));
  Scene scene;
  scene.seed = seed;
  scene.background_depth = uniform(rng, 5.0, 8.0);

  ScenePlane bg;
  const Eigen::Matrix3d tilt = small_rotation(uniform(rng, -0.15, 0.15), uniform(rng, -0.15, 0.15), 0.0);
  bg.origin = Eigen::Vector3d(0, 0, scene.background_depth);
  bg.axis_u = tilt * Eigen::Vector3d::UnitX();
  bg.axis_v = tilt * Eigen::Vector3d::UnitY();
  bg.texture = texture;
  bg.texture.seed = mix_seed(texture.seed ^ seed, 0);
  scene.planes.push_back(bg);

  for (int k = 1; k < num_planes; ++k) {
    ScenePlane p;
    const double z = uniform(rng, 1.5, scene.background_depth - 1.0);
    const double reach = z / 2.5;
    p.origin = Eigen::Vector3d(uniform(rng, -1.0, 1.0) * reach, uniform(rng, -0.75, 0.75) * reach, z);
    const Eigen::Matrix3d r =
        small_rotation(uniform(rng, -0.6, 0.6), uniform(rng, -0.6, 0.6), uniform(rng, -std::numbers::pi, std::numbers::pi));
    p.axis_u = r * Eigen::Vector3d::UnitX();
    p.axis_v = r * Eigen::Vector3d::UnitY();
    p.half_u = uniform(rng, 0.25, 0.7) * reach;
    p.half_v = uniform(rng, 0.25, 0.7) * reach;
    p.texture = texture;
    p.texture.seed = mix_seed(texture.seed ^ seed, static_cast<std::uint64_t>(k));
    scene.planes.push_back(p);
  }
  return scene;
}

RayHit cast_ray(const Scene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  RayHit best;
  for (std::size_t i = 0; i < scene.planes.size(); ++i) {
    const ScenePlane& p = scene.planes[i];
    const Eigen::Vector3d n = p.normal();
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double t = n.dot(p.origin - origin) / denom;
    if (!(t > 1e-9) || !(t < best.t)) continue;
    const Eigen::Vector3d rel = origin + t * dir - p.origin;
    const double u = p.axis_u.dot(rel);
    const double v = p.axis_v.dot(rel);
    if (std::abs(u) > p.half_u || std::abs(v) > p.half_v) continue;
    best = {t, static_cast<int>(i), u, v};
  }
  return best;
}

Trajectory spline_trajectory(const std::vector<TimedPose>& waypoints, int n_frames) {
  if (waypoints.size() < 2) throw Error(ErrorCode::InvalidArgument, "spline trajectory needs >= 2 waypoints");
  if (n_frames < 1) throw Error(ErrorCode::InvalidArgument, "n_frames must be >= 1");
  std::vector<TimedPose> wp = waypoints;
  std::stable_sort(wp.begin(), wp.end(), [](const TimedPose& a, const TimedPose& b) { return a.timestamp < b.timestamp; });
  for (std::size_t i = 1; i < wp.size(); ++i)
    if (wp[i].timestamp == wp[i - 1].timestamp)
      throw Error(ErrorCode::DuplicateWaypointTimes, "two waypoints at t=" + std::to_string(wp[i].timestamp));

  std::vector<double> t(wp.size());
  std::array<std::vector<double>, 3> y;
  for (std::size_t i = 0; i < wp.size(); ++i) {
    t[i] = wp[i].timestamp;
    for (int a = 0; a < 3; ++a) y[a].push_back(wp[i].pose.translation(a));
  }
  std::array<std::vector<double>, 3> m;
  for (int a = 0; a < 3; ++a) m[a] = natural_spline_moments(t, y[a]);

  Trajectory traj;
  const double t0 = t.front(), t1 = t.back();
  traj.fps = n_frames > 1 ? (n_frames - 1) / (t1 - t0) : 0.0;
  std::size_t seg = 0;
  for (int k = 0; k < n_frames; ++k) {
    const double tk = n_frames > 1 ? (k == n_frames - 1 ? t1 : t0 + (t1 - t0) * k / (n_frames - 1)) : t0;
    while (seg + 2 < t.size() && tk > t[seg + 1]) ++seg;
    Eigen::Vector3d pos;
    for (int a = 0; a < 3; ++a) pos(a) = eval_spline(t, y[a], m[a], seg, tk);
    const double s = std::clamp((tk - t[seg]) / (t[seg + 1] - t[seg]), 0.0, 1.0);
    const double eased = s * s * (3.0 - 2.0 * s);
    Eigen::Quaterniond q = wp[seg].pose.rotation.slerp(eased, wp[seg + 1].pose.rotation).normalized();
    traj.poses.emplace_back(q, pos);
    traj.timestamps.push_back(tk);
  }
  return traj;
}

RenderOutput render_frame(const Scene& scene, const Pose& pose, const PinholeCamera& camera) {
  camera.validate();
  RenderOutput out{GrayImage(camera.width, camera.height),
                   std::vector<double>(static_cast<std::size_t>(camera.width) * camera.height)};
  const Eigen::Matrix3d R = pose.rotation.toRotationMatrix();
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const Eigen::Vector3d dir = R * camera.unproject(x, y);
      const RayHit hit = cast_ray(scene, pose.translation, dir);
      const std::size_t i = static_cast<std::size_t>(y) * camera.width + x;
      if (hit.plane < 0) {
        out.image(x, y) = 0.5f;
        out.depth[i] = std::numeric_limits<double>::infinity();
        continue;
      }
      out.image(x, y) = static_cast<float>(texture_value(scene.planes[hit.plane].texture, hit.u, hit.v));
      out.depth[i] = hit.t;
    }
  }
  return out;
}

FlowField gt_flow(const Scene& scene, const Pose& pose_t, const Pose& pose_t1, const PinholeCamera& camera) {
  camera.validate();
  constexpr double kOcclusionTolerance = 0.01;
  FlowField flow(camera.width, camera.height);
  const Eigen::Matrix3d R0 = pose_t.rotation.toRotationMatrix();
  const Eigen::Matrix3d R1 = pose_t1.rotation.toRotationMatrix();
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const std::size_t i = flow.index(x, y);
      const Eigen::Vector3d ray = camera.unproject(x, y);
      const RayHit hit = cast_ray(scene, pose_t.translation, R0 * ray);
      if (hit.plane < 0) {
        flow.valid[i] = 0;
        continue;
      }
      const Eigen::Vector3d world = pose_t.translation + R0 * (hit.t * ray);
      const Eigen::Vector3d pc = R1.transpose() * (world - pose_t1.translation);
      if (!(pc.z() > 1e-9)) {
        flow.valid[i] = 0;
        continue;
      }
      const Eigen::Vector2d px = camera.project(pc);
      flow.du[i] = static_cast<float>(px.x() - x);
      flow.dv[i] = static_cast<float>(px.y() - y);
      // Tolerance so border pixels that map onto themselves survive round-off.
      constexpr double kEdge = 1e-6;
      if (px.x() < -kEdge || px.y() < -kEdge || px.x() > camera.width - 1 + kEdge || px.y() > camera.height - 1 + kEdge) {
        flow.valid[i] = 0;
        continue;
      }
      const RayHit seen = cast_ray(scene, pose_t1.translation, R1 * camera.unproject(px.x(), px.y()));
      flow.valid[i] = (seen.plane >= 0 && std::abs(seen.t - pc.z()) <= kOcclusionTolerance) ? 1 : 0;
    }
  }
  return flow;
}

GrayImage apply_motion_blur(const GrayImage& image, const FlowField& flow, double exposure_fraction) {
  if (flow.width != image.width() || flow.height != image.height())
    throw Error(ErrorCode::DimensionMismatch, "flow and image sizes differ");
  if (!(exposure_fraction >= 0.0 && exposure_fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "exposure_fraction outside [0,1]");
  GrayImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const std::size_t i = flow.index(x, y);
      const double fx = flow.du[i] * exposure_fraction;
      const double fy = flow.dv[i] * exposure_fraction;
      const int k = std::max(2, static_cast<int>(std::ceil(std::hypot(fx, fy))) + 1);
      double acc = 0.0;
      for (int j = 0; j < k; ++j) {
        const double s = static_cast<double>(j) / (k - 1);
        acc += image.sample_clamped(x - s * fx, y - s * fy);
      }
      out(x, y) = static_cast<float>(acc / k);
    }
  }
  return out;
}

void AugmentConfig::validate() const {
  if (!(exposure_s >= 0.0)) throw Error(ErrorCode::InvalidArgument, "exposure_s must be >= 0");
  if (!(noise_variance >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_variance must be >= 0");
  if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
}

double sensor_noise_pixel(double intensity, double noise, double gamma) {
  const double linear = std::max(std::pow(intensity, gamma) + noise, 0.0);
  return std::clamp(std::pow(linear, 1.0 / gamma), 0.0, 1.0);
}

GrayImage apply_sensor_noise(const GrayImage& image, const AugmentConfig& config, Rng& rng) {
  config.validate();
  GrayImage out(image.width(), image.height());
  std::normal_distribution<double> gauss(0.0, std::sqrt(config.noise_variance));
  const auto src = image.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double n = config.noise_variance > 0.0 ? gauss(rng) : 0.0;
    dst[i] = static_cast<float>(sensor_noise_pixel(src[i], n, config.gamma));
  }
  return out;
}

std::vector<SequenceFrame> make_episode(const Scene& scene, const Trajectory& trajectory,
                                        const PinholeCamera& camera, const AugmentConfig& augment,
                                        std::uint64_t seed) {
  augment.validate();
  const std::size_t n = trajectory.poses.size();
  std::vector<SequenceFrame> frames(n);
  for (std::size_t k = 0; k < n; ++k) {
    frames[k].index = static_cast<int>(k);
    frames[k].timestamp = k < trajectory.timestamps.size() ? trajectory.timestamps[k] : static_cast<double>(k);
    frames[k].pose = trajectory.poses[k];
    frames[k].image = render_frame(scene, trajectory.poses[k], camera).image;
    if (k + 1 < n) frames[k].gt_flow_to_next = gt_flow(scene, trajectory.poses[k], trajectory.poses[k + 1], camera);
  }
  const double exposure_fraction = std::clamp(augment.exposure_s * trajectory.fps, 0.0, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (augment.enable_blur && n >= 2) {
      // The last frame has no forward flow; it reuses its predecessor's.
      const FlowField& f = k + 1 < n ? *frames[k].gt_flow_to_next : *frames[k - 1].gt_flow_to_next;
      frames[k].image = apply_motion_blur(frames[k].image, f, exposure_fraction);
    }
    if (augment.enable_noise) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
      frames[k].image = apply_sensor_noise(frames[k].image, augment, rng);
    }
  }
  return frames;
}

Trajectory random_trajectory(std::uint64_t seed, const WorldConfig& config, double speed, const Scene& scene) {
  Rng rng(mix_seed(seed, 0x7AA7ULL));
  const double focal = 0.5 * config.width / std::tan(0.5 * config.horizontal_fov_deg * std::numbers::pi / 180.0);
  const double ref_depth = std::min(3.0, 0.5 * scene.background_depth);
  const int spacing = std::max(2, config.waypoint_spacing);
  const int n_way = std::max(2, (config.n_frames - 1 + spacing - 1) / spacing + 1);
  // Roughly half of the image motion from translation, half from rotation.
  const double step_t = 0.5 * speed * ref_depth / focal * spacing;
  const double step_r = 0.5 * speed / focal * spacing;

  std::vector<TimedPose> wp;
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d ang = Eigen::Vector3d::Zero();
  constexpr double kMaxOffset = 0.6, kMaxDepthOffset = 0.3, kMaxAngle = 0.2;
  for (int i = 0; i < n_way; ++i) {
    wp.push_back({i * spacing / config.fps,
                  Pose(Eigen::Quaterniond(small_rotation(ang.x(), ang.y(), ang.z())).normalized(), pos)});
    const double heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
    Eigen::Vector3d d(std::cos(heading), std::sin(heading), uniform(rng, -0.3, 0.3));
    pos += step_t * d;
    for (int a = 0; a < 3; ++a) {
      const double lim = a == 2 ? kMaxDepthOffset : kMaxOffset;
      if (std::abs(pos(a)) > lim) pos(a) = std::copysign(2 * lim - std::abs(pos(a)), pos(a));
    }
    const double rh = uniform(rng, -std::numbers::pi, std::numbers::pi);
    ang += step_r * Eigen::Vector3d(std::cos(rh), std::sin(rh), 0.3 * uniform(rng, -1.0, 1.0));
    for (int a = 0; a < 3; ++a)
      if (std::abs(ang(a)) > kMaxAngle) ang(a) = std::copysign(2 * kMaxAngle - std::abs(ang(a)), ang(a));
  }
  Trajectory traj = spline_trajectory(wp, (n_way - 1) * spacing + 1);
  traj.poses.resize(static_cast<std::size_t>(config.n_frames));
  traj.timestamps.resize(static_cast<std::size_t>(config.n_frames));
  traj.fps = config.fps;
  return traj;
}

Episode generate_episode(const WorldConfig& config, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xE915ULL));
  TextureSpec tex;
  tex.contrast = uniform(rng, config.contrast_min, config.contrast_max);
  tex.octaves = std::uniform_int_distribution<int>(config.octaves_min, config.octaves_max)(rng);
  tex.base_frequency = uniform(rng, config.frequency_min, config.frequency_max);
  tex.seed = mix_seed(seed, 0x7E87ULL);
  const double speed = uniform(rng, config.speed_min, config.speed_max);

  Episode ep;
  ep.camera = PinholeCamera::from_fov(config.width, config.height, config.horizontal_fov_deg * std::numbers::pi / 180.0);
  ep.scene = generate_scene(seed, tex, config.num_planes);
  ep.trajectory = random_trajectory(seed, config, speed, ep.scene);
  ep.frames = make_episode(ep.scene, ep.trajectory, ep.camera, config.augment, mix_seed(seed, 0xA06ULL));
  return ep;
}

}  // namespace adaptvo
