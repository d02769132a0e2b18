#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "adaptvo/image.hpp"
#include "adaptvo/rng.hpp"
#include "adaptvo/sequence_io.hpp"

namespace adaptvo {

struct TextureSpec {
  int octaves = 4;
  double base_frequency = 2.0;  // cycles per meter of the coarsest octave
  double contrast = 0.8;        // amplitude in [0,1] around mid-gray
  std::uint64_t seed = 0;

  void validate() const;
};

/// Multi-octave value noise in plane coordinates, returned in [0,1].
double texture_value(const TextureSpec& texture, double u, double v);

struct ScenePlane {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis_u = Eigen::Vector3d::UnitX();  // unit, in-plane
  Eigen::Vector3d axis_v = Eigen::Vector3d::UnitY();  // unit, in-plane, orthogonal to axis_u
  double half_u = std::numeric_limits<double>::infinity();
  double half_v = std::numeric_limits<double>::infinity();
  TextureSpec texture;

  Eigen::Vector3d normal() const { return axis_u.cross(axis_v); }
};

struct Scene {
  std::vector<ScenePlane> planes;  // planes[0] is the unbounded background
  double background_depth = 6.0;
  std::uint64_t seed = 0;
};

/// One far background plane plus num_planes-1 textured foreground patches.
Scene generate_scene(std::uint64_t seed, const TextureSpec& texture, int num_planes);

struct RayHit {
  double t = std::numeric_limits<double>::infinity();  // distance along the ray direction
  int plane = -1;
  double u = 0, v = 0;
};

/// Nearest intersection of origin + t * dir (t > 0) with the scene.
RayHit cast_ray(const Scene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir);

struct Trajectory {
  std::vector<Pose> poses;
  std::vector<double> timestamps;
  double fps = 80.0;
};

/// Natural cubic spline through waypoint translations, slerp with smoothstep
/// easing between waypoint rotations. Frames are spread uniformly over the
/// waypoint time span.
Trajectory spline_trajectory(const std::vector<TimedPose>& waypoints, int n_frames);

struct RenderOutput {
  GrayImage image;
  std::vector<double> depth;  // z in the camera frame, row-major
};

RenderOutput render_frame(const Scene& scene, const Pose& pose, const PinholeCamera& camera);

/// Exact flow from pose_t to pose_t1; invalid where the surface point leaves
/// the next frame or is occluded there (1 cm depth tolerance).
FlowField gt_flow(const Scene& scene, const Pose& pose_t, const Pose& pose_t1, const PinholeCamera& camera);

/// Average of bilinear samples along x - s * flow(x) * exposure_fraction, s in [0,1].
GrayImage apply_motion_blur(const GrayImage& image, const FlowField& flow, double exposure_fraction);

struct AugmentConfig {
  double exposure_s = 0.0125;
  double noise_variance = 0.01;
  double gamma = 2.2;
  bool enable_blur = true;
  bool enable_noise = true;

  void validate() const;
};

/// clip((I^gamma + n)^(1/gamma), 0, 1) for one pixel and one Gaussian draw n.
/// Negative linear values clip to zero before the inverse gamma.
double sensor_noise_pixel(double intensity, double noise, double gamma);

GrayImage apply_sensor_noise(const GrayImage& image, const AugmentConfig& config, Rng& rng);

/// Renders every pose, attaches clean-geometry flow to the next frame, then
/// applies blur (from the frame's forward flow) and noise.
std::vector<SequenceFrame> make_episode(const Scene& scene, const Trajectory& trajectory,
                                        const PinholeCamera& camera, const AugmentConfig& augment,
                                        std::uint64_t seed);

/// Knobs for procedurally drawing whole episodes (scene + trajectory).
struct WorldConfig {
  int width = 128;
  int height = 96;
  double horizontal_fov_deg = 60.0;
  double fps = 80.0;
  int n_frames = 128;
  int num_planes = 5;
  double contrast_min = 0.15, contrast_max = 1.0;
  int octaves_min = 2, octaves_max = 5;
  double frequency_min = 1.0, frequency_max = 4.0;
  double speed_min = 0.5, speed_max = 2.0;  // motion scale, ~pixels of flow per frame
  int waypoint_spacing = 16;                // frames between spline waypoints
  AugmentConfig augment;
};

struct Episode {
  Scene scene;
  Trajectory trajectory;
  PinholeCamera camera;
  std::vector<SequenceFrame> frames;
};

Trajectory random_trajectory(std::uint64_t seed, const WorldConfig& config, double speed, const Scene& scene);
Episode generate_episode(const WorldConfig& config, std::uint64_t seed);

}  // namespace adaptvo
