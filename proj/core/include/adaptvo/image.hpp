#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace adaptvo {

using Point2 = Eigen::Vector2d;

/// Row-major grayscale raster with intensities normalized to [0,1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, float fill = 0.0f);
  GrayImage(int width, int height, std::vector<float> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  float operator()(int x, int y) const noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float& operator()(int x, int y) noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  const float* row(int y) const noexcept { return data_.data() + static_cast<std::size_t>(y) * width_; }
  float* row(int y) noexcept { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  /// Clamped bilinear lookup; coordinates outside the image read the border.
  float sample_clamped(double x, double y) const noexcept;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Bilinear interpolation of the four neighbours of (x, y).
/// Throws OutOfBounds unless 0 <= x <= width-1 and 0 <= y <= height-1.
double bilinear_sample(const GrayImage& image, double x, double y);

struct ImagePyramid {
  std::vector<GrayImage> levels;

  int num_levels() const noexcept { return static_cast<int>(levels.size()); }
  const GrayImage& level(int k) const { return levels.at(static_cast<std::size_t>(k)); }
  bool empty() const noexcept { return levels.empty(); }
};

inline constexpr int kDefaultPyramidLevels = 3;
inline constexpr int kMinPyramidDimension = 8;

/// 2x2 box-filtered stack; level 0 is the input. Odd dimensions truncate.
ImagePyramid build_pyramid(const GrayImage& image, int num_levels = kDefaultPyramidLevels);

/// Area-averaging resize (used for encoder thumbnails).
GrayImage resize_area(const GrayImage& image, int width, int height);

struct PinholeCamera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  static PinholeCamera from_fov(int width, int height, double horizontal_fov_rad);

  void validate() const;
  Eigen::Vector2d project(const Eigen::Vector3d& p_cam) const {
    return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy};
  }
  /// Ray direction in camera coordinates with unit z.
  Eigen::Vector3d unproject(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }
  Eigen::Matrix3d K() const;
};

/// Camera-to-world rigid transform (camera position + orientation), the
/// convention of TUM trajectory files. Camera axes: x right, y down, z forward.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose() = default;
  Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t);

  Eigen::Vector3d to_world(const Eigen::Vector3d& p_cam) const { return rotation * p_cam + translation; }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
    return rotation.conjugate() * (p_world - translation);
  }
};

/// Dense per-pixel displacement from one frame to the next.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> du;
  std::vector<float> dv;
  std::vector<std::uint8_t> valid;

  FlowField() = default;
  FlowField(int w, int h);

  std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width + x; }
  bool is_valid(int x, int y) const noexcept { return valid[index(x, y)] != 0; }

  /// Bilinear flow at a subpixel location; nullopt when any of the four
  /// neighbours is invalid or the location lies outside the field.
  std::optional<Eigen::Vector2d> sample(double x, double y) const;
};

struct SequenceFrame {
  int index = 0;
  double timestamp = 0.0;
  GrayImage image;
  std::optional<FlowField> gt_flow_to_next;
  std::optional<Pose> pose;
};

}  // namespace adaptvo
