#include "adaptvo/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adaptvo/error.hpp"

namespace adaptvo {

GrayImage::GrayImage(int width, int height, float fill)
    : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
  if (width < 0 || height < 0) throw Error(ErrorCode::InvalidArgument, "negative image dimensions");
}

GrayImage::GrayImage(int width, int height, std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0 || data_.size() != static_cast<std::size_t>(width) * height)
    throw Error(ErrorCode::DimensionMismatch, "image data length does not match width*height");
}

float GrayImage::sample_clamped(double x, double y) const noexcept {
  x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const float ax = static_cast<float>(x - x0);
  const float ay = static_cast<float>(y - y0);
  const float top = (*this)(x0, y0) * (1.0f - ax) + (*this)(x1, y0) * ax;
  const float bot = (*this)(x0, y1) * (1.0f - ax) + (*this)(x1, y1) * ax;
  return top * (1.0f - ay) + bot * ay;
}

double bilinear_sample(const GrayImage& image, double x, double y) {
  if (image.empty() || !(x >= 0.0) || !(y >= 0.0) || x > image.width() - 1 || y > image.height() - 1)
    throw Error(ErrorCode::OutOfBounds,
                "sample (" + std::to_string(x) + ", " + std::to_string(y) + ") outside image");
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, image.width() - 1);
  const int y1 = std::min(y0 + 1, image.height() - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  return (1 - ax) * (1 - ay) * image(x0, y0) + ax * (1 - ay) * image(x1, y0) +
         (1 - ax) * ay * image(x0, y1) + ax * ay * image(x1, y1);
}

ImagePyramid build_pyramid(const GrayImage& image, int num_levels) {
  if (num_levels < 1) throw Error(ErrorCode::InvalidArgument, "num_levels must be >= 1");
  ImagePyramid pyr;
  pyr.levels.reserve(static_cast<std::size_t>(num_levels));
  pyr.levels.push_back(image);
  for (int k = 1; k < num_levels; ++k) {
    const GrayImage& parent = pyr.levels.back();
    const int w = parent.width() / 2;
    const int h = parent.height() / 2;
    if (w < kMinPyramidDimension || h < kMinPyramidDimension)
      throw Error(ErrorCode::ImageTooSmall, "pyramid level " + std::to_string(k) + " would be " +
                                                std::to_string(w) + "x" + std::to_string(h));
    GrayImage child(w, h);
    for (int y = 0; y < h; ++y) {
      const float* r0 = parent.row(2 * y);
      const float* r1 = parent.row(2 * y + 1);
      float* out = child.row(y);
      for (int x = 0; x < w; ++x)
        out[x] = 0.25f * ((r0[2 * x] + r0[2 * x + 1]) + (r1[2 * x] + r1[2 * x + 1]));
    }
    pyr.levels.push_back(std::move(child));
  }
  return pyr;
}

GrayImage resize_area(const GrayImage& image, int width, int height) {
  if (width <= 0 || height <= 0 || image.empty())
    throw Error(ErrorCode::InvalidArgument, "resize_area needs a non-empty source and positive target");
  GrayImage out(width, height);
  const double sx = static_cast<double>(image.width()) / width;
  const double sy = static_cast<double>(image.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double y0 = y * sy, y1 = (y + 1) * sy;
    for (int x = 0; x < width; ++x) {
      const double x0 = x * sx, x1 = (x + 1) * sx;
      double acc = 0.0, area = 0.0;
      for (int py = static_cast<int>(y0); py < std::min(image.height(), static_cast<int>(std::ceil(y1))); ++py) {
        const double wy = std::min(y1, py + 1.0) - std::max(y0, static_cast<double>(py));
        if (wy <= 0) continue;
        for (int px = static_cast<int>(x0); px < std::min(image.width(), static_cast<int>(std::ceil(x1))); ++px) {
          const double wx = std::min(x1, px + 1.0) - std::max(x0, static_cast<double>(px));
          if (wx <= 0) continue;
          acc += wx * wy * image(px, py);
          area += wx * wy;
        }
      }
      out(x, y) = static_cast<float>(acc / area);
    }
  }
  return out;
}

PinholeCamera PinholeCamera::from_fov(int width, int height, double horizontal_fov_rad) {
  PinholeCamera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = 0.5 * width / std::tan(0.5 * horizontal_fov_rad);
  cam.cx = 0.5 * (width - 1);
  cam.cy = 0.5 * (height - 1);
  cam.validate();
  return cam;
}

void PinholeCamera::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "camera dimensions must be positive");
  if (cx < 0 || cy < 0 || cx > width || cy > height)
    throw Error(ErrorCode::InvalidArgument, "principal point outside image");
}

Eigen::Matrix3d PinholeCamera::K() const {
  Eigen::Matrix3d k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Pose::Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) : rotation(q), translation(t) {
  if (std::abs(q.norm() - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "pose quaternion is not unit norm");
}

FlowField::FlowField(int w, int h)
    : width(w),
      height(h),
      du(static_cast<std::size_t>(w) * h, 0.0f),
      dv(static_cast<std::size_t>(w) * h, 0.0f),
      valid(static_cast<std::size_t>(w) * h, 1) {}

std::optional<Eigen::Vector2d> FlowField::sample(double x, double y) const {
  if (!(x >= 0.0) || !(y >= 0.0) || x > width - 1 || y > height - 1) return std::nullopt;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  if (!is_valid(x0, y0) || !is_valid(x1, y0) || !is_valid(x0, y1) || !is_valid(x1, y1)) return std::nullopt;
  const double ax = x - x0, ay = y - y0;
  const double w00 = (1 - ax) * (1 - ay), w10 = ax * (1 - ay), w01 = (1 - ax) * ay, w11 = ax * ay;
  const auto i00 = index(x0, y0), i10 = index(x1, y0), i01 = index(x0, y1), i11 = index(x1, y1);
  return Eigen::Vector2d(w00 * du[i00] + w10 * du[i10] + w01 * du[i01] + w11 * du[i11],
                         w00 * dv[i00] + w10 * dv[i10] + w01 * dv[i01] + w11 * dv[i11]);
}

}  // namespace adaptvo
