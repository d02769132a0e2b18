#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "adaptvo/image.hpp"

namespace adaptvo {

// ---------------------------------------------------------------------------
// Tunable parameters (the agent's action space).

inline constexpr int kFastThresholdMin = 0;
inline constexpr int kFastThresholdMax = 209;
inline constexpr int kPatchSizeMin = 3;
inline constexpr int kPatchSizeMax = 41;
inline constexpr double kRansacThresholdMin = 0.0;
inline constexpr double kRansacThresholdMax = 3.0;

struct FrontendParams {
  int fast_threshold = 20;      // on the 0-255 intensity scale
  int klt_patch_size = 21;      // odd, pixels
  double ransac_threshold = 1.0;  // pixels

  void validate() const;
  friend bool operator==(const FrontendParams&, const FrontendParams&) = default;
};

// ---------------------------------------------------------------------------
// FAST

inline constexpr int kFastRadius = 3;
inline constexpr int kFastArc = 9;

struct Keypoint {
  Point2 position;
  int score = 0;
};

/// Offsets of the 16-pixel Bresenham circle of radius 3, clockwise from 12 o'clock.
std::span<const std::array<int, 2>> fast_circle();

/// Largest threshold t at which pixel (x, y) passes the FAST-9 segment test,
/// or -1 if it fails even at t = 0. Intensities are on the 0-255 scale.
int fast_score(const std::uint8_t* image, int stride, int x, int y);

/// Converts [0,1] intensities to the 8-bit scale FAST operates on.
std::vector<std::uint8_t> to_u8(const GrayImage& image);

/// FAST-9 with 3x3 non-maximum suppression on the score. Candidates closer
/// than `min_distance` to any `exclusion` position are dropped. Sorted by
/// descending score, ties by raster order.
std::vector<Keypoint> detect_fast(const GrayImage& image, int threshold, std::span<const Point2> exclusion = {},
                                  double min_distance = 0.0);

// ---------------------------------------------------------------------------
// Pyramidal Lucas-Kanade

struct KltOptions {
  int patch_size = 21;
  int max_iters = 30;
  double epsilon = 0.01;
  double min_determinant = 1e-6;
  double max_residual = 0.2;  // mean absolute intensity over the level-0 patch
};

struct KltResult {
  Point2 position;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

std::vector<KltResult> track_klt(const ImagePyramid& prev, const ImagePyramid& cur, std::span<const Point2> points,
                                 const KltOptions& options);

// ---------------------------------------------------------------------------
// RANSAC fundamental matrix

struct FundamentalEstimate {
  Eigen::Matrix3d F = Eigen::Matrix3d::Zero();
  std::vector<std::uint8_t> inliers;
  int hypotheses = 0;
  int inlier_count() const;
};

/// First-order geometric epipolar error (square root of the Sampson
/// quantity), in pixels. Convention: x_cur^T F x_prev = 0.
double sampson_distance(const Eigen::Matrix3d& F, const Point2& prev, const Point2& cur);

/// Normalized eight-point fit with rank-2 projection. Uses all supplied
/// correspondences (least squares when more than eight).
/// Throws DegenerateConfiguration when the fit is rank deficient.
Eigen::Matrix3d fit_fundamental_8point(std::span<const Point2> prev, std::span<const Point2> cur);

struct RansacOptions {
  double confidence = 0.99;
  int max_hypotheses = 200;
  std::uint64_t seed = 0;
};

FundamentalEstimate estimate_fundamental_ransac(std::span<const Point2> prev, std::span<const Point2> cur,
                                                double threshold, const RansacOptions& options = {});

// ---------------------------------------------------------------------------
// Tukey fence

/// Type-7 (linear interpolation) quantile of an already sorted sample.
double quantile_type7(std::span<const double> sorted, double p);

/// keep[i] iff values[i] <= Q3 + 1.5 IQR. Throws EmptyInput on an empty list.
std::vector<std::uint8_t> tukey_filter(std::span<const double> values);

// ---------------------------------------------------------------------------
// Frame-to-frame tracker

enum class TrackStatus : std::uint8_t { New, Tracked, Lost };

struct FeatureTrack {
  std::uint64_t id = 0;
  Point2 position = Point2::Zero();
  Point2 prev_position = Point2::Zero();
  int age = 1;
  TrackStatus status = TrackStatus::New;
};

struct FrameStats {
  std::int64_t n_klt = 0;     // LK iterations summed over points and levels
  std::int64_t n_ransac = 0;  // RANSAC hypotheses evaluated
  int tracked_count = 0;      // features that survived KLT (N^t)
  int detected_count = 0;     // new features added this frame
  int inlier_count = 0;       // survivors after RANSAC and the Tukey fence
};

struct TrackerConfig {
  int pyramid_levels = kDefaultPyramidLevels;
  int klt_max_iters = 30;
  double klt_epsilon = 0.01;
  double klt_min_determinant = 1e-6;
  double klt_max_residual = 0.2;
  int max_features = 400;
  double ransac_confidence = 0.99;
  int ransac_max_hypotheses = 200;
  double ransac_min_threshold = 0.25;
  std::uint64_t seed = 0;
};

struct TrackerState {
  std::vector<FeatureTrack> tracks;
  ImagePyramid prev_pyramid;
  int frame_index = 0;
  std::uint64_t next_id = 0;
  int prev_count = 0;
  int cur_count = 0;
};

struct StepResult {
  FrameStats stats;
  std::vector<FeatureTrack> lost;  // tracks dropped this frame, with their final age
};

/// Minimum spacing between a new feature and any other active feature.
int min_feature_spacing(int patch_size);

/// One frame of the pipeline: KLT on existing tracks, RANSAC outlier
/// rejection (when >= 8 survive), Tukey fence on flow magnitudes, then FAST
/// replenishment with half-patch spacing up to `max_features`.
StepResult step_tracker(TrackerState& state, const GrayImage& image, const FrontendParams& params,
                        const TrackerConfig& config = {});

}  // namespace adaptvo
