#include <algorithm>
#include <cmath>
#include <string>

#include "adaptvo/error.hpp"
#include "adaptvo/frontend.hpp"
#include "adaptvo/rng.hpp"
#include "point_grid.hpp"

namespace adaptvo {

void FrontendParams::validate() const {
  if (fast_threshold < kFastThresholdMin || fast_threshold > kFastThresholdMax)
    throw Error(ErrorCode::InvalidArgument, "fast_threshold outside {0..209}: " + std::to_string(fast_threshold));
  if (klt_patch_size < kPatchSizeMin || klt_patch_size > kPatchSizeMax || klt_patch_size % 2 == 0)
    throw Error(ErrorCode::InvalidArgument, "klt_patch_size must be odd in {3..41}: " + std::to_string(klt_patch_size));
  if (!(ransac_threshold >= kRansacThresholdMin && ransac_threshold <= kRansacThresholdMax))
    throw Error(ErrorCode::InvalidArgument, "ransac_threshold outside [0,3]");
}

int min_feature_spacing(int patch_size) { return (patch_size + 1) / 2; }

StepResult step_tracker(TrackerState& state, const GrayImage& image, const FrontendParams& params,
                        const TrackerConfig& config) {
  params.validate();
  if (!state.prev_pyramid.empty() && (state.prev_pyramid.level(0).width() != image.width() ||
                                      state.prev_pyramid.level(0).height() != image.height()))
    throw Error(ErrorCode::DimensionMismatch, "frame size differs from the tracker's previous frame");

  ImagePyramid pyramid = build_pyramid(image, config.pyramid_levels);
  StepResult result;
  std::vector<FeatureTrack> survivors;

  if (!state.tracks.empty() && !state.prev_pyramid.empty()) {
    std::vector<Point2> points;
    points.reserve(state.tracks.size());
    for (const auto& t : state.tracks) points.push_back(t.position);

    KltOptions klt;
    klt.patch_size = params.klt_patch_size;
    klt.max_iters = config.klt_max_iters;
    klt.epsilon = config.klt_epsilon;
    klt.min_determinant = config.klt_min_determinant;
    klt.max_residual = config.klt_max_residual;
    const auto tracked = track_klt(state.prev_pyramid, pyramid, points, klt);

    std::vector<FeatureTrack> candidates;
    for (std::size_t i = 0; i < tracked.size(); ++i) {
      result.stats.n_klt += tracked[i].iterations;
      FeatureTrack t = state.tracks[i];
      if (tracked[i].converged) {
        t.prev_position = t.position;
        t.position = tracked[i].position;
        candidates.push_back(t);
      } else {
        t.status = TrackStatus::Lost;
        result.lost.push_back(t);
      }
    }
    result.stats.tracked_count = static_cast<int>(candidates.size());

    std::vector<std::uint8_t> keep(candidates.size(), 1);
    if (candidates.size() >= 8) {
      std::vector<Point2> p0, p1;
      for (const auto& t : candidates) {
        p0.push_back(t.prev_position);
        p1.push_back(t.position);
      }
      RansacOptions ro;
      ro.confidence = config.ransac_confidence;
      ro.max_hypotheses = config.ransac_max_hypotheses;
      ro.seed = mix_seed(config.seed, static_cast<std::uint64_t>(state.frame_index));
      const double threshold = std::max(params.ransac_threshold, config.ransac_min_threshold);
      try {
        const auto est = estimate_fundamental_ransac(p0, p1, threshold, ro);
        result.stats.n_ransac = est.hypotheses;
        keep = est.inliers;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateConfiguration) throw;
        result.stats.n_ransac = config.ransac_max_hypotheses;
      }
    }

    std::vector<std::size_t> kept_idx;
    std::vector<double> magnitudes;
    for (std::size_t i = 0; i < candidates.size(); ++i)
      if (keep[i]) {
        kept_idx.push_back(i);
        magnitudes.push_back((candidates[i].position - candidates[i].prev_position).norm());
      }
    std::vector<std::uint8_t> fence(kept_idx.size(), 1);
    if (!magnitudes.empty()) fence = tukey_filter(magnitudes);
    for (std::size_t k = 0; k < kept_idx.size(); ++k) keep[kept_idx[k]] = fence[k];

    for (std::size_t i = 0; i < candidates.size(); ++i) {
      FeatureTrack t = candidates[i];
      if (keep[i]) {
        t.age += 1;
        t.status = TrackStatus::Tracked;
        survivors.push_back(t);
      } else {
        t.status = TrackStatus::Lost;
        t.position = t.prev_position;
        result.lost.push_back(t);
      }
    }
    result.stats.inlier_count = static_cast<int>(survivors.size());
  }

  const int spacing = min_feature_spacing(params.klt_patch_size);
  const int capacity = config.max_features - static_cast<int>(survivors.size());
  if (capacity > 0) {
    std::vector<Point2> existing;
    existing.reserve(survivors.size());
    for (const auto& t : survivors) existing.push_back(t.position);
    const auto keypoints = detect_fast(image, params.fast_threshold, existing, spacing);
    detail::PointGrid accepted(image.width(), image.height(), spacing);
    int added = 0;
    for (const auto& kp : keypoints) {
      if (added >= capacity) break;
      if (accepted.any_within(kp.position, spacing)) continue;
      accepted.insert(kp.position);
      FeatureTrack t;
      t.id = state.next_id++;
      t.position = kp.position;
      t.prev_position = kp.position;
      t.age = 1;
      t.status = TrackStatus::New;
      survivors.push_back(t);
      ++added;
    }
    result.stats.detected_count = added;
  }

  state.tracks = std::move(survivors);
  state.prev_pyramid = std::move(pyramid);
  state.prev_count = state.cur_count;
  state.cur_count = static_cast<int>(state.tracks.size());
  ++state.frame_index;
  return result;
}

}  // namespace adaptvo
