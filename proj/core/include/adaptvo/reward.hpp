#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adaptvo/frontend.hpp"
#include "adaptvo/image.hpp"

namespace adaptvo {

struct RewardConfig {
  double lambda1 = -15.0;
  double lambda2 = 0.15;
  double lambda3 = 5.0;
  double lambda4 = 0.3;
  double lambda5 = 3.0;
  double lambda6 = 0.03;
  double lambda7 = 10.2;
  double lambda8 = 0.1;
  double alpha0 = 0.3;
  int grid_cols = 8;
  int grid_rows = 8;
  double no_feature_penalty = -35.0;

  void validate() const;
};

/// Parametric per-frame runtime. Coefficients are in microseconds; beta
/// extrapolates the reference CPU to slower target hardware.
struct CostModel {
  double tau_c_us = 187.9201;
  double nu1 = 0.0731, nu2 = 0.0166, nu3 = 0.0010;
  double nu4 = 2.4456, nu5 = 0.1042, nu6 = 0.0050;
  double beta = 10.0;

  void validate() const;
};

struct RewardBreakdown {
  double r_drift = 0.0;
  double r_cover = 0.0;
  double r_comp = 0.0;
  double r_total = 0.0;
  double tau_ms = 0.0;
  double alpha = 0.0;
  double mean_drift_px = 0.0;
  int drift_count = 0;  // features whose drift was measurable
};

/// Distance between the tracked position and the one predicted by ground
/// truth flow from prev_position; nullopt where the flow is invalid.
std::optional<double> feature_drift(const FeatureTrack& track, const FlowField& flow_prev_to_cur);

double r_drift(std::span<const double> drifts, const RewardConfig& config = {});

/// Fraction of grid cells holding at least one position. Trailing pixels
/// that do not divide evenly belong to the last row/column.
double coverage(std::span<const Point2> positions, int width, int height, const RewardConfig& config = {});

double r_cover(double alpha, const RewardConfig& config = {});

/// Runtime estimate in seconds.
double estimate_runtime(const FrameStats& stats, int patch_size, const CostModel& model = {});

double r_comp(double tau_seconds, const RewardConfig& config = {});

/// Full per-frame reward. Drift is measured for tracks in the Tracked state
/// when `flow_prev_to_cur` is given; coverage uses every active track.
RewardBreakdown frame_reward(std::span<const FeatureTrack> tracks, const FlowField* flow_prev_to_cur,
                             const FrameStats& stats, const FrontendParams& params, int width, int height,
                             const RewardConfig& config = {}, const CostModel& model = {});

/// Policy reward minus the reference reward of the same frame.
double training_reward(const RewardBreakdown& policy, const RewardBreakdown& reference);
double training_reward(const RewardBreakdown& policy, int policy_frame, const RewardBreakdown& reference,
                       int reference_frame);

/// One row of the metrics CSV.
struct FrameRecord {
  std::string sequence;
  int frame = 0;
  int n_tracked = 0;
  int n_inliers = 0;
  std::optional<double> mean_drift_px;  // blank when no drift sample exists
  double alpha = 0.0;
  double tau_ms = 0.0;
  double r_drift = 0.0;
  double r_cover = 0.0;
  double r_comp = 0.0;
  double r_total = 0.0;
  int n_new = 0;     // features created this frame
  int n_active = 0;  // features alive after this frame

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

FrameRecord make_record(const std::string& sequence, int frame, const FrameStats& stats,
                        const RewardBreakdown& reward, int n_active, bool drift_available);

struct SequenceMetrics {
  double drift_px_per_s = 0.0;
  double feature_age = 0.0;   // frames, averaged over every feature ever created
  double coverage_pct = 0.0;
  double tau_ms = 0.0;
  double mean_r_total = 0.0;
};

/// Aggregates one sequence. Drift is averaged over frames with drift samples.
SequenceMetrics sequence_metrics(std::span<const FrameRecord> records, double fps);

inline constexpr const char* kMetricsHeader =
    "sequence,frame,n_tracked,n_inliers,mean_drift_px,alpha,tau_ms,r_drift,r_cover,r_comp,r_total,n_new,n_active";

void write_metrics_csv(const std::filesystem::path& path, std::span<const FrameRecord> records);
std::vector<FrameRecord> read_metrics_csv(const std::filesystem::path& path);

}  // namespace adaptvo
