#include "adaptvo/reward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "adaptvo/error.hpp"

namespace adaptvo {
namespace {

int cell_index(double coord, int extent, int cells) {
  const int cell_size = std::max(1, extent / cells);
  const int c = static_cast<int>(std::floor(coord)) / cell_size;
  return std::clamp(c, 0, cells - 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument,
                path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

}  // namespace

void RewardConfig::validate() const {
  if (grid_cols < 1 || grid_rows < 1) throw Error(ErrorCode::InvalidArgument, "coverage grid must be at least 1x1");
  if (!(alpha0 >= 0.0 && alpha0 <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha0 outside [0,1]");
}

void CostModel::validate() const {
  for (double c : {tau_c_us, nu1, nu2, nu3, nu4, nu5, nu6})
    if (!(c >= 0.0)) throw Error(ErrorCode::InvalidArgument, "cost coefficients must be >= 0");
  if (!(beta > 0.0)) throw Error(ErrorCode::InvalidArgument, "beta must be > 0");
}

std::optional<double> feature_drift(const FeatureTrack& track, const FlowField& flow) {
  const auto gt = flow.sample(track.prev_position.x(), track.prev_position.y());
  if (!gt) return std::nullopt;
  return (track.position - (track.prev_position + *gt)).norm();
}

double r_drift(std::span<const double> drifts, const RewardConfig& c) {
  if (drifts.empty()) return c.no_feature_penalty;
  double sum = 0.0;
  for (double d : drifts) sum += c.lambda1 * std::tanh(c.lambda2 * d) + c.lambda3;
  return sum;
}

double coverage(std::span<const Point2> positions, int width, int height, const RewardConfig& c) {
  std::vector<std::uint8_t> occupied(static_cast<std::size_t>(c.grid_cols) * c.grid_rows, 0);
  for (const Point2& p : positions) {
    const int cx = cell_index(p.x(), width, c.grid_cols);
    const int cy = cell_index(p.y(), height, c.grid_rows);
    occupied[static_cast<std::size_t>(cy) * c.grid_cols + cx] = 1;
  }
  const auto n = std::count(occupied.begin(), occupied.end(), std::uint8_t{1});
  return static_cast<double>(n) / static_cast<double>(occupied.size());
}

double r_cover(double alpha, const RewardConfig& c) {
  const double slope = alpha >= c.alpha0 ? c.lambda4 : c.lambda5;
  return slope * (alpha - c.alpha0) + c.lambda6;
}

double estimate_runtime(const FrameStats& stats, int patch_size, const CostModel& m) {
  const double n_klt = static_cast<double>(stats.n_klt);
  const double n_ransac = static_cast<double>(stats.n_ransac);
  const double n = stats.tracked_count;
  const double w2 = static_cast<double>(patch_size) * patch_size;
  const double tau_klt = m.nu1 * n_klt + m.nu2 * w2 + m.nu3 * n_klt * w2;
  const double tau_ransac = m.nu4 * n_ransac + m.nu5 * n + m.nu6 * n_ransac * n;
  return m.beta * (tau_klt + tau_ransac + m.tau_c_us) * 1e-6;
}

double r_comp(double tau_seconds, const RewardConfig& c) {
  if (!(tau_seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "runtime must be positive");
  return std::clamp(-std::exp(-1.0 / tau_seconds + c.lambda7) + c.lambda8, -10.0, 0.1);
}

RewardBreakdown frame_reward(std::span<const FeatureTrack> tracks, const FlowField* flow, const FrameStats& stats,
                             const FrontendParams& params, int width, int height, const RewardConfig& config,
                             const CostModel& model) {
  std::vector<double> drifts;
  std::vector<Point2> positions;
  positions.reserve(tracks.size());
  for (const FeatureTrack& t : tracks) {
    if (t.status == TrackStatus::Lost) continue;
    positions.push_back(t.position);
    if (flow && t.status == TrackStatus::Tracked)
      if (const auto d = feature_drift(t, *flow)) drifts.push_back(*d);
  }
  RewardBreakdown b;
  b.r_drift = r_drift(drifts, config);
  b.alpha = coverage(positions, width, height, config);
  b.r_cover = r_cover(b.alpha, config);
  const double tau = estimate_runtime(stats, params.klt_patch_size, model);
  b.tau_ms = tau * 1e3;
  b.r_comp = r_comp(tau, config);
  b.r_total = b.r_drift + b.r_cover + b.r_comp;
  b.drift_count = static_cast<int>(drifts.size());
  if (!drifts.empty()) {
    double s = 0.0;
    for (double d : drifts) s += d;
    b.mean_drift_px = s / static_cast<double>(drifts.size());
  }
  return b;
}

double training_reward(const RewardBreakdown& policy, const RewardBreakdown& reference) {
  return policy.r_total - reference.r_total;
}

double training_reward(const RewardBreakdown& policy, int policy_frame, const RewardBreakdown& reference,
                       int reference_frame) {
  if (policy_frame != reference_frame)
    throw Error(ErrorCode::FrameMismatch, "policy frame " + std::to_string(policy_frame) +
                                              " vs reference frame " + std::to_string(reference_frame));
  return training_reward(policy, reference);
}

FrameRecord make_record(const std::string& sequence, int frame, const FrameStats& stats,
                        const RewardBreakdown& reward, int n_active, bool drift_available) {
  FrameRecord r;
  r.sequence = sequence;
  r.frame = frame;
  r.n_tracked = stats.tracked_count;
  r.n_inliers = stats.inlier_count;
  if (drift_available && reward.drift_count > 0) r.mean_drift_px = reward.mean_drift_px;
  r.alpha = reward.alpha;
  r.tau_ms = reward.tau_ms;
  r.r_drift = reward.r_drift;
  r.r_cover = reward.r_cover;
  r.r_comp = reward.r_comp;
  r.r_total = reward.r_total;
  r.n_new = stats.detected_count;
  r.n_active = n_active;
  return r;
}

SequenceMetrics sequence_metrics(std::span<const FrameRecord> records, double fps) {
  if (records.empty()) throw Error(ErrorCode::EmptySequence, "no frame records");
  SequenceMetrics m;
  double drift_sum = 0.0, alpha_sum = 0.0, tau_sum = 0.0, r_sum = 0.0;
  long long drift_frames = 0, created = 0, alive_frames = 0;
  for (const FrameRecord& r : records) {
    if (r.mean_drift_px) {
      drift_sum += *r.mean_drift_px;
      ++drift_frames;
    }
    alpha_sum += r.alpha;
    tau_sum += r.tau_ms;
    r_sum += r.r_total;
    created += r.n_new;
    alive_frames += r.n_active;
  }
  const double n = static_cast<double>(records.size());
  // Each active feature adds one frame to its own age, so the summed active
  // counts equal the summed final ages of all created features.
  m.drift_px_per_s = drift_frames > 0 ? drift_sum / static_cast<double>(drift_frames) * fps : 0.0;
  m.feature_age = created > 0 ? static_cast<double>(alive_frames) / static_cast<double>(created) : 0.0;
  m.coverage_pct = alpha_sum / n * 100.0;
  m.tau_ms = tau_sum / n;
  m.mean_r_total = r_sum / n;
  return m;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const FrameRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << kMetricsHeader << '\n';
  for (const FrameRecord& r : records) {
    if (r.sequence.find_first_of(",\n") != std::string::npos)
      throw Error(ErrorCode::InvalidArgument, "sequence name contains a comma or newline: " + r.sequence);
    out << r.sequence << ',' << r.frame << ',' << r.n_tracked << ',' << r.n_inliers << ','
        << (r.mean_drift_px ? fmt(*r.mean_drift_px) : std::string()) << ',' << fmt(r.alpha) << ',' << fmt(r.tau_ms)
        << ',' << fmt(r.r_drift) << ',' << fmt(r.r_cover) << ',' << fmt(r.r_comp) << ',' << fmt(r.r_total) << ','
        << r.n_new << ',' << r.n_active << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<FrameRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw Error(ErrorCode::InvalidArgument, path.string() + ": unexpected metrics header");
  std::vector<FrameRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 13)
      throw Error(ErrorCode::InvalidArgument, path.string() + ":" + std::to_string(lineno) + ": expected 13 fields");
    FrameRecord r;
    r.sequence = f[0];
    r.frame = static_cast<int>(parse_double(f[1], path, lineno));
    r.n_tracked = static_cast<int>(parse_double(f[2], path, lineno));
    r.n_inliers = static_cast<int>(parse_double(f[3], path, lineno));
    if (!f[4].empty()) r.mean_drift_px = parse_double(f[4], path, lineno);
    r.alpha = parse_double(f[5], path, lineno);
    r.tau_ms = parse_double(f[6], path, lineno);
    r.r_drift = parse_double(f[7], path, lineno);
    r.r_cover = parse_double(f[8], path, lineno);
    r.r_comp = parse_double(f[9], path, lineno);
    r.r_total = parse_double(f[10], path, lineno);
    r.n_new = static_cast<int>(parse_double(f[11], path, lineno));
    r.n_active = static_cast<int>(parse_double(f[12], path, lineno));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace adaptvo
