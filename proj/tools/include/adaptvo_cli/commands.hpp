#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adaptvo/error.hpp"
#include "adaptvo/rollout.hpp"
#include "adaptvo_cli/config.hpp"

namespace adaptvo::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitInvalidConfig = 1, kExitDataError = 2, kExitInternal = 3 };

/// Maps a library error to the process exit code.
int exit_code_for(ErrorCode code);

/// Loads every sequence under `root` (or `root` itself when it holds frames).
/// The frame rate comes from the pose timestamps when available.
std::vector<TrainingScene> load_scenes(const std::filesystem::path& root, double fallback_fps);

bool has_flow(const TrainingScene& scene);

/// Writes config.sim_scenes episodes as <out>/scene_NNN.
int cmd_simulate(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);

struct TrackOptions {
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> params_file;
  std::optional<std::filesystem::path> checkpoint;
  bool require_drift = false;
  std::filesystem::path out;  // metrics CSV
};
int cmd_track(const RunConfig& config, const TrackOptions& options, std::ostream& log);

struct TunePsoOptions {
  std::filesystem::path dataset;
  std::string split = "train";  // recorded in the params file
  bool sphere_self_test = false;
  std::filesystem::path out;    // params file
};
int cmd_tune_pso(const RunConfig& config, const TunePsoOptions& options, std::ostream& log);

/// Analytic-optimum check of the PSO: maximizes -|x - c|^2 for ten seeds.
bool pso_sphere_self_test(const PsoConfig& base, std::ostream& log);

struct PretrainOptions {
  std::filesystem::path dataset;
  std::filesystem::path out;  // encoder file; "<out>.loss.csv" receives the loss curve
};
int cmd_pretrain_encoder(const RunConfig& config, const PretrainOptions& options, std::ostream& log);

struct TrainOptions {
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> params_file;  // reference parameters, required for a fresh run
  std::optional<std::filesystem::path> resume;       // checkpoint to continue from
  std::optional<std::filesystem::path> encoder;      // pretrained encoder for obs_mode = encoder
  std::filesystem::path out;                         // directory: checkpoint.txt, curve.csv
};
int cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& log);

struct ReportOptions {
  std::vector<std::pair<std::string, std::filesystem::path>> methods;  // (name, metrics CSV)
  std::optional<std::filesystem::path> out;                            // CSV of the table
};

struct ReportRow {
  std::string sequence;  // "average" for the mean row
  std::vector<SequenceMetrics> per_method;
};

struct Report {
  std::vector<std::string> methods;
  std::vector<ReportRow> rows;  // per sequence, sorted by name, then the average row
};

/// Aggregates metrics CSVs; throws SequenceMismatch when a sequence is
/// missing from one method.
Report build_report(const std::vector<std::pair<std::string, std::vector<FrameRecord>>>& methods, double fps);
std::string format_report_table(const Report& report);
void write_report_csv(const std::filesystem::path& path, const Report& report);

int cmd_report(const RunConfig& config, const ReportOptions& options, std::ostream& log);

}  // namespace adaptvo::cli
