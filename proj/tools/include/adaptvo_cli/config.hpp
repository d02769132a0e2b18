#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "adaptvo/bandit.hpp"
#include "adaptvo/pso.hpp"
#include "adaptvo/rollout.hpp"
#include "adaptvo/sequence_io.hpp"
#include "adaptvo/simworld.hpp"
#include "adaptvo/train.hpp"

namespace adaptvo::cli {

/// Everything a subcommand may need, filled from defaults, then the config
/// file, then command-line overrides.
struct RunConfig {
  std::uint64_t seed = 0;

  WorldConfig world;
  int sim_scenes = 2;
  int sim_first_index = 0;
  ImageFormat sim_format = ImageFormat::Png;

  FrontendParams params;  // static parameters when no params file is given
  EvalConfig eval;

  PsoConfig pso;
  int pso_frames = 0;  // frames per sequence fed to the objective, 0 = all

  PpoConfig ppo;
  int train_updates = 300;
  ModelShape shape;
  int checkpoint_every = 0;  // 0 = only the final checkpoint
  bool freeze_encoder = true;  // PPO updates only the MLP policy

  BanditConfig bandit;

  double report_fps = 0.0;  // 0 = world.fps

  /// Throws Error(InvalidConfig) naming the first offending key.
  void validate() const;

  TrainConfig train_config() const;
};

/// "key = value" lines; '#' starts a comment; blank lines are ignored.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text, const std::string& source);

/// Applies one setting. Unknown keys and malformed values throw InvalidConfig.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

void apply_config_text(RunConfig& config, const std::string& text, const std::string& source);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Every recognized key with its current value, one "key = value" per line,
/// in a stable order. Feeding the output back reproduces the config.
std::string dump_config(const RunConfig& config);

/// Static-parameter file written by tune-pso and read by track / train.
struct ParamsFile {
  FrontendParams params;
  double score = 0.0;
  std::string split;
  long long evaluations = 0;
};

void write_params_file(const std::filesystem::path& path, const ParamsFile& file);
ParamsFile read_params_file(const std::filesystem::path& path);

}  // namespace adaptvo::cli
