#include "adaptvo_cli/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "adaptvo/error.hpp"

namespace adaptvo::cli {
namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, key + ": " + why);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) bad(key, "not a valid number: '" + v + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) bad(key, "must be finite");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad(key, "not a boolean: '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) bad(key, "empty list");
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T, class Access>
Entry number(std::string key, Access access) {
  return {key,
          [key, access](RunConfig& c, const std::string& v) { access(c) = parse_number<T>(key, v); },
          [access](const RunConfig& c) {
            const T v = access(const_cast<RunConfig&>(c));
            if constexpr (std::is_floating_point_v<T>)
              return fmt_double(v);
            else
              return std::to_string(v);
          }};
}

template <class Access>
Entry real(std::string key, Access access) {
  return number<double>(std::move(key), access);
}

template <class Access>
Entry integer(std::string key, Access access) {
  return number<int>(std::move(key), access);
}

template <class Access>
Entry boolean(std::string key, Access access) {
  return {key, [key, access](RunConfig& c, const std::string& v) { access(c) = parse_bool(key, v); },
          [access](const RunConfig& c) { return std::string(access(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <class Access>
Entry int_list(std::string key, Access access) {
  return {key, [key, access](RunConfig& c, const std::string& v) { access(c) = parse_int_list(key, v); },
          [access](const RunConfig& c) { return fmt_list(access(const_cast<RunConfig&>(c))); }};
}

#define FIELD(expr) [](RunConfig & c) -> auto& { return expr; }

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> t;
    t.push_back(number<std::uint64_t>("seed", FIELD(c.seed)));

    t.push_back(integer("world.width", FIELD(c.world.width)));
    t.push_back(integer("world.height", FIELD(c.world.height)));
    t.push_back(real("world.fov_deg", FIELD(c.world.horizontal_fov_deg)));
    t.push_back(real("world.fps", FIELD(c.world.fps)));
    t.push_back(integer("world.frames", FIELD(c.world.n_frames)));
    t.push_back(integer("world.planes", FIELD(c.world.num_planes)));
    t.push_back(real("world.contrast_min", FIELD(c.world.contrast_min)));
    t.push_back(real("world.contrast_max", FIELD(c.world.contrast_max)));
    t.push_back(integer("world.octaves_min", FIELD(c.world.octaves_min)));
    t.push_back(integer("world.octaves_max", FIELD(c.world.octaves_max)));
    t.push_back(real("world.frequency_min", FIELD(c.world.frequency_min)));
    t.push_back(real("world.frequency_max", FIELD(c.world.frequency_max)));
    t.push_back(real("world.speed_min", FIELD(c.world.speed_min)));
    t.push_back(real("world.speed_max", FIELD(c.world.speed_max)));
    t.push_back(integer("world.waypoint_spacing", FIELD(c.world.waypoint_spacing)));

    t.push_back(real("augment.exposure_s", FIELD(c.world.augment.exposure_s)));
    t.push_back(real("augment.noise_variance", FIELD(c.world.augment.noise_variance)));
    t.push_back(real("augment.gamma", FIELD(c.world.augment.gamma)));
    t.push_back(boolean("augment.blur", FIELD(c.world.augment.enable_blur)));
    t.push_back(boolean("augment.noise", FIELD(c.world.augment.enable_noise)));

    t.push_back(integer("simulate.scenes", FIELD(c.sim_scenes)));
    t.push_back(integer("simulate.first_index", FIELD(c.sim_first_index)));
    t.push_back({"simulate.format",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "png")
                     c.sim_format = ImageFormat::Png;
                   else if (v == "pgm")
                     c.sim_format = ImageFormat::Pgm;
                   else
                     bad("simulate.format", "expected png or pgm, got '" + v + "'");
                 },
                 [](const RunConfig& c) { return std::string(c.sim_format == ImageFormat::Pgm ? "pgm" : "png"); }});

    t.push_back(integer("frontend.fast_threshold", FIELD(c.params.fast_threshold)));
    t.push_back(integer("frontend.patch_size", FIELD(c.params.klt_patch_size)));
    t.push_back(real("frontend.ransac_threshold", FIELD(c.params.ransac_threshold)));

    t.push_back(integer("tracker.pyramid_levels", FIELD(c.eval.tracker.pyramid_levels)));
    t.push_back(integer("tracker.klt_max_iters", FIELD(c.eval.tracker.klt_max_iters)));
    t.push_back(real("tracker.klt_epsilon", FIELD(c.eval.tracker.klt_epsilon)));
    t.push_back(real("tracker.klt_min_determinant", FIELD(c.eval.tracker.klt_min_determinant)));
    t.push_back(real("tracker.klt_max_residual", FIELD(c.eval.tracker.klt_max_residual)));
    t.push_back(integer("tracker.max_features", FIELD(c.eval.tracker.max_features)));
    t.push_back(real("tracker.ransac_confidence", FIELD(c.eval.tracker.ransac_confidence)));
    t.push_back(integer("tracker.ransac_max_hypotheses", FIELD(c.eval.tracker.ransac_max_hypotheses)));
    t.push_back(real("tracker.ransac_min_threshold", FIELD(c.eval.tracker.ransac_min_threshold)));
    t.push_back(number<std::uint64_t>("tracker.seed", FIELD(c.eval.tracker.seed)));

    t.push_back(real("reward.lambda1", FIELD(c.eval.reward.lambda1)));
    t.push_back(real("reward.lambda2", FIELD(c.eval.reward.lambda2)));
    t.push_back(real("reward.lambda3", FIELD(c.eval.reward.lambda3)));
    t.push_back(real("reward.lambda4", FIELD(c.eval.reward.lambda4)));
    t.push_back(real("reward.lambda5", FIELD(c.eval.reward.lambda5)));
    t.push_back(real("reward.lambda6", FIELD(c.eval.reward.lambda6)));
    t.push_back(real("reward.lambda7", FIELD(c.eval.reward.lambda7)));
    t.push_back(real("reward.lambda8", FIELD(c.eval.reward.lambda8)));
    t.push_back(real("reward.alpha0", FIELD(c.eval.reward.alpha0)));
    t.push_back(integer("reward.grid_cols", FIELD(c.eval.reward.grid_cols)));
    t.push_back(integer("reward.grid_rows", FIELD(c.eval.reward.grid_rows)));
    t.push_back(real("reward.no_feature_penalty", FIELD(c.eval.reward.no_feature_penalty)));

    t.push_back(real("cost.tau_c_us", FIELD(c.eval.cost.tau_c_us)));
    t.push_back(real("cost.nu1", FIELD(c.eval.cost.nu1)));
    t.push_back(real("cost.nu2", FIELD(c.eval.cost.nu2)));
    t.push_back(real("cost.nu3", FIELD(c.eval.cost.nu3)));
    t.push_back(real("cost.nu4", FIELD(c.eval.cost.nu4)));
    t.push_back(real("cost.nu5", FIELD(c.eval.cost.nu5)));
    t.push_back(real("cost.nu6", FIELD(c.eval.cost.nu6)));
    t.push_back(real("cost.beta", FIELD(c.eval.cost.beta)));

    t.push_back(integer("pso.particles", FIELD(c.pso.particles)));
    t.push_back(integer("pso.iterations", FIELD(c.pso.iterations)));
    t.push_back(real("pso.inertia", FIELD(c.pso.inertia)));
    t.push_back(real("pso.cognitive", FIELD(c.pso.cognitive)));
    t.push_back(real("pso.social", FIELD(c.pso.social)));
    t.push_back(integer("pso.frames", FIELD(c.pso_frames)));

    t.push_back(real("ppo.gamma", FIELD(c.ppo.gamma)));
    t.push_back(real("ppo.gae_lambda", FIELD(c.ppo.gae_lambda)));
    t.push_back(real("ppo.clip", FIELD(c.ppo.clip)));
    t.push_back(integer("ppo.epochs", FIELD(c.ppo.epochs)));
    t.push_back(integer("ppo.minibatch", FIELD(c.ppo.minibatch)));
    t.push_back(real("ppo.entropy_coef", FIELD(c.ppo.entropy_coef)));
    t.push_back(real("ppo.value_coef", FIELD(c.ppo.value_coef)));
    t.push_back(integer("ppo.envs", FIELD(c.ppo.envs)));
    t.push_back(integer("ppo.rollout", FIELD(c.ppo.rollout)));
    t.push_back(real("ppo.lr_start", FIELD(c.ppo.lr_start)));
    t.push_back(real("ppo.lr_end", FIELD(c.ppo.lr_end)));
    t.push_back(boolean("ppo.normalize_advantages", FIELD(c.ppo.normalize_advantages)));
    t.push_back(real("ppo.reward_scale", FIELD(c.ppo.reward_scale)));

    t.push_back(integer("train.updates", FIELD(c.train_updates)));
    t.push_back(int_list("train.hidden", FIELD(c.shape.hidden)));
    t.push_back({"train.obs_mode",
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.shape.mode = obs_mode_from_string(v);
                   } catch (const Error& e) {
                     bad("train.obs_mode", e.what());
                   }
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.shape.mode)); }});
    t.push_back(real("train.init_log_std", FIELD(c.shape.init_log_std)));
    t.push_back(integer("train.horizon", FIELD(c.shape.horizon)));
    t.push_back(integer("train.checkpoint_every", FIELD(c.checkpoint_every)));
    t.push_back(boolean("train.freeze_encoder", FIELD(c.freeze_encoder)));

    t.push_back(real("bandit.lr", FIELD(c.bandit.lr)));
    t.push_back(integer("bandit.batch", FIELD(c.bandit.batch)));
    t.push_back(integer("bandit.replay_capacity", FIELD(c.bandit.replay_capacity)));
    t.push_back(integer("bandit.gradient_steps", FIELD(c.bandit.gradient_steps)));
    t.push_back(integer("bandit.transitions_per_step", FIELD(c.bandit.transitions_per_step)));
    t.push_back(integer("bandit.warmup", FIELD(c.bandit.warmup_transitions)));
    t.push_back(int_list("bandit.critic_hidden", FIELD(c.bandit.critic_hidden)));
    t.push_back(boolean("bandit.freeze_encoder", FIELD(c.bandit.freeze_encoder)));
    t.push_back(real("bandit.worst_reward", FIELD(c.bandit.worst_reward)));

    t.push_back(real("report.fps", FIELD(c.report_fps)));
    return t;
  }();
  return entries;
}

#undef FIELD

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) bad(key, why);
}

// Re-labels a library validation failure as a configuration error.
template <class F>
void check(const std::string& what, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    bad(what, e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void RunConfig::validate() const {
  const WorldConfig& w = world;
  require(w.width >= 16 && w.height >= 16, "world.width", "image must be at least 16x16");
  require(w.horizontal_fov_deg > 0.0 && w.horizontal_fov_deg < 180.0, "world.fov_deg", "must be in (0, 180)");
  require(w.fps > 0.0, "world.fps", "must be > 0");
  require(w.n_frames >= 1, "world.frames", "must be >= 1");
  require(w.num_planes >= 1, "world.planes", "must be >= 1");
  require(w.contrast_min >= 0.0 && w.contrast_min <= w.contrast_max && w.contrast_max <= 1.0, "world.contrast_min",
          "need 0 <= contrast_min <= contrast_max <= 1");
  require(w.octaves_min >= 1 && w.octaves_min <= w.octaves_max, "world.octaves_min",
          "need 1 <= octaves_min <= octaves_max");
  require(w.frequency_min > 0.0 && w.frequency_min <= w.frequency_max, "world.frequency_min",
          "need 0 < frequency_min <= frequency_max");
  require(w.speed_min >= 0.0 && w.speed_min <= w.speed_max, "world.speed_min", "need 0 <= speed_min <= speed_max");
  require(w.waypoint_spacing >= 1, "world.waypoint_spacing", "must be >= 1");
  check("augment", [&] { w.augment.validate(); });
  require(sim_scenes >= 0, "simulate.scenes", "must be >= 0");
  require(sim_first_index >= 0, "simulate.first_index", "must be >= 0");

  check("frontend", [&] { params.validate(); });
  const TrackerConfig& tr = eval.tracker;
  require(tr.pyramid_levels >= 1, "tracker.pyramid_levels", "must be >= 1");
  require(tr.klt_max_iters >= 1, "tracker.klt_max_iters", "must be >= 1");
  require(tr.klt_epsilon > 0.0, "tracker.klt_epsilon", "must be > 0");
  require(tr.klt_min_determinant >= 0.0, "tracker.klt_min_determinant", "must be >= 0");
  require(tr.klt_max_residual > 0.0, "tracker.klt_max_residual", "must be > 0");
  require(tr.max_features >= 1, "tracker.max_features", "must be >= 1");
  require(tr.ransac_confidence > 0.0 && tr.ransac_confidence < 1.0, "tracker.ransac_confidence",
          "must be in (0, 1)");
  require(tr.ransac_max_hypotheses >= 1, "tracker.ransac_max_hypotheses", "must be >= 1");
  require(tr.ransac_min_threshold >= 0.0, "tracker.ransac_min_threshold", "must be >= 0");
  check("reward", [&] { eval.reward.validate(); });
  check("cost", [&] { eval.cost.validate(); });

  check("pso", [&] { pso.validate(); });
  require(pso_frames >= 0, "pso.frames", "must be >= 0");

  require(!shape.hidden.empty(), "train.hidden", "needs at least one hidden layer");
  for (int h : shape.hidden) require(h >= 1, "train.hidden", "layer widths must be >= 1");
  require(shape.horizon >= 1, "train.horizon", "must be >= 1");
  require(checkpoint_every >= 0, "train.checkpoint_every", "must be >= 0");
  require(freeze_encoder, "train.freeze_encoder", "PPO optimizes only the MLP policy; the encoder stays frozen");
  check("ppo", [&] { train_config().validate(); });

  for (int h : bandit.critic_hidden) require(h >= 1, "bandit.critic_hidden", "layer widths must be >= 1");
  check("bandit", [&] { bandit.validate(); });
  require(report_fps >= 0.0, "report.fps", "must be >= 0");
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.ppo = ppo;
  t.updates = train_updates;
  t.shape = shape;
  t.shape.max_features = eval.tracker.max_features;
  t.eval = eval;
  t.seed = seed;
  return t;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidConfig, source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::InvalidConfig, source + ":" + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const Entry& e : table())
    if (e.key == key) {
      e.set(config, value);
      return;
    }
  bad(key, "unknown configuration key");
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& source) {
  for (const auto& [k, v] : parse_key_values(text, source)) set_config_value(config, k, v);
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  apply_config_text(config, read_text(path), path.string());
}

std::string dump_config(const RunConfig& config) {
  std::string s;
  for (const Entry& e : table()) s += e.key + " = " + e.get(config) + "\n";
  return s;
}

void write_params_file(const std::filesystem::path& path, const ParamsFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "fast_threshold = " << file.params.fast_threshold << '\n'
      << "patch_size = " << file.params.klt_patch_size << '\n'
      << "ransac_threshold = " << fmt_double(file.params.ransac_threshold) << '\n'
      << "score = " << fmt_double(file.score) << '\n'
      << "split = " << file.split << '\n'
      << "evaluations = " << file.evaluations << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

ParamsFile read_params_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read params file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  ParamsFile f;
  bool seen[3] = {false, false, false};
  try {
    for (const auto& [k, v] : parse_key_values(ss.str(), path.string())) {
      if (k == "fast_threshold") {
        f.params.fast_threshold = parse_number<int>(k, v);
        seen[0] = true;
      } else if (k == "patch_size") {
        f.params.klt_patch_size = parse_number<int>(k, v);
        seen[1] = true;
      } else if (k == "ransac_threshold") {
        f.params.ransac_threshold = parse_number<double>(k, v);
        seen[2] = true;
      } else if (k == "score") {
        f.score = parse_number<double>(k, v);
      } else if (k == "split") {
        f.split = v;
      } else if (k == "evaluations") {
        f.evaluations = parse_number<long long>(k, v);
      } else {
        bad(k, "unknown key in params file");
      }
    }
    if (!seen[0] || !seen[1] || !seen[2]) bad(path.string(), "params file needs fast_threshold, patch_size and ransac_threshold");
    f.params.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
  return f;
}

}  // namespace adaptvo::cli
