#include "adaptvo_cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "adaptvo/checkpoint.hpp"
#include "adaptvo/error.hpp"

namespace adaptvo::cli {
namespace fs = std::filesystem;
namespace {

void require_path(const fs::path& p, const std::string& what) {
  if (p.empty()) throw Error(ErrorCode::InvalidConfig, what + " is required");
  if (!fs::exists(p)) throw Error(ErrorCode::InvalidConfig, what + " does not exist: " + p.string());
}

void require_out(const fs::path& p, const std::string& cmd) {
  if (p.empty()) throw Error(ErrorCode::InvalidConfig, cmd + " needs --out");
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<TrainingScene> scenes_with_flow(const std::vector<TrainingScene>& all, bool require_all,
                                            const std::string& cmd) {
  std::vector<TrainingScene> out;
  for (const auto& s : all) {
    if (has_flow(s))
      out.push_back(s);
    else if (require_all)
      throw Error(ErrorCode::MissingFlow, cmd + ": sequence '" + s.name + "' has no ground-truth flow");
  }
  if (out.empty()) throw Error(ErrorCode::MissingFlow, cmd + ": no sequence carries ground-truth flow");
  return out;
}

void log_metrics(std::ostream& log, const std::string& name, std::size_t frames, const SequenceMetrics& m,
                 bool drift) {
  log << name << ": " << frames << " frames";
  if (drift) log << ", drift " << fmt("%.3f", m.drift_px_per_s) << " px/s";
  log << ", age " << fmt("%.3f", m.feature_age) << ", coverage " << fmt("%.2f", m.coverage_pct) << " %, tau "
      << fmt("%.3f", m.tau_ms) << " ms, r_total " << fmt("%.3f", m.mean_r_total) << '\n';
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument:
      return kExitInvalidConfig;
    case ErrorCode::ImageTooSmall:
    case ErrorCode::MissingFrame:
    case ErrorCode::CorruptFlow:
    case ErrorCode::MalformedPoseLine:
    case ErrorCode::EmptyInput:
    case ErrorCode::FrameMismatch:
    case ErrorCode::EmptySequence:
    case ErrorCode::IoError:
    case ErrorCode::MissingFlow:
    case ErrorCode::SequenceMismatch:
    case ErrorCode::CorruptCheckpoint:
      return kExitDataError;
    default:
      return kExitInternal;
  }
}

std::vector<TrainingScene> load_scenes(const fs::path& root, double fallback_fps) {
  std::vector<TrainingScene> scenes;
  for (const fs::path& dir : list_sequences(root)) {
    TrainingScene s;
    const fs::path clean = dir.lexically_normal();
    s.name = clean.has_filename() ? clean.filename().string() : clean.parent_path().filename().string();
    s.frames = load_sequence(dir, fallback_fps);
    s.fps = fallback_fps;
    if (s.frames.size() >= 2) {
      const double span = s.frames.back().timestamp - s.frames.front().timestamp;
      if (span > 0.0) s.fps = static_cast<double>(s.frames.size() - 1) / span;
    }
    scenes.push_back(std::move(s));
  }
  if (scenes.empty()) throw Error(ErrorCode::EmptyInput, "no sequences found under " + root.string());
  return scenes;
}

bool has_flow(const TrainingScene& scene) {
  return std::any_of(scene.frames.begin(), scene.frames.end(),
                     [](const SequenceFrame& f) { return f.gt_flow_to_next.has_value(); });
}

int cmd_simulate(const RunConfig& config, const fs::path& out, std::ostream& log) {
  config.validate();
  require_out(out, "simulate");
  for (int i = 0; i < config.sim_scenes; ++i) {
    const int idx = config.sim_first_index + i;
    const Episode ep = generate_episode(config.world, mix_seed(config.seed, static_cast<std::uint64_t>(idx)));
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03d", idx);
    save_sequence(out / name, ep.frames, config.sim_format);
    const auto flows = std::count_if(ep.frames.begin(), ep.frames.end(),
                                     [](const SequenceFrame& f) { return f.gt_flow_to_next.has_value(); });
    log << name << ": " << ep.frames.size() << " frames, " << flows << " flow files\n";
  }
  return kExitOk;
}

int cmd_track(const RunConfig& config, const TrackOptions& o, std::ostream& log) {
  config.validate();
  require_out(o.out, "track");
  require_path(o.dataset, "--dataset");
  if (o.params_file && o.checkpoint)
    throw Error(ErrorCode::InvalidConfig, "track takes either --params or --checkpoint, not both");
  FrontendParams params = config.params;
  if (o.params_file) {
    require_path(*o.params_file, "--params");
    params = read_params_file(*o.params_file).params;
  }
  std::optional<Checkpoint> ckpt;
  if (o.checkpoint) {
    require_path(*o.checkpoint, "--checkpoint");
    ckpt = load_checkpoint(*o.checkpoint);
  }

  const auto scenes = load_scenes(o.dataset, config.world.fps);
  std::vector<FrameRecord> records;
  for (const auto& s : scenes) {
    const bool flow = has_flow(s);
    if (o.require_drift && !flow)
      throw Error(ErrorCode::MissingFlow, "drift requested but sequence '" + s.name + "' has no ground-truth flow");
    const auto outcomes = ckpt ? run_policy(s.frames, ckpt->model, config.eval) : run_static(s.frames, params, config.eval);
    const auto recs = to_records(s.name, outcomes, flow);
    log_metrics(log, s.name, s.frames.size(), sequence_metrics(recs, s.fps), flow);
    records.insert(records.end(), recs.begin(), recs.end());
  }
  write_metrics_csv(o.out, records);
  return kExitOk;
}

bool pso_sphere_self_test(const PsoConfig& base, std::ostream& log) {
  const Eigen::Vector3d center(0.37, -0.52, 0.81);
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(3, -1.0), hi = Eigen::VectorXd::Constant(3, 1.0);
  bool all = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    PsoConfig pc = base;
    pc.seed = seed;
    pc.iterations = 200;
    pc.initial_positions.clear();
    const PsoResult r = pso_maximize([&](const Eigen::VectorXd& x) { return -(x - center).squaredNorm(); }, lo, hi, pc);
    const double err = (r.best_position - center).cwiseAbs().maxCoeff();
    const bool ok = err <= 1e-2;
    all = all && ok;
    log << "sphere self-test seed " << seed << ": " << (ok ? "PASS" : "FAIL") << " (max abs error "
        << fmt("%.3g", err) << ")\n";
  }
  log << "sphere self-test: " << (all ? "PASS" : "FAIL") << '\n';
  return all;
}

int cmd_tune_pso(const RunConfig& config, const TunePsoOptions& o, std::ostream& log) {
  config.validate();
  if (o.sphere_self_test) return pso_sphere_self_test(config.pso, log) ? kExitOk : kExitInternal;
  require_out(o.out, "tune-pso");
  require_path(o.dataset, "--dataset");
  auto scenes = load_scenes(o.dataset, config.world.fps);
  for (const auto& s : scenes)
    if (!has_flow(s)) log << "note: sequence '" << s.name << "' has no ground-truth flow; drift terms use the no-sample value\n";
  if (config.pso_frames > 0)
    for (auto& s : scenes)
      if (s.frames.size() > static_cast<std::size_t>(config.pso_frames)) s.frames.resize(config.pso_frames);

  const EvalConfig& eval = config.eval;
  auto objective = [&](const FrontendParams& p) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : scenes)
      for (const FrameOutcome& f : run_static(s.frames, p, eval)) {
        sum += f.reward.r_total;
        ++n;
      }
    return sum / static_cast<double>(n);
  };
  PsoConfig pc = config.pso;
  pc.seed = config.seed;
  const PsoParamsResult r = pso_optimize(objective, pc);
  write_params_file(o.out, {r.params, r.score, o.split, r.evaluations});
  log << "tune-pso (" << o.split << "): fast_threshold " << r.params.fast_threshold << ", patch_size "
      << r.params.klt_patch_size << ", ransac_threshold " << fmt("%.4f", r.params.ransac_threshold) << ", score "
      << fmt("%.4f", r.score) << " after " << r.evaluations << " distinct evaluations\n";
  return kExitOk;
}

int cmd_pretrain_encoder(const RunConfig& config, const PretrainOptions& o, std::ostream& log) {
  config.validate();
  require_out(o.out, "pretrain-encoder");
  require_path(o.dataset, "--dataset");
  const auto scenes = scenes_with_flow(load_scenes(o.dataset, config.world.fps), false, "pretrain-encoder");

  BanditConfig bc = config.bandit;
  bc.seed = config.seed;
  Rng rng(mix_seed(config.seed, 0xE4C0ULL));
  ConvEncoder encoder = ConvEncoder::random(rng);
  MlpNet critic = make_bandit_critic(bc, rng);
  const BanditResult res =
      pretrain_encoder_bandit(tracking_transition_source(scenes, config.eval, bc.worst_reward), std::move(encoder),
                              std::move(critic), bc);
  save_encoder(o.out, res.encoder);

  fs::path loss_path = o.out;
  loss_path += ".loss.csv";
  std::ofstream loss(loss_path, std::ios::binary);
  if (!loss) throw Error(ErrorCode::IoError, "cannot write " + loss_path.string());
  loss << "step,loss\n";
  for (std::size_t i = 0; i < res.loss_history.size(); ++i) loss << i << ',' << fmt("%.17g", res.loss_history[i]) << '\n';
  if (!loss) throw Error(ErrorCode::IoError, "write failed for " + loss_path.string());

  log << "pretrain-encoder: " << res.loss_history.size() << " gradient steps, replay " << res.replay_size;
  if (!res.loss_history.empty())
    log << ", loss " << fmt("%.4f", res.loss_history.front()) << " -> " << fmt("%.4f", res.loss_history.back());
  log << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& config, const TrainOptions& o, std::ostream& log) {
  config.validate();
  require_out(o.out, "train");
  require_path(o.dataset, "--dataset");
  const auto scenes = scenes_with_flow(load_scenes(o.dataset, config.world.fps), true, "train");
  const TrainConfig tc = config.train_config();

  Checkpoint start;
  if (o.resume) {
    require_path(*o.resume, "--resume");
    start = load_checkpoint(*o.resume);
    if (!start.reference) throw Error(ErrorCode::CorruptCheckpoint, "resume checkpoint carries no reference parameters");
  } else {
    if (!o.params_file) throw Error(ErrorCode::InvalidConfig, "train needs --params with the reference parameters");
    require_path(*o.params_file, "--params");
    const FrontendParams reference = read_params_file(*o.params_file).params;
    std::optional<ConvEncoder> encoder;
    if (o.encoder) {
      require_path(*o.encoder, "--encoder");
      encoder = load_encoder(*o.encoder);
    }
    if (tc.shape.mode == ObsMode::Encoder && !encoder)
      throw Error(ErrorCode::InvalidConfig, "train.obs_mode = encoder needs --encoder");
    start = init_training(tc, scenes, reference, std::move(encoder));
  }

  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + o.out.string() + ": " + ec.message());

  const TrainResult res = train(tc, scenes, std::move(start), [&](const CurveRow& row, const Checkpoint& ck) {
    log << "update " << row.update << ": lr " << fmt("%.3g", row.lr) << ", mean train reward "
        << fmt("%.4f", row.mean_train_reward) << ", policy loss " << fmt("%.4f", row.policy_loss) << ", value loss "
        << fmt("%.4f", row.value_loss) << ", clip " << fmt("%.3f", row.clip_fraction) << ", kl "
        << fmt("%.5f", row.kl) << '\n';
    if (config.checkpoint_every > 0 && ck.update_index % config.checkpoint_every == 0) {
      char name[40];
      std::snprintf(name, sizeof name, "checkpoint_%06lld.txt", ck.update_index);
      save_checkpoint(o.out / name, ck);
    }
  });
  save_checkpoint(o.out / "checkpoint.txt", res.checkpoint);
  write_curve_csv(o.out / "curve.csv", res.curve);
  log << "train: " << res.curve.size() << " updates, checkpoint at update " << res.checkpoint.update_index << '\n';
  return kExitOk;
}

Report build_report(const std::vector<std::pair<std::string, std::vector<FrameRecord>>>& methods, double fps) {
  if (methods.empty()) throw Error(ErrorCode::EmptyInput, "report needs at least one method");
  std::vector<std::map<std::string, std::vector<FrameRecord>>> grouped(methods.size());
  std::set<std::string> names;
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (const FrameRecord& r : methods[m].second) {
      grouped[m][r.sequence].push_back(r);
      names.insert(r.sequence);
    }
  if (names.empty()) throw Error(ErrorCode::EmptySequence, "report inputs hold no frames");
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (const std::string& n : names)
      if (!grouped[m].count(n))
        throw Error(ErrorCode::SequenceMismatch,
                    "sequence '" + n + "' is missing from method '" + methods[m].first + "'");

  Report rep;
  for (const auto& m : methods) rep.methods.push_back(m.first);
  ReportRow avg{"average", std::vector<SequenceMetrics>(methods.size())};
  for (const std::string& n : names) {
    ReportRow row{n, {}};
    for (std::size_t m = 0; m < methods.size(); ++m) {
      auto recs = grouped[m][n];
      std::stable_sort(recs.begin(), recs.end(), [](const FrameRecord& a, const FrameRecord& b) { return a.frame < b.frame; });
      const SequenceMetrics sm = sequence_metrics(recs, fps);
      row.per_method.push_back(sm);
      avg.per_method[m].drift_px_per_s += sm.drift_px_per_s;
      avg.per_method[m].feature_age += sm.feature_age;
      avg.per_method[m].coverage_pct += sm.coverage_pct;
      avg.per_method[m].tau_ms += sm.tau_ms;
      avg.per_method[m].mean_r_total += sm.mean_r_total;
    }
    rep.rows.push_back(std::move(row));
  }
  const double k = static_cast<double>(names.size());
  for (auto& a : avg.per_method) {
    a.drift_px_per_s /= k;
    a.feature_age /= k;
    a.coverage_pct /= k;
    a.tau_ms /= k;
    a.mean_r_total /= k;
  }
  rep.rows.push_back(std::move(avg));
  return rep;
}

namespace {

struct MetricColumn {
  const char* title;
  const char* csv;
  bool higher_is_better;
  double SequenceMetrics::*field;
};

constexpr MetricColumn kColumns[] = {
    {"Feature Drift [px/s]", "drift", false, &SequenceMetrics::drift_px_per_s},
    {"Feature Age [frames]", "age", true, &SequenceMetrics::feature_age},
    {"Coverage [%]", "coverage", true, &SequenceMetrics::coverage_pct},
    {"Computation Time [ms]", "tau", false, &SequenceMetrics::tau_ms},
};

// best[m] is true for every method that attains the best value (ties all marked).
std::vector<bool> best_of(const ReportRow& row, const MetricColumn& col) {
  double best = row.per_method.front().*col.field;
  for (const auto& sm : row.per_method) {
    const double v = sm.*col.field;
    best = col.higher_is_better ? std::max(best, v) : std::min(best, v);
  }
  std::vector<bool> out;
  for (const auto& sm : row.per_method) out.push_back(sm.*col.field == best);
  return out;
}

}  // namespace

std::string format_report_table(const Report& report) {
  std::size_t name_w = 8;
  for (const auto& r : report.rows) name_w = std::max(name_w, r.sequence.size());
  std::size_t cell_w = 10;
  for (const auto& m : report.methods) cell_w = std::max(cell_w, m.size() + 2);
  const std::size_t group_w = std::max<std::size_t>(cell_w * report.methods.size(), 22);

  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  std::string out = pad("", name_w);
  for (const auto& c : kColumns) out += " | " + pad(c.title, group_w);
  out += '\n' + pad("Sequence", name_w);
  for (std::size_t c = 0; c < std::size(kColumns); ++c) {
    std::string g;
    for (const auto& m : report.methods) g += pad(m, cell_w);
    out += " | " + pad(g, group_w);
  }
  out += '\n' + std::string(name_w + std::size(kColumns) * (group_w + 3), '-') + '\n';
  for (const auto& row : report.rows) {
    if (row.sequence == "average" && &row == &report.rows.back())
      out += std::string(name_w + std::size(kColumns) * (group_w + 3), '-') + '\n';
    out += pad(row.sequence, name_w);
    for (const auto& c : kColumns) {
      const auto best = best_of(row, c);
      std::string g;
      for (std::size_t m = 0; m < row.per_method.size(); ++m)
        g += pad(fmt("%.3f", row.per_method[m].*c.field) + (best[m] ? "*" : ""), cell_w);
      out += " | " + pad(g, group_w);
    }
    out += '\n';
  }
  out += "* best value per metric (lower drift and time, higher age and coverage)\n";
  return out;
}

void write_report_csv(const fs::path& path, const Report& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "sequence,method,drift_px_per_s,feature_age,coverage_pct,tau_ms,mean_r_total";
  for (const auto& c : kColumns) out << ",best_" << c.csv;
  out << '\n';
  for (const auto& row : report.rows) {
    std::vector<std::vector<bool>> best;
    for (const auto& c : kColumns) best.push_back(best_of(row, c));
    for (std::size_t m = 0; m < row.per_method.size(); ++m) {
      const SequenceMetrics& s = row.per_method[m];
      out << row.sequence << ',' << report.methods[m] << ',' << fmt("%.17g", s.drift_px_per_s) << ','
          << fmt("%.17g", s.feature_age) << ',' << fmt("%.17g", s.coverage_pct) << ',' << fmt("%.17g", s.tau_ms)
          << ',' << fmt("%.17g", s.mean_r_total);
      for (const auto& b : best) out << ',' << (b[m] ? 1 : 0);
      out << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

int cmd_report(const RunConfig& config, const ReportOptions& o, std::ostream& log) {
  config.validate();
  if (o.methods.size() < 2) throw Error(ErrorCode::InvalidConfig, "report needs at least two --method NAME=CSV inputs");
  std::vector<std::pair<std::string, std::vector<FrameRecord>>> inputs;
  for (const auto& [name, path] : o.methods) {
    require_path(path, "metrics CSV for '" + name + "'");
    inputs.emplace_back(name, read_metrics_csv(path));
  }
  const double fps = config.report_fps > 0.0 ? config.report_fps : config.world.fps;
  const Report rep = build_report(inputs, fps);
  log << format_report_table(rep);
  if (o.out) write_report_csv(*o.out, rep);
  return kExitOk;
}

}  // namespace adaptvo::cli
