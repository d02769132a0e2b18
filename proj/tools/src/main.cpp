#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adaptvo/error.hpp"
#include "adaptvo_cli/commands.hpp"

namespace cli = adaptvo::cli;
namespace fs = std::filesystem;

namespace {

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptvo: adaptive visual-odometry frontend, simulator and training harness"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file, out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta;
  bool print_config = false;
  app.add_option("--config", config_file, "Configuration file of 'key = value' lines");
  app.add_option("--set", overrides, "Override one configuration key, e.g. --set ppo.envs=4")->take_all();
  app.add_option("--seed", seed, "Master random seed");
  app.add_option("--out", out, "Output path (directory or file, depending on the command)");
  app.add_option("--beta", beta, "Hardware scaling factor of the cost model");
  app.add_flag("--print-config", print_config, "Print the effective configuration before running");

  auto* sim = app.add_subcommand("simulate", "Render procedural episodes with ground-truth flow");

  cli::TrackOptions track;
  std::string track_params, track_ckpt;
  auto* trk = app.add_subcommand("track", "Run the frontend over a dataset and write the metrics CSV");
  trk->add_option("--dataset", track.dataset, "Sequence directory or a directory of sequences")->required();
  trk->add_option("--params", track_params, "Static parameters file (default: frontend.* config keys)");
  trk->add_option("--checkpoint", track_ckpt, "Policy checkpoint; actions replace the static parameters");
  trk->add_flag("--require-drift", track.require_drift, "Fail when a sequence has no ground-truth flow");

  cli::TunePsoOptions pso;
  auto* tps = app.add_subcommand("tune-pso", "Tune static parameters with particle swarm optimization");
  tps->add_option("--dataset", pso.dataset, "Sequences to optimize on");
  tps->add_option("--split", pso.split, "Label written into the params file (train, test, ...)");
  tps->add_flag("--sphere-self-test", pso.sphere_self_test, "Run the analytic sphere-function check and exit");

  cli::PretrainOptions pre;
  auto* pte = app.add_subcommand("pretrain-encoder", "Pretrain the image encoder on immediate tracking reward");
  pte->add_option("--dataset", pre.dataset, "Sequences with ground-truth flow")->required();

  cli::TrainOptions tr;
  std::string tr_params, tr_resume, tr_encoder;
  auto* trn = app.add_subcommand("train", "PPO training of the parameter policy");
  trn->add_option("--dataset", tr.dataset, "Training sequences with ground-truth flow")->required();
  trn->add_option("--params", tr_params, "Reference static parameters (from tune-pso)");
  trn->add_option("--resume", tr_resume, "Checkpoint to continue from");
  trn->add_option("--encoder", tr_encoder, "Pretrained encoder for train.obs_mode = encoder");

  cli::ReportOptions rep;
  std::vector<std::string> methods;
  auto* rpt = app.add_subcommand("report", "Per-sequence comparison table of two or more methods");
  rpt->add_option("--method", methods, "NAME=metrics.csv, repeat for each method")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitInvalidConfig;
  }

  try {
    cli::RunConfig config;
    if (!config_file.empty()) cli::apply_config_file(config, config_file);
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw adaptvo::Error(adaptvo::ErrorCode::InvalidConfig, "--set expects key=value, got '" + kv + "'");
      cli::set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) config.seed = *seed;
    if (beta) config.eval.cost.beta = *beta;
    if (print_config) std::cout << cli::dump_config(config);

    if (sim->parsed()) return cli::cmd_simulate(config, out, std::cout);
    if (trk->parsed()) {
      track.params_file = opt_path(track_params);
      track.checkpoint = opt_path(track_ckpt);
      track.out = out;
      return cli::cmd_track(config, track, std::cout);
    }
    if (tps->parsed()) {
      pso.out = out;
      return cli::cmd_tune_pso(config, pso, std::cout);
    }
    if (pte->parsed()) {
      pre.out = out;
      return cli::cmd_pretrain_encoder(config, pre, std::cout);
    }
    if (trn->parsed()) {
      tr.params_file = opt_path(tr_params);
      tr.resume = opt_path(tr_resume);
      tr.encoder = opt_path(tr_encoder);
      tr.out = out;
      return cli::cmd_train(config, tr, std::cout);
    }
    if (rpt->parsed()) {
      for (const std::string& m : methods) {
        const auto eq = m.find('=');
        if (eq == std::string::npos || eq == 0)
          throw adaptvo::Error(adaptvo::ErrorCode::InvalidConfig, "--method expects NAME=CSV, got '" + m + "'");
        rep.methods.emplace_back(m.substr(0, eq), fs::path(m.substr(eq + 1)));
      }
      rep.out = opt_path(out);
      return cli::cmd_report(config, rep, std::cout);
    }
    return cli::kExitInternal;
  } catch (const adaptvo::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return cli::kExitInternal;
  }
}
