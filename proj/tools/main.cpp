#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "kippo/experiments.hpp"
#include "kippo/io.hpp"
#include "kippo/trainer.hpp"

namespace {

using namespace kippo;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntimeAbort = 2;
constexpr int kExitMissingInput = 3;

// Relative output paths resolve under $KIPPO_OUTPUT_ROOT when it is set.
std::string resolve_out(const std::string& path) {
  const char* root = std::getenv("KIPPO_OUTPUT_ROOT");
  if (!root || !*root || path.empty()) return path;
  if (!path.empty() && path[0] == '/') return path;
  return std::string(root) + "/" + path;
}

std::vector<long> parse_seed_list(const std::string& s) {
  std::vector<long> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stol(item));
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

struct CommonConfigArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string env;
  long seed = -1;
  long total_steps = -1;
  std::string kippo_str;  // "", "true", "false"
  int horizon = -1;

  void add_to(CLI::App* cmd, bool with_seed = true) {
    cmd->add_option("--config", config_file, "configuration file (INI)");
    cmd->add_option("--set", overrides, "override: section.key=value")->take_all();
    cmd->add_option("--env", env, "environment name");
    if (with_seed) cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--total-steps", total_steps, "environment step budget");
    cmd->add_option("--kippo", kippo_str, "true/false: run with or without the auxiliary learner")
        ->check(CLI::IsMember({"true", "false"}));
    cmd->add_option("--horizon", horizon, "prediction horizon H");
  }

  TrainConfig build() const {
    TrainConfig cfg;
    if (!config_file.empty()) cfg = load_config_file(config_file);
    // command line wins key-by-key over the file
    std::vector<std::string> ovs;
    if (!env.empty()) ovs.push_back("run.env=" + env);
    if (seed >= 0) ovs.push_back("run.seed=" + std::to_string(seed));
    if (total_steps >= 0) ovs.push_back("run.total_steps=" + std::to_string(total_steps));
    if (!kippo_str.empty()) ovs.push_back("run.kippo=" + kippo_str);
    if (horizon >= 0) ovs.push_back("rollout.horizon=" + std::to_string(horizon));
    for (const auto& o : overrides) ovs.push_back(o);
    for (const auto& line : apply_overrides(cfg, ovs)) std::cout << line << '\n';
    return cfg;
  }
};

int run_train(CommonConfigArgs& args, std::string out_dir, bool dump, const std::string& resume) {
  TrainConfig cfg = args.build();
  if (dump) cfg.dump_trajectories = true;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (cfg.out_dir.empty())
    cfg.out_dir = "runs/" + cfg.env + "_" + (cfg.kippo ? "kippo" : "ppo") + "_seed" +
                  std::to_string(cfg.seed);
  cfg.out_dir = resolve_out(cfg.out_dir);
  validate(cfg);
  TrainResult res =
      resume.empty() ? train(cfg) : train_resume(resume, cfg);
  atomic_write(cfg.out_dir + "/DONE", "ok\n");
  std::cout << "run complete: " << res.env_steps << " env steps, " << res.records.size()
            << " updates, outputs in " << cfg.out_dir << '\n';
  if (!res.records.empty()) {
    const auto& last = res.records.back();
    if (!std::isnan(last.ewma)) std::cout << "final ewma: " << last.ewma << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kippo: Koopman-inspired representation learning for PPO"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "run one training job");
  CommonConfigArgs train_args;
  train_args.add_to(train_cmd);
  std::string train_out, resume_path;
  bool dump_traj = false;
  train_cmd->add_option("--out", train_out, "run output directory");
  train_cmd->add_flag("--dump-trajectories", dump_traj, "write trajectories.csv");
  train_cmd->add_option("--resume", resume_path, "checkpoint file to resume from");

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "multi-seed comparison against the ppo baseline");
  CommonConfigArgs compare_args;
  compare_args.add_to(compare_cmd, false);
  std::string compare_seeds = "1,2,3,4", compare_methods = "kippo,ppo", compare_out;
  int compare_par = 0;
  bool compare_existing = false;
  compare_cmd->add_option("--seeds", compare_seeds, "comma-separated seed list");
  compare_cmd->add_option("--methods", compare_methods, "comma-separated methods (kippo,ppo)");
  compare_cmd->add_option("--out", compare_out, "output root");
  compare_cmd->add_option("--parallelism", compare_par, "max concurrent runs (0 = cores)");
  compare_cmd->add_flag("--existing-only", compare_existing, "aggregate only; never train");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "loss-component ablation grid");
  CommonConfigArgs ablate_args;
  ablate_args.add_to(ablate_cmd, false);
  std::string ablate_seeds = "1,2", ablate_out;
  int ablate_par = 0;
  bool ablate_existing = false, ablate_dry = false;
  ablate_cmd->add_option("--seeds", ablate_seeds, "comma-separated seed list");
  ablate_cmd->add_option("--out", ablate_out, "output root");
  ablate_cmd->add_option("--parallelism", ablate_par, "max concurrent runs (0 = cores)");
  ablate_cmd->add_flag("--existing-only", ablate_existing, "aggregate only; never train");
  ablate_cmd->add_flag("--dry-run", ablate_dry, "list grid cells without running");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "hyperparameter sweep from a manifest");
  std::string sweep_manifest, sweep_out;
  int sweep_par = 0;
  sweep_cmd->add_option("--manifest", sweep_manifest, "sweep manifest file")->required();
  sweep_cmd->add_option("--out", sweep_out, "override manifest out_root");
  sweep_cmd->add_option("--parallelism", sweep_par, "override manifest parallelism");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "learning-curve plots from run directories");
  std::vector<std::string> plot_runs;
  std::string plot_out = "plots";
  plot_cmd->add_option("--runs", plot_runs, "run directories")->required()->take_all();
  plot_cmd->add_option("--out", plot_out, "plot output directory");

  // validate-config
  auto* validate_cmd = app.add_subcommand("validate-config", "parse and validate a configuration");
  CommonConfigArgs validate_args;
  validate_args.add_to(validate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) return run_train(train_args, resolve_out(train_out), dump_traj, resume_path);

    if (*compare_cmd) {
      CompareOptions opt;
      opt.base = compare_args.build();
      opt.seeds = parse_seed_list(compare_seeds);
      opt.methods.clear();
      std::istringstream ms(compare_methods);
      std::string m;
      while (std::getline(ms, m, ',')) opt.methods.push_back(m);
      opt.out_root = resolve_out(compare_out.empty() ? "compare_" + opt.base.env : compare_out);
      opt.parallelism = compare_par > 0 ? compare_par
                                        : static_cast<int>(std::thread::hardware_concurrency());
      opt.existing_only = compare_existing;
      validate(opt.base);
      CompareResult res = cmd_compare(opt);
      std::cout << slurp(res.table_txt);
      std::cout << "table: " << res.table_csv << '\n';
      for (const auto& p : res.plot_files) std::cout << "plot: " << p << '\n';
      return kExitOk;
    }

    if (*ablate_cmd) {
      AblateOptions opt;
      opt.base = ablate_args.build();
      opt.seeds = parse_seed_list(ablate_seeds);
      opt.out_root = resolve_out(ablate_out.empty() ? "ablate_" + opt.base.env : ablate_out);
      opt.parallelism =
          ablate_par > 0 ? ablate_par : static_cast<int>(std::thread::hardware_concurrency());
      opt.existing_only = ablate_existing;
      opt.dry_run = ablate_dry;
      validate(opt.base);
      AblateResult res = cmd_ablate(opt);
      if (!opt.dry_run) std::cout << slurp(res.table_txt);
      std::cout << "table: " << res.table_csv << '\n';
      return kExitOk;
    }

    if (*sweep_cmd) {
      SweepOptions opt;
      opt.manifest_path = sweep_manifest;
      opt.out_root_override = resolve_out(sweep_out);
      opt.parallelism_override = sweep_par;
      SweepResult res = cmd_sweep(opt);
      std::cout << "sweep: " << res.completed << " completed, " << res.cached << " cached, "
                << res.failed << " failed\nresults: " << res.results_csv << '\n';
      return kExitOk;
    }

    if (*plot_cmd) {
      for (const auto& f : cmd_plot(plot_runs, resolve_out(plot_out)))
        std::cout << "plot: " << f << '\n';
      return kExitOk;
    }

    if (*validate_cmd) {
      TrainConfig cfg = validate_args.build();
      validate(cfg);
      std::cout << serialize_config(cfg);
      std::cout << "# config ok, hash " << to_hex(config_hash(cfg)) << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const MissingInput& e) {
    std::cerr << "missing input: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const NanAbort& e) {
    std::cerr << "runtime abort: " << e.what() << '\n';
    return kExitRuntimeAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntimeAbort;
  }
  return kExitOk;
}
