// diprl: demonstration-inferred preference RL on the chopping grid.
//
//   diprl gen-demos  [--config FILE] [--out PATH]
//   diprl train-ae   [--config FILE] [--demos PATH] [--out PATH] [--loss-log PATH]
//   diprl train      [--config FILE] [--ae PATH] [--demos PATH] [--seeds 0,1,2]
//   diprl eval       [--config FILE] --policy PATH|expert|random [--episodes N]
//   diprl summarize  --metrics PATH [--format csv|json] [--out PATH]
//
// Every dotted configuration key (env.grid_size, sac.alpha, run.steps, ...)
// is also a flag of the same name and overrides the config file.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diprl/harness/commands.hpp"

namespace {

using namespace diprl;
using namespace diprl::harness;

struct Common {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config_path, "key = value configuration file");
  for (const auto& key : config_keys()) sub->add_option("--" + key.name, common.overrides[key.name]);
  sub->add_option("--steps", common.overrides["run.steps"], "alias of --run.steps");
  sub->add_option("--seed", common.overrides["run.seed"], "alias of --run.seed");
  sub->add_option("--algo", common.overrides["run.algo"], "alias of --run.algo (diprl, sqil, sac, bc)");
  sub->add_option("--output-dir", common.overrides["run.output_dir"], "alias of --run.output_dir");
}

ExperimentConfig build_config(const Common& common) {
  ExperimentConfig cfg = common.config_path.empty() ? ExperimentConfig{} : load_config(common.config_path);
  for (const auto& [key, value] : common.overrides)
    if (!value.empty()) set_value(cfg, key, value);
  cfg.validate();
  return cfg;
}

std::string or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback.string() : given;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Demonstration-inferred preference RL on a grid chopping task"};
  app.require_subcommand(1);

  Common gen_common, ae_common, train_common, eval_common;
  std::string gen_out, ae_demos, ae_out, ae_loss, train_ae, train_demos, policy_arg, metrics_path, summary_format = "csv",
                                                                                                       summary_out;
  std::vector<std::uint64_t> seeds;
  int episodes = 0;

  auto* gen = app.add_subcommand("gen-demos", "write scripted-expert demonstrations");
  add_common(gen, gen_common);
  gen->add_option("--out", gen_out, "demo file (default <output_dir>/demos.jsonl)");

  auto* tae = app.add_subcommand("train-ae", "pretrain and freeze the autoencoder");
  add_common(tae, ae_common);
  tae->add_option("--demos", ae_demos, "demo file");
  tae->add_option("--out", ae_out, "checkpoint path");
  tae->add_option("--loss-log", ae_loss, "per-epoch loss CSV");

  auto* train = app.add_subcommand("train", "run one algorithm for the step budget");
  add_common(train, train_common);
  train->add_option("--ae", train_ae, "autoencoder checkpoint");
  train->add_option("--demos", train_demos, "demo file");
  train->add_option("--seeds", seeds, "run several seeds in parallel")->delimiter(',');

  auto* eval = app.add_subcommand("eval", "greedy evaluation of a policy checkpoint");
  add_common(eval, eval_common);
  eval->add_option("--policy", policy_arg, "policy checkpoint, or 'expert' / 'random'")->required();
  eval->add_option("--episodes", episodes, "episodes (default run.eval_episodes)");

  auto* summarize = app.add_subcommand("summarize", "summarize a metrics CSV");
  summarize->add_option("--metrics", metrics_path, "metrics CSV")->required();
  summarize->add_option("--format", summary_format, "re-export format when --out is given (csv or json)");
  summarize->add_option("--out", summary_out, "re-export the rows to this path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto cfg = build_config(gen_common);
      cmd_gen_demos(cfg, or_default(gen_out, RunPaths(cfg).demos()), std::cout);
    } else if (tae->parsed()) {
      const auto cfg = build_config(ae_common);
      const RunPaths p(cfg);
      cmd_train_ae(cfg, or_default(ae_demos, p.demos()), or_default(ae_out, p.autoencoder()),
                   or_default(ae_loss, p.autoencoder_loss()), std::cout);
    } else if (train->parsed()) {
      const auto cfg = build_config(train_common);
      const RunPaths p(cfg);
      const std::string ae_path = or_default(train_ae, p.autoencoder());
      std::string demo_path = train_demos;
      if (demo_path.empty() && (cfg.algo != agents::AlgoKind::SacTrue || fs::exists(p.demos())))
        demo_path = p.demos().string();
      if (seeds.empty())
        cmd_train(cfg, ae_path, demo_path, std::cout);
      else
        cmd_train_seeds(cfg, seeds, ae_path, demo_path, std::cout);
    } else if (eval->parsed()) {
      const auto cfg = build_config(eval_common);
      const int n = episodes > 0 ? episodes : cfg.eval_episodes;
      RunSummary s;
      if (policy_arg == "expert")
        s = eval_expert(cfg.env, n);
      else if (policy_arg == "random")
        s = eval_random(cfg.env, n, cfg.run_seed);
      else
        s = cmd_eval(policy_arg, cfg, n);
      print_summary(std::cout, s);
    } else if (summarize->parsed()) {
      const auto rows = load_metrics_csv(metrics_path);
      print_summary(std::cout, compute_summary(rows));
      if (!summary_out.empty()) export_metrics(rows, metrics_format_from_string(summary_format), summary_out);
    }
  } catch (const diprl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
