#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "diprl/harness/commands.hpp"
#include "support.hpp"

using namespace diprl;
using namespace diprl::harness;
using diprl::test::TempDir;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Settings small enough for the command tests to finish quickly.
ExperimentConfig quick(const std::string& dir) {
  ExperimentConfig c;
  c.output_dir = dir;
  c.n_demos = 3;
  c.ae.epochs = 2;
  c.ae.hidden = 16;
  c.ae.latent_dim = 8;
  c.ae.diverse_episodes = 4;
  c.sac.hidden = 16;
  c.sac.batch_size = 16;
  c.sac.warmup_steps = 200;
  c.sac.buffer_capacity = 5000;
  c.reward.hidden = 16;
  c.reward.round_interval = 300;
  c.reward.pairs_per_round = 10;
  c.reward.epochs_per_round = 1;
  c.bc.epochs = 2;
  c.step_budget = 900;
  return c;
}

// Demos plus a frozen autoencoder in `dir`, built once per directory.
struct Prepared {
  TempDir dir;
  ExperimentConfig cfg;
  RunPaths paths;
  explicit Prepared(const std::string& name) : dir(name), cfg(quick(dir.path.string())), paths(cfg) {
    std::ostringstream log;
    cmd_gen_demos(cfg, paths.demos(), log);
    cmd_train_ae(cfg, paths.demos(), paths.autoencoder(), paths.autoencoder_loss(), log);
  }
};

std::vector<MetricsRow> three_rows() {
  return {{400, 0, 1, 400, "diprl", 7}, {650, 1, 4, 250, "diprl", 7}, {1050, 2, 2, 400, "diprl", 7}};
}

}  // namespace

TEST(Config, DefaultsMatchRunProtocol) {
  const ExperimentConfig c;
  EXPECT_EQ(c.step_budget, 100000);
  EXPECT_EQ(c.n_demos, 25);
  EXPECT_EQ(c.eval_episodes, 50);
  EXPECT_EQ(c.algo, agents::AlgoKind::DipRl);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesKeyValueTextWithComments) {
  ExperimentConfig c;
  std::istringstream in("# comment\n\nsac.alpha = 0.1\n  run.steps=5000  \nrun.algo = sqil\nae.penalty = latent\n");
  apply_config_text(c, in);
  EXPECT_DOUBLE_EQ(c.sac.alpha, 0.1);
  EXPECT_EQ(c.step_budget, 5000);
  EXPECT_EQ(c.algo, agents::AlgoKind::Sqil);
  EXPECT_EQ(c.ae.penalty, ae::AePenalty::latent);
}

TEST(Config, LaterValuesOverrideEarlierOnes) {
  ExperimentConfig c;
  std::istringstream in("run.seed = 1\nrun.seed = 9\n");
  apply_config_text(c, in);
  EXPECT_EQ(c.run_seed, 9u);
  set_value(c, "run.seed", "4");
  EXPECT_EQ(c.run_seed, 4u);
}

TEST(Config, ErrorsNameTheLine) {
  ExperimentConfig c;
  std::istringstream unknown("run.seed = 1\nsac.gama = 0.9\n");
  try {
    apply_config_text(c, unknown);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("sac.gama"), std::string::npos);
  }
  std::istringstream missing_eq("\n\nrun.seed 3\n");
  try {
    apply_config_text(c, missing_eq);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream bad_number("run.steps = 12x\n");
  EXPECT_THROW(apply_config_text(c, bad_number), ParseError);
  EXPECT_THROW(set_value(c, "no.such.key", "1"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/diprl.cfg"), IoError);
}

TEST(Config, DumpRoundTripsExactly) {
  ExperimentConfig c;
  c.sac.alpha = 0.1 + 0.2;  // not representable in few digits
  c.reward.output_l2_coeff = 3e-7;
  c.algo = agents::AlgoKind::Bc;
  c.run_seed = 123456789012345ull;
  ExperimentConfig back;
  std::istringstream in(dump_config(c));
  apply_config_text(back, in);
  EXPECT_EQ(dump_config(back), dump_config(c));
  EXPECT_EQ(back.sac.alpha, c.sac.alpha);
}

TEST(Config, OutputDirResolution) {
  ExperimentConfig c;
  c.output_dir = "/tmp/explicit";
  EXPECT_EQ(resolve_output_dir(c), "/tmp/explicit");
  c.output_dir.clear();
  ::setenv("DIPRL_OUTPUT_DIR", "/tmp/from_env", 1);
  EXPECT_EQ(resolve_output_dir(c), "/tmp/from_env");
  ::unsetenv("DIPRL_OUTPUT_DIR");
  EXPECT_EQ(resolve_output_dir(c), ".");
}

TEST(Summary, HandExamples) {
  auto rows = [](std::vector<int> logs) {
    std::vector<MetricsRow> r;
    for (std::size_t i = 0; i < logs.size(); ++i)
      r.push_back({static_cast<std::int64_t>(100 * (i + 1)), static_cast<std::int64_t>(i), logs[i], 100, "sac", 0});
    return r;
  };
  const auto a = compute_summary(rows({1, 4, 2}));
  EXPECT_EQ(a.max_logs, 4);
  EXPECT_NEAR(a.mean_logs_per_episode, 7.0 / 3.0, 1e-15);
  EXPECT_EQ(a.n_episodes, 3);
  ASSERT_EQ(a.curve.size(), 3u);
  EXPECT_EQ(a.curve[1].env_step, 200);
  EXPECT_EQ(a.curve[1].logs, 4);
  const auto one = compute_summary(rows({3}));
  EXPECT_EQ(one.max_logs, 3);
  EXPECT_EQ(one.mean_logs_per_episode, 3.0);
  const auto zeros = compute_summary(rows({0, 0, 0, 0}));
  EXPECT_EQ(zeros.max_logs, 0);
  EXPECT_EQ(zeros.mean_logs_per_episode, 0.0);
  EXPECT_THROW(compute_summary({}), SummaryError);
}

TEST(Summary, MeanAndMaxProperties) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> logs(0, 4), len(1, 40);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> l(static_cast<std::size_t>(len(rng)));
    for (auto& x : l) x = logs(rng);
    const auto s = summarize_logs(l);
    EXPECT_EQ(s.max_logs, *std::max_element(l.begin(), l.end()));
    EXPECT_GE(s.mean_logs_per_episode, *std::min_element(l.begin(), l.end()));
    EXPECT_LE(s.mean_logs_per_episode, s.max_logs);
    EXPECT_NEAR(s.mean_logs_per_episode * static_cast<double>(l.size()), std::accumulate(l.begin(), l.end(), 0), 1e-9);
  }
}

TEST(MetricsCsv, GoldenThreeRowFile) {
  std::ostringstream out;
  write_metrics_csv(out, three_rows());
  EXPECT_EQ(out.str(), slurp(std::string(DIPRL_GOLDEN_DIR) + "/metrics_3rows.csv"));
  EXPECT_EQ(load_metrics_csv(std::string(DIPRL_GOLDEN_DIR) + "/metrics_3rows.csv"), three_rows());
}

TEST(MetricsCsv, RoundTripWithNotes) {
  std::stringstream io;
  write_metrics_csv(io, three_rows(), {"first note", "second"});
  const std::string text = io.str();
  EXPECT_NE(text.find("\n# first note\n# second\n"), std::string::npos);
  EXPECT_EQ(parse_metrics_csv(io), three_rows());
}

TEST(MetricsCsv, EmptyExportIsHeaderOnly) {
  TempDir dir("metrics_empty");
  export_metrics({}, MetricsFormat::csv, dir.file("m.csv"));
  EXPECT_EQ(slurp(dir.file("m.csv")), std::string(kMetricsHeader) + "\n");
  EXPECT_TRUE(load_metrics_csv(dir.file("m.csv")).empty());
  EXPECT_THROW(export_metrics({}, MetricsFormat::csv, "/nonexistent/dir/m.csv"), IoError);
}

TEST(MetricsCsv, MalformedInputReportsLine) {
  std::istringstream bad_header("step,logs\n");
  EXPECT_THROW(parse_metrics_csv(bad_header), ParseError);
  std::istringstream short_row(std::string(kMetricsHeader) + "\n1,0,1,1,sac,0\n1,2,3\n");
  try {
    parse_metrics_csv(short_row);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream junk(std::string(kMetricsHeader) + "\n1,0,x,1,sac,0\n");
  EXPECT_THROW(parse_metrics_csv(junk), ParseError);
  std::istringstream trailing(std::string(kMetricsHeader) + "\n1,0,1x,1,sac,0\n");
  EXPECT_THROW(parse_metrics_csv(trailing), ParseError);
}

TEST(MetricsJson, FieldNames) {
  const auto j = metrics_to_json(three_rows());
  ASSERT_EQ(j.size(), 3u);
  for (const char* f : {"env_step", "episode_index", "episode_logs", "episode_length", "algo", "seed"})
    EXPECT_TRUE(j[0].contains(f)) << f;
  EXPECT_EQ(j[1]["episode_logs"], 4);
  EXPECT_EQ(j[2]["algo"], "diprl");
  EXPECT_EQ(metrics_format_from_string("json"), MetricsFormat::json);
  EXPECT_THROW(metrics_format_from_string("xml"), ConfigError);
}

TEST(GenDemos, TwentyFiveExpertEpisodesEachWithFourLogs) {
  TempDir dir("gen_demos");
  ExperimentConfig c;
  std::ostringstream log;
  const auto d = cmd_gen_demos(c, dir.file("demos.jsonl"), log);
  ASSERT_EQ(d.episode_count(), 25u);
  int lines = 0;
  std::istringstream report(log.str());
  for (std::string line; std::getline(report, line);)
    if (line.rfind("episode ", 0) == 0) {
      EXPECT_NE(line.find(": 4 logs"), std::string::npos) << line;
      ++lines;
    }
  EXPECT_EQ(lines, 25);
  const auto file = data::load_demos(dir.file("demos.jsonl"));
  EXPECT_EQ(file.demos.episode_count(), 25u);
}

TEST(GenDemos, SingleEpisodeAndByteIdenticalRegeneration) {
  TempDir dir("gen_demos_one");
  ExperimentConfig c;
  c.n_demos = 1;
  std::ostringstream log;
  EXPECT_EQ(cmd_gen_demos(c, dir.file("a.jsonl"), log).episode_count(), 1u);
  cmd_gen_demos(c, dir.file("b.jsonl"), log);
  EXPECT_EQ(slurp(dir.file("a.jsonl")), slurp(dir.file("b.jsonl")));
  c.n_demos = 0;
  EXPECT_THROW(cmd_gen_demos(c, dir.file("c.jsonl"), log), ConfigError);
}

TEST(TrainAe, WritesFrozenCheckpointAndLossLog) {
  Prepared p("train_ae");
  const auto m = ae::load_autoencoder(p.paths.autoencoder().string());
  EXPECT_TRUE(m.frozen());
  EXPECT_EQ(m.latent_dim(), 8);
  std::istringstream loss(slurp(p.paths.autoencoder_loss().string()));
  std::string line;
  std::getline(loss, line);
  EXPECT_EQ(line, "epoch,loss,mse");
  int rows = 0;
  while (std::getline(loss, line)) ++rows;
  EXPECT_EQ(rows, 3);  // initial probe plus two epochs
  // Same inputs, same checkpoint.
  std::ostringstream log;
  cmd_train_ae(p.cfg, p.paths.demos(), p.dir.file("again.json"), p.dir.file("again.csv"), log);
  EXPECT_EQ(slurp(p.dir.file("again.json")), slurp(p.paths.autoencoder().string()));
}

TEST(TrainAe, RejectsMissingOrMismatchedDemos) {
  Prepared p("train_ae_bad");
  std::ostringstream log;
  EXPECT_THROW(cmd_train_ae(p.cfg, p.dir.file("missing.jsonl"), p.dir.file("x.json"), p.dir.file("x.csv"), log),
               ConfigError);
  auto other = p.cfg;
  other.env.world_seed = 99;
  EXPECT_THROW(cmd_train_ae(other, p.paths.demos(), p.dir.file("x.json"), p.dir.file("x.csv"), log), ConfigError);
}

TEST(Train, BcWritesHeaderAndNoteOnly) {
  Prepared p("train_bc");
  auto c = p.cfg;
  c.algo = agents::AlgoKind::Bc;
  std::ostringstream log;
  const auto out = cmd_train(c, p.paths.autoencoder(), p.paths.demos(), log);
  EXPECT_EQ(out.env_steps, 0);
  EXPECT_EQ(slurp(out.metrics_path.string()), std::string(kMetricsHeader) + "\n# " + kBcNote + "\n");
  EXPECT_TRUE(load_metrics_csv(out.metrics_path.string()).empty());
  EXPECT_TRUE(fs::exists(out.policy_path));
  EXPECT_FALSE(fs::exists(p.paths.critics(c.algo, c.run_seed)));
}

TEST(Train, HiddenRewardReadOnlyByTrueRewardBaseline) {
  Prepared p("train_probe");
  std::ostringstream log;
  auto c = p.cfg;
  c.algo = agents::AlgoKind::DipRl;
  data::HiddenRewardProbe::reset();
  cmd_train(c, p.paths.autoencoder(), p.paths.demos(), log);
  EXPECT_EQ(data::HiddenRewardProbe::reads(), 0u);
  EXPECT_TRUE(fs::exists(p.paths.reward(c.algo, c.run_seed)));
  c.algo = agents::AlgoKind::SacTrue;
  cmd_train(c, p.paths.autoencoder(), "", log);
  EXPECT_GT(data::HiddenRewardProbe::reads(), 0u);
}

TEST(Train, MetricsAreReproducibleAndConsistent) {
  Prepared p("train_repro");
  auto c = p.cfg;
  c.algo = agents::AlgoKind::Sqil;
  std::ostringstream log;
  const auto a = cmd_train(c, p.paths.autoencoder(), p.paths.demos(), log);
  const std::string first = slurp(a.metrics_path.string());
  const auto b = cmd_train(c, p.paths.autoencoder(), p.paths.demos(), log);
  EXPECT_EQ(slurp(b.metrics_path.string()), first);
  const auto rows = load_metrics_csv(a.metrics_path.string());
  EXPECT_EQ(rows, a.rows);
  for (const auto& r : rows) {
    EXPECT_EQ(r.algo, "sqil");
    EXPECT_LE(r.env_step, c.step_budget);
  }
}

TEST(Train, ParallelSeedsMatchSequentialRuns) {
  Prepared p("train_seeds");
  auto c = p.cfg;
  c.algo = agents::AlgoKind::Sqil;
  std::ostringstream log;
  const auto par = cmd_train_seeds(c, {1, 2}, p.paths.autoencoder(), p.paths.demos(), log);
  ASSERT_EQ(par.size(), 2u);
  c.run_seed = 2;
  const auto seq = cmd_train(c, p.paths.autoencoder(), p.paths.demos(), log);
  EXPECT_EQ(par[1].rows, seq.rows);
}

TEST(Train, MissingCheckpointIsConfigError) {
  Prepared p("train_missing");
  std::ostringstream log;
  EXPECT_THROW(cmd_train(p.cfg, p.dir.file("nope.json"), p.paths.demos(), log), ConfigError);
}

TEST(Eval, ExpertCollectsEveryLog) {
  const auto s = eval_expert(env::EnvConfig{}, 5);
  EXPECT_EQ(s.mean_logs_per_episode, 4.0);
  EXPECT_EQ(s.max_logs, 4);
  EXPECT_EQ(eval_expert(env::EnvConfig{}, 1).n_episodes, 1);
}

TEST(Eval, RandomPolicyBelowExpert) {
  const auto r = eval_random(env::EnvConfig{}, 50, 0);
  EXPECT_EQ(r.n_episodes, 50);
  EXPECT_LT(r.mean_logs_per_episode, 4.0);
}

TEST(Eval, PolicyCheckpointOnMatchingEnvOnly) {
  Prepared p("eval_ckpt");
  auto c = p.cfg;
  c.algo = agents::AlgoKind::Bc;
  std::ostringstream log;
  const auto out = cmd_train(c, p.paths.autoencoder(), p.paths.demos(), log);
  const auto s = cmd_eval(out.policy_path, c, 1);
  EXPECT_EQ(s.n_episodes, 1);
  EXPECT_GE(s.max_logs, 0);
  EXPECT_LE(s.max_logs, 4);
  auto other = c;
  other.env.world_seed = 5;
  EXPECT_THROW(cmd_eval(out.policy_path, other, 1), ConfigError);
  EXPECT_THROW(cmd_eval(out.policy_path, c, 0), ConfigError);
  const auto ckpt = load_policy_checkpoint(out.policy_path.string());
  EXPECT_TRUE(ckpt.encoder.frozen());
  EXPECT_EQ(ckpt.algo, agents::AlgoKind::Bc);
}

TEST(Summarize, MatchesIndependentRecomputationFromCsv) {
  Prepared p("summarize");
  auto c = p.cfg;
  c.algo = agents::AlgoKind::SacTrue;
  c.step_budget = 1500;
  std::ostringstream log;
  const auto out = cmd_train(c, p.paths.autoencoder(), "", log);
  // Recompute straight from the text, column by column.
  std::istringstream csv(slurp(out.metrics_path.string()));
  std::string line;
  std::getline(csv, line);
  int max_logs = 0, n = 0;
  double sum = 0;
  while (std::getline(csv, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    for (int col = 0; col < 3; ++col) std::getline(ss, cell, ',');
    const int logs = std::stoi(cell);
    max_logs = std::max(max_logs, logs);
    sum += logs;
    ++n;
  }
  ASSERT_GT(n, 0);
  const auto s = compute_summary(load_metrics_csv(out.metrics_path.string()));
  EXPECT_EQ(s.max_logs, max_logs);
  EXPECT_EQ(s.n_episodes, n);
  EXPECT_NEAR(s.mean_logs_per_episode, sum / n, 1e-12);
}
