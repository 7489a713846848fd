#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "pilot/checkpoint.hpp"
#include "pilot/harness/run.hpp"

using namespace pilot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pilot_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

// Tiny budgets so full stages run in well under a second.
Overrides tiny(const fs::path& out) {
  return {{"out_dir", out.string()}, {"total_env_steps", "400"}, {"warmup_steps", "100"},
          {"eval_interval", "200"},  {"eval_episodes", "2"},      {"hidden", "16"},
          {"batch_size", "16"},      {"id_budget", "20"}};
}

class Harness : public ::testing::Test {
 protected:
  void SetUp() override { unsetenv("PILOT_OUT_DIR"); }
};

}  // namespace

TEST_F(Harness, EnvironmentDefaults) {
  const ExperimentConfig maze = parse_config({{"env", "maze2d"}}, {});
  EXPECT_DOUBLE_EQ(maze.train.gamma, 0.99);
  EXPECT_DOUBLE_EQ(maze.train.lambda, 0.1);
  EXPECT_EQ(maze.train.delta, 1500u);
  EXPECT_EQ(maze.train.batch_size, 128u);
  EXPECT_EQ(maze.train.buffer_capacity, 100000u);
  EXPECT_EQ(maze.train.total_env_steps, 200000u);
  EXPECT_EQ(maze.run_id, "pretrain_udpo_maze2d");
  const ExperimentConfig pm = parse_config({{"env", "pointmass"}}, {});
  EXPECT_DOUBLE_EQ(pm.train.lambda, 5e-3);
  EXPECT_EQ(pm.train.buffer_capacity, 1000000u);
  EXPECT_EQ(pm.train.total_env_steps, 150000u);
}

TEST_F(Harness, CommandLineBeatsFile) {
  const ExperimentConfig c = parse_config({{"train.gamma", "0.9"}, {"env", "maze2d"}, {"train.lambda", "0.3"}},
                                          {{"gamma", "0.95"}});
  EXPECT_DOUBLE_EQ(c.train.gamma, 0.95);
  EXPECT_DOUBLE_EQ(c.train.lambda, 0.3);
}

TEST_F(Harness, IniSectionsParse) {
  const ExperimentConfig c = parse_config_text(
      "[experiment]\nstage = distill\nenv = pointmass\nseeds = 1,2,5\n"
      "[train]\ngamma = 0.98\n[transfer]\nbeta = 0.5\nbonus_frame = raw\ndistill_horizon = 3\n");
  EXPECT_EQ(c.stage, Stage::kDistill);
  EXPECT_EQ(c.env, EnvKind::kPointMass);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 5}));
  EXPECT_DOUBLE_EQ(c.train.gamma, 0.98);
  EXPECT_DOUBLE_EQ(c.bonus.beta, 0.5);
  EXPECT_EQ(c.bonus.frame, BonusFrame::kRaw);
  EXPECT_EQ(c.distill.horizon, 3u);
}

TEST_F(Harness, InvalidValuesRejected) {
  EXPECT_THROW(parse_config({}, {{"gamma", "1.5"}}), ConfigError);
  EXPECT_THROW(parse_config({}, {{"gamma", "abc"}}), ConfigError);
  EXPECT_THROW(parse_config({}, {{"no_such_key", "1"}}), ConfigError);
  EXPECT_THROW(parse_config({{"transfer.gamma", "0.9"}}, {}), ConfigError);
  EXPECT_THROW(parse_config({}, {{"env", "moon"}}), ConfigError);
  EXPECT_THROW(parse_config({}, {{"beta", "-1"}}), ConfigError);
  EXPECT_THROW(parse_config({}, {{"distill_horizon", "0"}}), ConfigError);
  EXPECT_THROW(parse_config_text("[train\ngamma = 0.9\n"), ConfigError);
}

TEST_F(Harness, SnapshotRoundTrips) {
  const ExperimentConfig c = parse_config({{"env", "pointmass_lifted_obs"}, {"stage", "transfer_bonus"}},
                                          {{"beta", "0.25"}, {"seeds", "3,4"}, {"goal_planner", "x/{seed}.ckpt"}});
  const ExperimentConfig back = parse_config_text(c.to_ini());
  EXPECT_EQ(back.to_ini(), c.to_ini());
}

TEST_F(Harness, StageInputsValidated) {
  EXPECT_THROW(validate_stage_inputs(parse_config({{"stage", "distill"}}, {})), ConfigError);
  EXPECT_THROW(validate_stage_inputs(parse_config({{"stage", "zeroshot"}}, {{"goal_planner", "a"}})), ConfigError);
  EXPECT_NO_THROW(validate_stage_inputs(parse_config({{"stage", "eval"}}, {{"controller", "a"}})));
}

TEST_F(Harness, SeedPlaceholder) {
  EXPECT_EQ(seed_path("r/seed{seed}/x_{seed}", 7), "r/seed7/x_7");
  EXPECT_EQ(seed_path("plain", 7), "plain");
}

TEST_F(Harness, CheckpointsRoundTrip) {
  const fs::path dir = scratch("ckpt");
  Rng rng(1);
  const GoalEnv env(EnvKind::kPointMassLiftedAction);
  const DecoupledPolicy p = DecoupledPolicy::create(env.input_layout(), env.action_dim(), 8, rng);
  const BaselinePolicy b = BaselinePolicy::create(env.input_layout(), env.action_dim(), 8, rng);
  const Critic c = Critic::create(env.input_layout(), env.action_dim(), 8, rng);
  const GoalPlanner f = GoalPlanner::create(env.goal_normalizer(), 8, rng);
  save_checkpoint((dir / "p").string(), p);
  save_checkpoint((dir / "b").string(), b);
  save_checkpoint((dir / "c").string(), c);
  save_checkpoint((dir / "f").string(), f);
  EXPECT_EQ(load_decoupled_policy((dir / "p").string()), p);
  const BaselinePolicy b2 = load_baseline_policy((dir / "b").string(), 2);
  EXPECT_EQ(b2.actor, b.actor);
  EXPECT_EQ(b2.obs_dim, 4u);
  EXPECT_EQ(b2.action_dim, 4u);
  const Critic c2 = load_critic((dir / "c").string(), env.action_dim());
  EXPECT_EQ(c2.q1, c.q1);
  EXPECT_EQ(c2.q2_target, c.q2_target);
  EXPECT_EQ(load_goal_planner((dir / "f").string()), f);

  std::ifstream is(dir / "p", std::ios::binary);
  std::string magic(10, '\0');
  is.read(magic.data(), 10);
  EXPECT_EQ(magic, "PILOTCKPT1");
}

TEST_F(Harness, BadCheckpointsRejected) {
  const fs::path dir = scratch("badckpt");
  Rng rng(2);
  const GoalPlanner f = GoalPlanner::create(GoalEnv(EnvKind::kMaze2d).goal_normalizer(), 8, rng);
  save_checkpoint((dir / "f").string(), f);
  EXPECT_THROW(load_decoupled_policy((dir / "f").string()), LoadError);
  EXPECT_THROW(load_goal_planner((dir / "missing").string()), LoadError);
  { std::ofstream((dir / "junk").string()) << "not a checkpoint"; }
  EXPECT_THROW(load_goal_planner((dir / "junk").string()), LoadError);
  const auto size = fs::file_size(dir / "f");
  fs::copy_file(dir / "f", dir / "cut");
  fs::resize_file(dir / "cut", size - 9);
  EXPECT_THROW(load_goal_planner((dir / "cut").string()), LoadError);
}

TEST_F(Harness, CsvFormat) {
  MetricsRow r{"run", 3, "maze2d", "eval", 100, 0.5, 0.25, 1.0, 2.0, 0.0, 1.5};
  EXPECT_EQ(csv_line(r), "run,3,maze2d,eval,100,0.5,0.25,1,2,0,1.5");
  EXPECT_EQ(split_csv(kCsvHeader).size(), 11u);
}

TEST_F(Harness, EvalWritesOneRowPerSeed) {
  const fs::path out = scratch("eval");
  Rng rng(3);
  const GoalEnv env(EnvKind::kPointMass);
  save_checkpoint((out / "ctl.ckpt").string(), BaselinePolicy::create(env.input_layout(), 2, 8, rng));
  Overrides cli = tiny(out);
  cli.insert(cli.end(), {{"stage", "eval"}, {"env", "pointmass"}, {"controller", (out / "ctl.ckpt").string()},
                         {"seeds", "0,1"}});
  std::ostringstream log;
  ASSERT_EQ(run(parse_config({}, cli), log), 0) << log.str();
  const auto lines = read_lines(out / "eval_pointmass" / "metrics.csv");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], kCsvHeader);
  EXPECT_EQ(split_csv(lines[1])[3], "eval");
  EXPECT_EQ(split_csv(lines[2])[1], "1");
  EXPECT_TRUE(fs::exists(out / "eval_pointmass" / "config.ini"));
}

TEST_F(Harness, MissingArtifactFailsTheSeed) {
  const fs::path out = scratch("missing");
  Overrides cli = tiny(out);
  cli.insert(cli.end(), {{"stage", "eval"}, {"controller", (out / "nope.ckpt").string()}});
  std::ostringstream log;
  EXPECT_EQ(run(parse_config({}, cli), log), 1);
  EXPECT_NE(log.str().find("failed"), std::string::npos);
}

TEST_F(Harness, AblationWritesOneFamilyPerBeta) {
  const fs::path out = scratch("ablation");
  Rng rng(4);
  save_checkpoint((out / "f.ckpt").string(),
                  GoalPlanner::create(GoalEnv(EnvKind::kPointMass).goal_normalizer(), 8, rng));
  Overrides cli = tiny(out);
  cli.insert(cli.end(), {{"stage", "ablation"}, {"env", "pointmass"}, {"ablation_betas", "0,1,2"},
                         {"goal_planner", (out / "f.ckpt").string()}});
  std::ostringstream log;
  ASSERT_EQ(run(parse_config({}, cli), log), 0) << log.str();
  std::set<std::string> families;
  const auto lines = read_lines(out / "ablation_pointmass" / "metrics.csv");
  for (std::size_t i = 1; i < lines.size(); ++i) families.insert(split_csv(lines[i])[0]);
  EXPECT_EQ(families, (std::set<std::string>{"ablation_pointmass_beta0", "ablation_pointmass_beta1",
                                             "ablation_pointmass_beta2"}));
  EXPECT_TRUE(fs::exists(out / "ablation_pointmass" / "seed0" / "controller_beta1.ckpt"));
}

TEST_F(Harness, OutputDirectoryFromEnvironment) {
  const fs::path out = scratch("envdir");
  setenv("PILOT_OUT_DIR", out.string().c_str(), 1);
  const ExperimentConfig c = parse_config({}, {{"out_dir", "ignored"}});
  EXPECT_EQ(output_root(c), out);
  unsetenv("PILOT_OUT_DIR");
  EXPECT_EQ(output_root(c), fs::path("ignored"));
}

TEST_F(Harness, RecipesListed) {
  EXPECT_EQ(recipe_names(), (std::vector<std::string>{"high_dim_action", "vec_to_lifted_obs", "zero_shot_maze"}));
  const auto steps = challenge_recipe("zero_shot_maze", "root");
  ASSERT_EQ(steps.size(), 4u);
  EXPECT_EQ(steps[0].stage, Stage::kPretrainUdpo);
  EXPECT_EQ(steps[1].stage, Stage::kDistill);
  EXPECT_EQ(steps[2].env, EnvKind::kPointMass);
  EXPECT_EQ(steps[3].stage, Stage::kZeroShot);
  EXPECT_EQ(steps[3].goal_mode, GoalMode::kCanonical);
  for (const std::string& name : recipe_names()) EXPECT_FALSE(challenge_recipe(name).empty());
  try {
    challenge_recipe("nope");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("zero_shot_maze"), std::string::npos);
  }
}

TEST_F(Harness, RecipeRunsEndToEnd) {
  const fs::path out = scratch("recipe");
  std::ostringstream log;
  Overrides cli = tiny(out);
  cli.insert(cli.end(), {{"distill_steps", "20"}, {"zeroshot_episodes", "2"}});
  ASSERT_EQ(run_recipe("zero_shot_maze", {}, cli, log), 0) << log.str();
  const auto lines = read_lines(out / "zero_shot_maze" / "zeroshot_maze2d" / "metrics.csv");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(split_csv(lines[1])[3], "zeroshot");
  EXPECT_EQ(split_csv(lines[2])[3], "zeroshot_raw_goal");
}

TEST_F(Harness, GradcheckStageExitCode) {
  std::ostringstream log;
  EXPECT_EQ(run(parse_config({}, {{"stage", "gradcheck"}}), log), 0) << log.str();
  EXPECT_NE(log.str().find("ok"), std::string::npos);
}

TEST_F(Harness, StageOutputDeterministicApartFromWallclock) {
  auto once = [](const std::string& name) {
    const fs::path out = scratch(name);
    Overrides cli = tiny(out);
    cli.emplace_back("env", "maze2d");
    std::ostringstream log;
    EXPECT_EQ(run(parse_config({}, cli), log), 0);
    std::vector<std::string> rows;
    for (const std::string& line : read_lines(out / "pretrain_udpo_maze2d" / "metrics.csv")) {
      rows.push_back(line.substr(0, line.rfind(',')));
    }
    return rows;
  };
  const auto a = once("det_a");
  const auto b = once("det_b");
  EXPECT_EQ(a.size(), 4u);  // header and evaluations at 0, 200, 400
  EXPECT_EQ(a, b);
}
