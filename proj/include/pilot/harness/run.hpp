#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "pilot/checkpoint.hpp"
#include "pilot/harness/config.hpp"
#include "pilot/harness/gradcheck.hpp"
#include "pilot/transfer/transfer.hpp"
#include "pilot/udpo/train.hpp"

namespace pilot {

struct MetricsRow {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string env;
  std::string stage;
  std::size_t env_steps = 0;
  double eval_success_rate = 0.0;
  double planner_pred_mse = 0.0;
  double inverse_dyn_loss = 0.0;
  double critic_loss = 0.0;
  double bonus_mean = 0.0;
  double wallclock_seconds = 0.0;
};

inline constexpr const char* kCsvHeader =
    "run_id,seed,env,stage,env_steps,eval_success_rate,planner_pred_mse,inverse_dyn_loss,"
    "critic_loss,bonus_mean,wallclock_seconds";

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string csv_line(const MetricsRow& r) {
  return r.run_id + "," + std::to_string(r.seed) + "," + r.env + "," + r.stage + "," +
         std::to_string(r.env_steps) + "," + format_number(r.eval_success_rate) + "," +
         format_number(r.planner_pred_mse) + "," + format_number(r.inverse_dyn_loss) + "," +
         format_number(r.critic_loss) + "," + format_number(r.bonus_mean) + "," +
         format_number(r.wallclock_seconds);
}

// Appends rows and flushes each one so partial runs stay readable.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw Error("cannot write " + path.string());
    out_ << kCsvHeader << "\n" << std::flush;
  }

  void write(const MetricsRow& r) { out_ << csv_line(r) << "\n" << std::flush; }

 private:
  std::ofstream out_;
};

inline MetricsRow row_from_eval(const ExperimentConfig& c, std::uint64_t seed, const std::string& run_id,
                                const std::string& stage, const EvalRecord& e) {
  return {run_id, seed, env_name(c.env), stage, e.env_steps, e.success_rate, e.planner_pred_mse,
          e.inverse_dyn_loss, e.critic_loss, e.bonus_mean, e.wallclock_seconds};
}

// Output root: PILOT_OUT_DIR when set, otherwise the configured out_dir.
inline std::filesystem::path output_root(const ExperimentConfig& c) {
  if (const char* env = std::getenv("PILOT_OUT_DIR"); env && *env) return env;
  return c.out_dir;
}

// Replaces every "{seed}" in a configured path.
inline std::string seed_path(const std::string& path, std::uint64_t seed) {
  std::string out = path;
  const std::string token = "{seed}";
  for (auto pos = out.find(token); pos != std::string::npos; pos = out.find(token, pos)) {
    out.replace(pos, token.size(), std::to_string(seed));
  }
  return out;
}

namespace run_detail {

struct Context {
  const ExperimentConfig& config;
  std::filesystem::path run_dir;
  CsvWriter& csv;
  std::ostream& log;
};

inline GoalEnv make_env(const ExperimentConfig& c) {
  GoalEnv env(c.env, c.goal_mode);
  return env;
}

inline std::filesystem::path seed_dir(const Context& ctx, std::uint64_t seed) {
  auto dir = ctx.run_dir / ("seed" + std::to_string(seed));
  std::filesystem::create_directories(dir);
  return dir;
}

inline EvalCallback csv_callback(const Context& ctx, std::uint64_t seed, const std::string& run_id,
                                 const std::string& stage) {
  return [&ctx, seed, run_id, stage](const EvalRecord& e) {
    ctx.csv.write(row_from_eval(ctx.config, seed, run_id, stage, e));
  };
}

inline void pretrain_udpo(const Context& ctx, std::uint64_t seed) {
  const GoalEnv env = make_env(ctx.config);
  const std::string stage = stage_name(ctx.config.stage);
  UdpoResult r = udpo_train(env, ctx.config.train, seed, csv_callback(ctx, seed, ctx.config.run_id, stage));
  const auto dir = seed_dir(ctx, seed);
  save_checkpoint((dir / "policy.ckpt").string(), r.policy);
  save_checkpoint((dir / "critic.ckpt").string(), r.critic);
  r.buffer.save((dir / "buffer.pilotbuf").string());
  ctx.log << "seed " << seed << ": final success " << r.metrics.final_success() << "\n";
}

inline void pretrain_her(const Context& ctx, std::uint64_t seed) {
  const GoalEnv env = make_env(ctx.config);
  const std::string stage = stage_name(ctx.config.stage);
  HerResult r = her_train(env, ctx.config.train, seed, csv_callback(ctx, seed, ctx.config.run_id, stage));
  const auto dir = seed_dir(ctx, seed);
  save_checkpoint((dir / "controller.ckpt").string(), r.policy);
  save_checkpoint((dir / "critic.ckpt").string(), r.critic);
  ctx.log << "seed " << seed << ": final success " << r.metrics.final_success() << "\n";
}

inline DecoupledPolicy load_policy_for(const GoalEnv& env, const std::string& path, bool check_action) {
  DecoupledPolicy p = load_decoupled_policy(path);
  require_dims("state planner state width", p.state_dim, env.obs_dim());
  require_dims("state planner goal width", p.goal_dim, env.goal_dim());
  if (check_action) require_dims("inverse dynamics action width", p.action_dim, env.action_dim());
  return p;
}

inline GoalPlanner load_goal_planner_for(const GoalEnv& env, const std::string& path) {
  GoalPlanner f = load_goal_planner(path);
  require_dims("goal planner goal width", f.goal_dim, env.goal_dim());
  return f;
}

inline void distill(const Context& ctx, std::uint64_t seed) {
  const ExperimentConfig& c = ctx.config;
  const GoalEnv env = make_env(c);
  if (env.goal_in_observation().empty()) {
    throw ConfigError("distill needs an environment whose observation exposes the goal; " + env.name() +
                      " has lifted observations");
  }
  const DecoupledPolicy teacher = load_policy_for(env, seed_path(c.policy_path, seed), false);
  ReplayBuffer buffer = ReplayBuffer::load(seed_path(c.buffer_path, seed));
  const GoalEnv sampler_env(c.env, GoalMode::kUniform);
  const GoalSampler sampler = [&sampler_env](Rng& rng) { return sampler_env.sample_goal(rng); };
  const DistillResult d = distill_goal_planner(planner_mean_teacher(teacher), buffer,
                                               position_projection(env.goal_dim()), sampler,
                                               env.goal_normalizer(), c.distill, seed);
  save_checkpoint((seed_dir(ctx, seed) / "goal_planner.ckpt").string(), d.planner);
  EvalRecord e;
  e.planner_pred_mse = d.heldout_mean_error;
  ctx.csv.write(row_from_eval(c, seed, c.run_id, stage_name(c.stage), e));
  ctx.log << "seed " << seed << ": held-out nll " << d.heldout_nll << ", mean landmark error "
          << d.heldout_mean_error << "\n";
}

inline void transfer_bonus_run(const Context& ctx, std::uint64_t seed, const BonusConfig& bonus,
                               const std::string& run_id) {
  const ExperimentConfig& c = ctx.config;
  const GoalEnv base = make_env(c);
  const GoalPlanner f = load_goal_planner_for(base, seed_path(c.goal_planner_path, seed));
  const auto env = wrap_env_with_bonus(base, f, bonus);
  HerResult r = her_train(env, c.train, seed, csv_callback(ctx, seed, run_id, stage_name(c.stage)));
  const auto dir = seed_dir(ctx, seed);
  const std::string suffix = run_id == c.run_id ? "" : "_" + run_id.substr(c.run_id.size() + 1);
  save_checkpoint((dir / ("controller" + suffix + ".ckpt")).string(), r.policy);
  ctx.log << "seed " << seed << " " << run_id << ": final success " << r.metrics.final_success() << "\n";
}

inline void transfer_planner(const Context& ctx, std::uint64_t seed) {
  const ExperimentConfig& c = ctx.config;
  const GoalEnv env = make_env(c);
  const DecoupledPolicy source = load_policy_for(env, seed_path(c.policy_path, seed), false);
  TransferResult r = transfer_state_planner(source, env, c.train, seed,
                                            csv_callback(ctx, seed, c.run_id, stage_name(c.stage)));
  save_checkpoint((seed_dir(ctx, seed) / "policy.ckpt").string(), r.policy);
  ctx.log << "seed " << seed << ": final success " << r.metrics.final_success() << "\n";
}

inline double zero_shot_success(const LandmarkExecutor& ex, const GoalEnv& env, std::size_t episodes,
                                std::uint64_t seed) {
  double wins = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    wins += zero_shot_rollout(ex, env, derive_seed(seed, 1000 + e)).success ? 1.0 : 0.0;
  }
  return wins / static_cast<double>(episodes);
}

inline void zeroshot(const Context& ctx, std::uint64_t seed) {
  const ExperimentConfig& c = ctx.config;
  const GoalEnv env = make_env(c);
  const GoalPlanner f = load_goal_planner_for(env, seed_path(c.goal_planner_path, seed));
  const BaselinePolicy controller = load_baseline_policy(seed_path(c.controller_path, seed), env.goal_dim());
  require_dims("controller observation width", controller.obs_dim, env.obs_dim());
  require_dims("controller action width", controller.action_dim, env.action_dim());
  const LandmarkExecutor guided{&f, baseline_controller(controller), c.replan_every};
  const LandmarkExecutor raw{nullptr, baseline_controller(controller), c.replan_every};
  EvalRecord e;
  e.success_rate = zero_shot_success(guided, env, c.zeroshot_episodes, seed);
  ctx.csv.write(row_from_eval(c, seed, c.run_id, "zeroshot", e));
  const double raw_success = zero_shot_success(raw, env, c.zeroshot_episodes, seed);
  e.success_rate = raw_success;
  ctx.csv.write(row_from_eval(c, seed, c.run_id, "zeroshot_raw_goal", e));
  ctx.log << "seed " << seed << ": landmark success " << e.success_rate << " raw-goal success "
          << raw_success << "\n";
}

inline void evaluate_checkpoint(const Context& ctx, std::uint64_t seed) {
  const ExperimentConfig& c = ctx.config;
  const GoalEnv env = make_env(c);
  EvalSummary s;
  if (!c.policy_path.empty()) {
    const DecoupledPolicy p = load_policy_for(env, seed_path(c.policy_path, seed), true);
    TrainConfig t = c.train;
    auto act = [&](const std::vector<double>& obs, const std::vector<double>& goal) {
      Rng unused(0);
      return decoupled_act(p, t, obs, goal, false, unused);
    };
    s = evaluate(env, act, c.train.eval_episodes, derive_seed(seed, 2));
  } else {
    const BaselinePolicy p = load_baseline_policy(seed_path(c.controller_path, seed), env.goal_dim());
    require_dims("controller observation width", p.obs_dim, env.obs_dim());
    require_dims("controller action width", p.action_dim, env.action_dim());
    auto act = [&](const std::vector<double>& obs, const std::vector<double>& goal) {
      return Decision{baseline_action(p, Tensor::vector(obs), Tensor::vector(goal)).to_vector(), std::nullopt};
    };
    s = evaluate(env, act, c.train.eval_episodes, derive_seed(seed, 2));
  }
  EvalRecord e;
  e.success_rate = s.success_rate;
  e.planner_pred_mse = s.pred_mse;
  ctx.csv.write(row_from_eval(c, seed, c.run_id, "eval", e));
  ctx.log << "seed " << seed << ": success " << s.success_rate << "\n";
}

}  // namespace run_detail

// Runs the gradient suite and prints one line per check. Returns true when
// every maximum relative error is within tolerance.
inline bool run_gradcheck(std::ostream& out, double tolerance = 1e-3, std::size_t configs = 32) {
  bool ok = true;
  for (const GradCheckResult& r : run_gradient_suite(configs)) {
    const bool pass = r.max_relative_error <= tolerance;
    ok = ok && pass;
    out << r.name << ": max relative error " << format_number(r.max_relative_error) << " over "
        << r.configurations << " configurations " << (pass ? "ok" : "FAIL") << "\n";
  }
  return ok;
}

// Executes one stage for every configured seed. Returns the process exit code.
inline int run(const ExperimentConfig& config, std::ostream& log = std::cout) {
  validate_stage_inputs(config);
  if (config.stage == Stage::kGradCheck) return run_gradcheck(log) ? 0 : 1;

  const std::filesystem::path run_dir = output_root(config) / config.run_id;
  std::filesystem::create_directories(run_dir);
  {
    std::ofstream snap(run_dir / "config.ini");
    snap << config.to_ini();
  }
  CsvWriter csv(run_dir / "metrics.csv");
  run_detail::Context ctx{config, run_dir, csv, log};
  int failures = 0;
  for (std::uint64_t seed : config.seeds) {
    try {
      switch (config.stage) {
        case Stage::kPretrainUdpo: run_detail::pretrain_udpo(ctx, seed); break;
        case Stage::kPretrainHer: run_detail::pretrain_her(ctx, seed); break;
        case Stage::kDistill: run_detail::distill(ctx, seed); break;
        case Stage::kTransferBonus:
          run_detail::transfer_bonus_run(ctx, seed, config.bonus, config.run_id);
          break;
        case Stage::kTransferPlanner: run_detail::transfer_planner(ctx, seed); break;
        case Stage::kZeroShot: run_detail::zeroshot(ctx, seed); break;
        case Stage::kEval: run_detail::evaluate_checkpoint(ctx, seed); break;
        case Stage::kAblation:
          for (double beta : config.ablation_betas) {
            BonusConfig b = config.bonus;
            b.beta = beta;
            run_detail::transfer_bonus_run(ctx, seed, b, config.run_id + "_beta" + format_number(beta));
          }
          break;
        case Stage::kGradCheck: break;
      }
    } catch (const Error& e) {
      ++failures;
      log << "seed " << seed << " failed: " << e.what() << "\n";
    }
  }
  log << "wrote " << (run_dir / "metrics.csv").string() << "\n";
  return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Challenge recipes.

struct RecipeStep {
  Stage stage;
  EnvKind env;
  GoalMode goal_mode = GoalMode::kUniform;
  std::string run_id;
  Overrides paths;  // path keys wired to earlier steps' outputs
};

inline const std::vector<std::string>& recipe_names() {
  static const std::vector<std::string> names{"high_dim_action", "vec_to_lifted_obs", "zero_shot_maze"};
  return names;
}

// Ordered stage list of a challenge. Artifact paths are relative to the
// output root and use the {seed} placeholder.
inline std::vector<RecipeStep> challenge_recipe(const std::string& name, const std::string& root = ".") {
  auto at = [&](const std::string& run_id, const std::string& file) {
    return (std::filesystem::path(root) / name / run_id / "seed{seed}" / file).string();
  };
  auto id = [&](Stage s, EnvKind e) { return name + "/" + stage_name(s) + "_" + env_name(e); };
  const std::string udpo_pm = name + "/" + stage_name(Stage::kPretrainUdpo) + "_pointmass";
  if (name == "high_dim_action") {
    const std::string src = id(Stage::kPretrainUdpo, EnvKind::kPointMass);
    return {
        {Stage::kPretrainUdpo, EnvKind::kPointMass, GoalMode::kUniform, src, {}},
        {Stage::kTransferPlanner, EnvKind::kPointMassLiftedAction, GoalMode::kUniform,
         id(Stage::kTransferPlanner, EnvKind::kPointMassLiftedAction),
         {{"policy", at(src.substr(name.size() + 1), "policy.ckpt")}}},
        {Stage::kPretrainHer, EnvKind::kPointMassLiftedAction, GoalMode::kUniform,
         id(Stage::kPretrainHer, EnvKind::kPointMassLiftedAction), {}},
    };
  }
  if (name == "vec_to_lifted_obs") {
    const std::string src = id(Stage::kPretrainUdpo, EnvKind::kPointMass);
    const std::string dist = id(Stage::kDistill, EnvKind::kPointMass);
    const std::string s = src.substr(name.size() + 1);
    return {
        {Stage::kPretrainUdpo, EnvKind::kPointMass, GoalMode::kUniform, src, {}},
        {Stage::kDistill, EnvKind::kPointMass, GoalMode::kUniform, dist,
         {{"policy", at(s, "policy.ckpt")}, {"buffer", at(s, "buffer.pilotbuf")}}},
        {Stage::kTransferBonus, EnvKind::kPointMassLiftedObs, GoalMode::kUniform,
         id(Stage::kTransferBonus, EnvKind::kPointMassLiftedObs),
         {{"goal_planner", at(dist.substr(name.size() + 1), "goal_planner.ckpt")}}},
        {Stage::kPretrainHer, EnvKind::kPointMassLiftedObs, GoalMode::kUniform,
         id(Stage::kPretrainHer, EnvKind::kPointMassLiftedObs), {}},
    };
  }
  if (name == "zero_shot_maze") {
    const std::string src = id(Stage::kPretrainUdpo, EnvKind::kMaze2d);
    const std::string dist = id(Stage::kDistill, EnvKind::kMaze2d);
    const std::string ctl = id(Stage::kPretrainHer, EnvKind::kPointMass);
    const std::string s = src.substr(name.size() + 1);
    return {
        {Stage::kPretrainUdpo, EnvKind::kMaze2d, GoalMode::kUniform, src, {}},
        {Stage::kDistill, EnvKind::kMaze2d, GoalMode::kUniform, dist,
         {{"policy", at(s, "policy.ckpt")}, {"buffer", at(s, "buffer.pilotbuf")}}},
        {Stage::kPretrainHer, EnvKind::kPointMass, GoalMode::kUniform, ctl, {}},
        {Stage::kZeroShot, EnvKind::kMaze2d, GoalMode::kCanonical, id(Stage::kZeroShot, EnvKind::kMaze2d),
         {{"goal_planner", at(dist.substr(name.size() + 1), "goal_planner.ckpt")},
          {"controller", at(ctl.substr(name.size() + 1), "controller.ckpt")}}},
    };
  }
  std::string valid;
  for (const std::string& n : recipe_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown recipe \"" + name + "\"; valid recipes: " + valid);
}

// Runs every step of a recipe with the base file entries and overrides.
// Stage, env, goal mode, run id and wired paths come from the recipe; other
// keys (budgets, seeds, hyperparameters) from the caller.
inline int run_recipe(const std::string& name, const Overrides& file_entries, const Overrides& cli,
                      std::ostream& log = std::cout) {
  const ExperimentConfig base = parse_config(file_entries, cli);
  const std::string root = output_root(base).string();
  int code = 0;
  for (const RecipeStep& step : challenge_recipe(name, root)) {
    Overrides fixed{{"stage", stage_name(step.stage)},
                    {"env", env_name(step.env)},
                    {"goal_mode", step.goal_mode == GoalMode::kUniform ? "uniform" : "canonical"},
                    {"run_id", step.run_id}};
    fixed.insert(fixed.end(), step.paths.begin(), step.paths.end());
    // Per-env defaults must be refilled for the step's env, so the recipe
    // entries are applied first and the caller's explicit keys after them.
    Overrides user;
    for (const auto& kv : file_entries) user.push_back(kv);
    for (const auto& kv : cli) user.push_back(kv);
    Overrides filtered;
    for (const auto& [k, v] : user) {
      const auto dot = k.rfind('.');
      const std::string key = dot == std::string::npos ? k : k.substr(dot + 1);
      if (key == "stage" || key == "env" || key == "goal_mode" || key == "run_id") continue;
      filtered.emplace_back(k, v);
    }
    ExperimentConfig c = parse_config(fixed, filtered);
    log << "== " << step.run_id << "\n";
    code = run(c, log);
    if (code != 0) return code;
  }
  return code;
}

}  // namespace pilot
