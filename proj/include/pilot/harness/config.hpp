#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pilot/envs/point_mass.hpp"
#include "pilot/error.hpp"
#include "pilot/transfer/transfer.hpp"
#include "pilot/udpo/train.hpp"

namespace pilot {

enum class Stage {
  kPretrainUdpo,
  kPretrainHer,
  kDistill,
  kTransferBonus,
  kTransferPlanner,
  kZeroShot,
  kEval,
  kGradCheck,
  kAblation,
};

inline const std::vector<std::pair<Stage, std::string>>& stage_names() {
  static const std::vector<std::pair<Stage, std::string>> names{
      {Stage::kPretrainUdpo, "pretrain_udpo"},     {Stage::kPretrainHer, "pretrain_her"},
      {Stage::kDistill, "distill"},                {Stage::kTransferBonus, "transfer_bonus"},
      {Stage::kTransferPlanner, "transfer_planner"}, {Stage::kZeroShot, "zeroshot"},
      {Stage::kEval, "eval"},                      {Stage::kGradCheck, "gradcheck"},
      {Stage::kAblation, "ablation"},
  };
  return names;
}

inline std::string stage_name(Stage s) {
  for (const auto& [k, n] : stage_names()) {
    if (k == s) return n;
  }
  return "unknown";
}

inline std::optional<Stage> parse_stage(const std::string& name) {
  for (const auto& [k, n] : stage_names()) {
    if (n == name) return k;
  }
  return std::nullopt;
}

// Policy kinds the eval stage can load.
enum class PolicyKind { kDecoupled, kBaseline };

struct ExperimentConfig {
  Stage stage = Stage::kPretrainUdpo;
  EnvKind env = EnvKind::kMaze2d;
  GoalMode goal_mode = GoalMode::kUniform;
  std::vector<std::uint64_t> seeds{0};
  std::string run_id;

  TrainConfig train;
  BonusConfig bonus;
  DistillConfig distill;
  std::vector<double> ablation_betas{0.1, 0.2, 0.5, 1.0, 2.0, 5.0};
  int replan_every = 1;
  std::size_t zeroshot_episodes = 100;

  std::string out_dir = "runs";
  std::string policy_path;        // decoupled policy checkpoint (distill, transfer_planner, eval)
  std::string buffer_path;        // PILOTBUF1 snapshot (distill)
  std::string goal_planner_path;  // goal planner (transfer_bonus, zeroshot, ablation)
  std::string controller_path;    // baseline policy (zeroshot, eval)

  // Snapshot in the same key = value format the parser reads.
  std::string to_ini() const;
};

namespace config_detail {

struct Key {
  std::string section;
  std::string name;
  std::string help;
};

inline const std::vector<Key>& known_keys() {
  static const std::vector<Key> keys{
      {"experiment", "stage", "stage name"},
      {"experiment", "env", "maze2d | pointmass | pointmass_lifted_action | pointmass_lifted_obs | maze2d_lifted_obs"},
      {"experiment", "goal_mode", "uniform | canonical"},
      {"experiment", "seeds", "comma-separated seed list"},
      {"experiment", "run_id", "name of the output directory"},
      {"experiment", "out_dir", "output root"},
      {"train", "gamma", "discount in (0, 1)"},
      {"train", "lambda", "planner legality coefficient >= 0"},
      {"train", "delta", "inverse dynamics retrain interval >= 1"},
      {"train", "lr_critic", "critic learning rate"},
      {"train", "lr_policy", "planner / actor learning rate"},
      {"train", "lr_inverse", "inverse dynamics learning rate"},
      {"train", "batch_size", "minibatch size"},
      {"train", "buffer_capacity", "replay capacity in transitions"},
      {"train", "hidden", "hidden layer width"},
      {"train", "tau", "target soft-update rate"},
      {"train", "future_fraction", "hindsight relabel probability"},
      {"train", "explore_sigma", "action noise"},
      {"train", "random_eps", "random action probability"},
      {"train", "planner_noise", "planner head noise scale"},
      {"train", "action_l2", "actor pre-squash penalty"},
      {"train", "total_env_steps", "environment step budget"},
      {"train", "warmup_steps", "steps before the first update"},
      {"train", "updates_per_step", "gradient updates per environment step"},
      {"train", "eval_interval", "environment steps between evaluations"},
      {"train", "eval_episodes", "episodes per evaluation"},
      {"train", "id_budget", "inverse dynamics steps per retrain"},
      {"train", "stop_at_success", "stop once an evaluation reaches this success rate"},
      {"transfer", "beta", "bonus ratio >= 0"},
      {"transfer", "bonus_frame", "raw | relative"},
      {"transfer", "ablation_betas", "comma-separated beta grid"},
      {"transfer", "distill_steps", "goal planner distillation steps"},
      {"transfer", "distill_batch", "distillation minibatch"},
      {"transfer", "distill_lr", "distillation learning rate"},
      {"transfer", "distill_horizon", "teacher planner steps per landmark label >= 1"},
      {"transfer", "replan_every", "steps between landmark queries >= 1"},
      {"transfer", "zeroshot_episodes", "episodes for zero-shot evaluation"},
      {"paths", "policy", "decoupled policy checkpoint"},
      {"paths", "buffer", "replay buffer snapshot"},
      {"paths", "goal_planner", "goal planner checkpoint"},
      {"paths", "controller", "baseline policy checkpoint"},
  };
  return keys;
}

inline const Key* find_key(const std::string& name) {
  for (const Key& k : known_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const std::string t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": expected a number, got \"" + v + "\"");
  }
  return out;
}

inline std::uint64_t to_count(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0 || d != static_cast<double>(static_cast<std::uint64_t>(d))) {
    throw ConfigError(key + ": expected a non-negative integer, got \"" + v + "\"");
  }
  return static_cast<std::uint64_t>(d);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline void check_range(const std::string& key, double v, double lo, double hi, bool open_lo = false,
                        bool open_hi = false) {
  const bool ok = (open_lo ? v > lo : v >= lo) && (open_hi ? v < hi : v <= hi);
  if (!ok) {
    std::ostringstream os;
    os << key << " = " << v << " is out of range; valid range is " << (open_lo ? "(" : "[") << lo
       << ", " << hi << (open_hi ? ")" : "]");
    throw ConfigError(os.str());
  }
}

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt_num(v[i]);
  return out;
}

}  // namespace config_detail

// Applies one key. Values are validated as they are set.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  using namespace config_detail;
  const std::string v = trim(raw);
  TrainConfig& t = c.train;
  if (key == "stage") {
    auto s = parse_stage(v);
    if (!s) throw ConfigError("stage: unknown stage \"" + v + "\"");
    c.stage = *s;
  } else if (key == "env") {
    auto e = parse_env_kind(v);
    if (!e) throw ConfigError("env: unknown environment \"" + v + "\"");
    c.env = *e;
  } else if (key == "goal_mode") {
    if (v == "uniform") c.goal_mode = GoalMode::kUniform;
    else if (v == "canonical") c.goal_mode = GoalMode::kCanonical;
    else throw ConfigError("goal_mode: expected uniform or canonical, got \"" + v + "\"");
  } else if (key == "seeds") {
    c.seeds.clear();
    for (const std::string& s : split_list(v)) c.seeds.push_back(to_count(key, s));
    if (c.seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  } else if (key == "run_id") {
    c.run_id = v;
  } else if (key == "out_dir") {
    c.out_dir = v;
  } else if (key == "gamma") {
    t.gamma = to_double(key, v);
    check_range(key, t.gamma, 0.0, 1.0, true, true);
  } else if (key == "lambda") {
    t.lambda = to_double(key, v);
    check_range(key, t.lambda, 0.0, 1e6);
  } else if (key == "delta") {
    t.delta = to_count(key, v);
    check_range(key, static_cast<double>(t.delta), 1, 1e9);
  } else if (key == "lr_critic" || key == "lr_policy" || key == "lr_inverse") {
    const double lr = to_double(key, v);
    check_range(key, lr, 0.0, 1.0, true);
    (key == "lr_critic" ? t.lr_critic : key == "lr_policy" ? t.lr_policy : t.lr_inverse) = lr;
  } else if (key == "batch_size") {
    t.batch_size = to_count(key, v);
    check_range(key, static_cast<double>(t.batch_size), 1, 1 << 20);
  } else if (key == "buffer_capacity") {
    t.buffer_capacity = to_count(key, v);
    check_range(key, static_cast<double>(t.buffer_capacity), 1, 1e8);
  } else if (key == "hidden") {
    t.hidden = to_count(key, v);
    check_range(key, static_cast<double>(t.hidden), 1, 4096);
  } else if (key == "tau") {
    t.tau = to_double(key, v);
    check_range(key, t.tau, 0.0, 1.0, true);
  } else if (key == "future_fraction") {
    t.future_fraction = to_double(key, v);
    check_range(key, t.future_fraction, 0.0, 1.0);
  } else if (key == "explore_sigma") {
    t.explore_sigma = to_double(key, v);
    check_range(key, t.explore_sigma, 0.0, 10.0);
  } else if (key == "random_eps") {
    t.random_eps = to_double(key, v);
    check_range(key, t.random_eps, 0.0, 1.0);
  } else if (key == "planner_noise") {
    t.planner_noise = to_double(key, v);
    check_range(key, t.planner_noise, 0.0, 10.0);
  } else if (key == "action_l2") {
    t.action_l2 = to_double(key, v);
    check_range(key, t.action_l2, 0.0, 1e3);
  } else if (key == "total_env_steps") {
    t.total_env_steps = to_count(key, v);
  } else if (key == "warmup_steps") {
    t.warmup_steps = to_count(key, v);
  } else if (key == "updates_per_step") {
    t.updates_per_step = to_double(key, v);
    check_range(key, t.updates_per_step, 0.0, 64.0);
  } else if (key == "eval_interval") {
    t.eval_interval = to_count(key, v);
    check_range(key, static_cast<double>(t.eval_interval), 1, 1e9);
  } else if (key == "eval_episodes") {
    t.eval_episodes = to_count(key, v);
    check_range(key, static_cast<double>(t.eval_episodes), 1, 1e6);
  } else if (key == "id_budget") {
    t.id_budget = to_count(key, v);
  } else if (key == "stop_at_success") {
    if (v == "none") {
      t.stop_at_success.reset();
    } else {
      t.stop_at_success = to_double(key, v);
      check_range(key, *t.stop_at_success, 0.0, 1.0);
    }
  } else if (key == "beta") {
    c.bonus.beta = to_double(key, v);
    check_range(key, c.bonus.beta, 0.0, 1e3);
  } else if (key == "bonus_frame") {
    if (v == "raw") c.bonus.frame = BonusFrame::kRaw;
    else if (v == "relative") c.bonus.frame = BonusFrame::kRelative;
    else throw ConfigError("bonus_frame: expected raw or relative, got \"" + v + "\"");
  } else if (key == "ablation_betas") {
    c.ablation_betas.clear();
    for (const std::string& s : split_list(v)) {
      c.ablation_betas.push_back(to_double(key, s));
      check_range(key, c.ablation_betas.back(), 0.0, 1e3);
    }
    if (c.ablation_betas.empty()) throw ConfigError("ablation_betas: at least one value is required");
  } else if (key == "distill_steps") {
    c.distill.steps = to_count(key, v);
  } else if (key == "distill_batch") {
    c.distill.batch_size = to_count(key, v);
    check_range(key, static_cast<double>(c.distill.batch_size), 1, 1 << 20);
  } else if (key == "distill_horizon") {
    c.distill.horizon = to_count(key, v);
    check_range(key, static_cast<double>(c.distill.horizon), 1, 1000);
  } else if (key == "distill_lr") {
    c.distill.learning_rate = to_double(key, v);
    check_range(key, c.distill.learning_rate, 0.0, 1.0, true);
  } else if (key == "replan_every") {
    const auto n = to_count(key, v);
    check_range(key, static_cast<double>(n), 1, 1e6);
    c.replan_every = static_cast<int>(n);
  } else if (key == "zeroshot_episodes") {
    c.zeroshot_episodes = to_count(key, v);
    check_range(key, static_cast<double>(c.zeroshot_episodes), 1, 1e6);
  } else if (key == "policy") {
    c.policy_path = v;
  } else if (key == "buffer") {
    c.buffer_path = v;
  } else if (key == "goal_planner") {
    c.goal_planner_path = v;
  } else if (key == "controller") {
    c.controller_path = v;
  } else {
    throw ConfigError("unknown config key \"" + key + "\"");
  }
}

// Per-environment defaults for keys the user did not set.
inline void apply_env_defaults(ExperimentConfig& c) {
  const bool maze = c.env == EnvKind::kMaze2d || c.env == EnvKind::kMaze2dLiftedObs;
  TrainConfig& t = c.train;
  t.lambda = maze ? 1e-1 : 5e-3;
  t.delta = 1500;
  t.buffer_capacity = maze ? 100000 : 1000000;
  t.batch_size = 128;
  t.total_env_steps = maze ? 200000 : 150000;
}

using Overrides = std::vector<std::pair<std::string, std::string>>;

namespace config_detail {

// "section.key" or "key" -> "key"; the section must match the key's home.
inline std::string resolve_key(const std::string& dotted) {
  const auto dot = dotted.rfind('.');
  const std::string name = dot == std::string::npos ? dotted : dotted.substr(dot + 1);
  const Key* k = find_key(name);
  if (!k) throw ConfigError("unknown config key \"" + dotted + "\"");
  if (dot != std::string::npos && dotted.substr(0, dot) != k->section) {
    throw ConfigError("config key \"" + name + "\" belongs in section [" + k->section + "], not [" +
                      dotted.substr(0, dot) + "]");
  }
  return name;
}

inline Overrides read_ini(std::istream& is) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.message() + " at line " +
                      std::to_string(e.line()));
  }
  Overrides out;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      out.emplace_back(name, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) out.emplace_back(name + "." + key, leaf.data());
  }
  return out;
}

}  // namespace config_detail

// Builds a config from file entries then command-line overrides, which win.
// Stage and env are resolved first so per-environment defaults can be filled
// before explicit values are applied.
inline ExperimentConfig parse_config(const Overrides& file_entries, const Overrides& cli) {
  using namespace config_detail;
  std::vector<std::pair<std::string, std::string>> all;
  for (const auto& [k, v] : file_entries) all.emplace_back(resolve_key(k), v);
  for (const auto& [k, v] : cli) all.emplace_back(resolve_key(k), v);
  ExperimentConfig c;
  for (const auto& [k, v] : all) {
    if (k == "env" || k == "stage") set_config_value(c, k, v);
  }
  apply_env_defaults(c);
  for (const auto& [k, v] : all) set_config_value(c, k, v);
  if (c.run_id.empty()) c.run_id = stage_name(c.stage) + "_" + env_name(c.env);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text, const Overrides& cli = {}) {
  std::istringstream is(text);
  return parse_config(config_detail::read_ini(is), cli);
}

inline ExperimentConfig parse_config_file(const std::string& path, const Overrides& cli = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  return parse_config(config_detail::read_ini(is), cli);
}

// Stage-specific required fields.
inline void validate_stage_inputs(const ExperimentConfig& c) {
  auto need = [&](const std::string& value, const char* key) {
    if (value.empty()) {
      throw ConfigError("stage " + stage_name(c.stage) + " requires [paths] " + key);
    }
  };
  switch (c.stage) {
    case Stage::kDistill:
      need(c.policy_path, "policy");
      need(c.buffer_path, "buffer");
      break;
    case Stage::kTransferPlanner:
      need(c.policy_path, "policy");
      break;
    case Stage::kTransferBonus:
    case Stage::kAblation:
      need(c.goal_planner_path, "goal_planner");
      break;
    case Stage::kZeroShot:
      need(c.goal_planner_path, "goal_planner");
      need(c.controller_path, "controller");
      break;
    case Stage::kEval:
      if (c.policy_path.empty() && c.controller_path.empty()) {
        throw ConfigError("stage eval requires [paths] policy or [paths] controller");
      }
      break;
    default:
      break;
  }
}

inline std::string ExperimentConfig::to_ini() const {
  using config_detail::fmt_num;
  const TrainConfig& t = train;
  std::ostringstream os;
  std::string seed_list;
  for (std::size_t i = 0; i < seeds.size(); ++i) seed_list += (i ? "," : "") + std::to_string(seeds[i]);
  os << "[experiment]\n"
     << "stage = " << stage_name(stage) << "\n"
     << "env = " << env_name(env) << "\n"
     << "goal_mode = " << (goal_mode == GoalMode::kUniform ? "uniform" : "canonical") << "\n"
     << "seeds = " << seed_list << "\n"
     << "run_id = " << run_id << "\n"
     << "\n[train]\n"
     << "gamma = " << fmt_num(t.gamma) << "\n"
     << "lambda = " << fmt_num(t.lambda) << "\n"
     << "delta = " << t.delta << "\n"
     << "lr_critic = " << fmt_num(t.lr_critic) << "\n"
     << "lr_policy = " << fmt_num(t.lr_policy) << "\n"
     << "lr_inverse = " << fmt_num(t.lr_inverse) << "\n"
     << "batch_size = " << t.batch_size << "\n"
     << "buffer_capacity = " << t.buffer_capacity << "\n"
     << "hidden = " << t.hidden << "\n"
     << "tau = " << fmt_num(t.tau) << "\n"
     << "future_fraction = " << fmt_num(t.future_fraction) << "\n"
     << "explore_sigma = " << fmt_num(t.explore_sigma) << "\n"
     << "random_eps = " << fmt_num(t.random_eps) << "\n"
     << "planner_noise = " << fmt_num(t.planner_noise) << "\n"
     << "action_l2 = " << fmt_num(t.action_l2) << "\n"
     << "total_env_steps = " << t.total_env_steps << "\n"
     << "warmup_steps = " << t.warmup_steps << "\n"
     << "updates_per_step = " << fmt_num(t.updates_per_step) << "\n"
     << "eval_interval = " << t.eval_interval << "\n"
     << "eval_episodes = " << t.eval_episodes << "\n"
     << "id_budget = " << t.id_budget << "\n"
     << "stop_at_success = " << (t.stop_at_success ? fmt_num(*t.stop_at_success) : "none") << "\n"
     << "\n[transfer]\n"
     << "beta = " << fmt_num(bonus.beta) << "\n"
     << "bonus_frame = " << bonus_frame_name(bonus.frame) << "\n"
     << "ablation_betas = " << config_detail::join(ablation_betas) << "\n"
     << "distill_steps = " << distill.steps << "\n"
     << "distill_batch = " << distill.batch_size << "\n"
     << "distill_lr = " << fmt_num(distill.learning_rate) << "\n"
     << "distill_horizon = " << distill.horizon << "\n"
     << "replan_every = " << replan_every << "\n"
     << "zeroshot_episodes = " << zeroshot_episodes << "\n"
     << "\n[paths]\n"
     << "policy = " << policy_path << "\n"
     << "buffer = " << buffer_path << "\n"
     << "goal_planner = " << goal_planner_path << "\n"
     << "controller = " << controller_path << "\n";
  return os.str();
}

}  // namespace pilot
