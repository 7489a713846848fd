// pilot <stage|recipe> --config PATH [--seed N] [--key value ...]

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pilot/harness/run.hpp"

namespace {

// Turns leftover "--key value" / "--key=value" arguments into overrides.
pilot::Overrides parse_extras(const std::vector<std::string>& args) {
  pilot::Overrides out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) {
      throw pilot::ConfigError("unexpected argument \"" + a + "\"; overrides are --key value");
    }
    const std::string body = a.substr(2);
    if (const auto eq = body.find('='); eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (i + 1 >= args.size()) throw pilot::ConfigError("override --" + body + " has no value");
    out.emplace_back(body, args[++i]);
  }
  return out;
}

bool is_recipe(const std::string& name) {
  for (const std::string& r : pilot::recipe_names()) {
    if (r == name) return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoupled policy pre-training and transfer experiments"};
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("command", command, "stage or recipe name")->required();
  app.add_option("--config", config_path, "key = value config file with [section] headers");
  app.add_option("--seed", seed, "single seed, replaces the configured seed list");
  app.allow_extras();
  app.footer("Stages: pretrain_udpo pretrain_her distill transfer_bonus transfer_planner zeroshot eval "
             "gradcheck ablation\nRecipes: high_dim_action vec_to_lifted_obs zero_shot_maze\n"
             "Any config key can be overridden with --key value. PILOT_OUT_DIR sets the output root.");
  CLI11_PARSE(app, argc, argv);

  try {
    pilot::Overrides file_entries;
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw pilot::ConfigError("cannot read config file " + config_path);
      file_entries = pilot::config_detail::read_ini(is);
    }
    pilot::Overrides cli = parse_extras(app.remaining());
    if (seed) cli.emplace_back("seeds", std::to_string(*seed));
    if (is_recipe(command)) return pilot::run_recipe(command, file_entries, cli);
    if (!pilot::parse_stage(command)) {
      std::string valid;
      for (const auto& [s, n] : pilot::stage_names()) valid += " " + n;
      for (const std::string& r : pilot::recipe_names()) valid += " " + r;
      throw pilot::ConfigError("unknown stage or recipe \"" + command + "\"; valid:" + valid);
    }
    cli.emplace_back("stage", command);
    return pilot::run(pilot::parse_config(file_entries, cli));
  } catch (const std::exception& e) {
    std::cerr << "pilot: " << e.what() << "\n";
    return 2;
  }
}
