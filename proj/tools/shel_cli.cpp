// Command-line front end. Links the shared library through the C API only;
// CLI11 and nlohmann/json are used here purely for argument handling.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "shel/shel.h"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string models;  // comma separated
  std::string folds;   // comma separated
  int threads = 0;
  std::string model;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "config JSON path")->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "master seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--models", args.models, "comma-separated model roster");
  cmd->add_option("--folds", args.folds, "comma-separated fold ids");
  cmd->add_option("--threads", args.threads,
                  "worker threads (SHEL_THREADS env as fallback)");
  cmd->add_option("--model", args.model, "model name for fit/basis");
}

int read_file(const std::string& path, std::string& text) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open config file: " << path << "\n";
    return SHEL_ERR_CONFIG;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  text = ss.str();
  return 0;
}

std::string build_overrides(const CommonArgs& args) {
  nlohmann::json j = nlohmann::json::object();
  if (args.seed_set) j["seed"] = args.seed;
  if (args.threads > 0) j["threads"] = args.threads;
  if (!args.model.empty()) j["model"] = args.model;
  if (!args.models.empty()) {
    std::vector<std::string> names;
    std::stringstream ss(args.models);
    std::string item;
    while (std::getline(ss, item, ',')) names.push_back(item);
    j["models"] = names;
  }
  if (!args.folds.empty()) {
    std::vector<int> ids;
    std::stringstream ss(args.folds);
    std::string item;
    while (std::getline(ss, item, ',')) ids.push_back(std::stoi(item));
    j["folds"] = ids;
  }
  return j.empty() ? std::string() : j.dump();
}

int resolve_out_dir(const CommonArgs& args, const std::string& config_text,
                    std::string& out_dir) {
  if (!args.out_dir.empty()) {
    out_dir = args.out_dir;
    return 0;
  }
  const auto cfg = nlohmann::json::parse(config_text, nullptr, false);
  if (!cfg.is_discarded() && cfg.contains("output") && cfg["output"].contains("dir")) {
    out_dir = cfg["output"]["dir"].get<std::string>();
    return 0;
  }
  std::cerr << "error: no output directory (--out or config output.dir)\n";
  return SHEL_ERR_CONFIG;
}

int report(shel_status status) {
  if (status != SHEL_OK) std::cerr << "error: " << shel_last_error() << "\n";
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SHEL: semiparametric hierarchical empirical-likelihood spatial models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", shel_version());

  CommonArgs fit_args, loo_args, sim_args, basis_args;
  auto* cmd_fit = app.add_subcommand("fit", "run one MCMC fit and summarize it");
  auto* cmd_loo = app.add_subcommand("loo", "leave-one-out MSPE evaluation");
  auto* cmd_sim = app.add_subcommand("simulate", "replicated simulation study");
  auto* cmd_basis = app.add_subcommand("basis", "build and export the Moran basis");
  add_common(cmd_fit, fit_args);
  add_common(cmd_loo, loo_args);
  add_common(cmd_sim, sim_args);
  add_common(cmd_basis, basis_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : SHEL_ERR_CONFIG;
  }

  const CommonArgs& args = cmd_fit->parsed()     ? fit_args
                           : cmd_loo->parsed()   ? loo_args
                           : cmd_sim->parsed()   ? sim_args
                                                 : basis_args;

  std::string config_text;
  if (int rc = read_file(args.config_path, config_text)) return rc;
  std::string out_dir;
  if (int rc = resolve_out_dir(args, config_text, out_dir)) return rc;
  const std::string overrides = build_overrides(args);
  const char* ov = overrides.empty() ? nullptr : overrides.c_str();

  if (cmd_fit->parsed()) {
    char* summary = nullptr;
    const shel_status st =
        shel_run_fit(config_text.c_str(), ov, out_dir.c_str(), &summary, nullptr);
    if (summary) {
      std::cout << summary;
      shel_string_free(summary);
    }
    if (st == SHEL_OK) std::cout << "outputs written to " << out_dir << "\n";
    return report(st);
  }
  if (cmd_loo->parsed())
    return report(shel_run_loo(config_text.c_str(), ov, out_dir.c_str()));
  if (cmd_sim->parsed())
    return report(shel_run_simulate(config_text.c_str(), ov, out_dir.c_str()));
  return report(shel_run_basis(config_text.c_str(), ov, out_dir.c_str()));
}
