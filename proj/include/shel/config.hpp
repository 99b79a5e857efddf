#pragma once

#include <string>
#include <utility>
#include <vector>

#include "shel/harness.hpp"

namespace shel {

struct DataConfig {
  std::string path;
  std::string spatial;
  std::string spatial_kind = "auto";
  bool births_offset = false;
  bool add_intercept = true;
};

struct ExperimentConfig {
  GeneratorKind generator = GeneratorKind::Parametric;
  int replicates = 20;
  std::vector<std::string> roster;  // model names; empty = every defined model
  std::string generator_model;      // empty = first roster entry
  bool synthesize_base = false;
  GenTruth truth;
  SamplerConfig calibration;
  std::vector<int> folds;
  bool predict_median = false;
};

// One structured document covering model, sampler and experiment settings.
// Parsing is strict: unknown keys are rejected before any computation.
struct RunConfig {
  std::vector<std::pair<std::string, ModelSpec>> models;
  std::string fit_model;  // used by `fit` and `basis`
  DataConfig data;
  SamplerConfig sampler;
  ExperimentConfig experiment;
  uint64_t seed = 1;
  int threads = 0;  // 0 -> SHEL_THREADS env var, else 1
  std::string out_dir;
  bool report_tau_as_variance = true;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// CLI overrides: {"seed":u64, "threads":n, "out":dir, "models":[...],
// "folds":[...], "model":name}
void apply_overrides(RunConfig& cfg, const std::string& overrides_json);

// Fully resolved config, sufficient to re-run bit-identically.
std::string echo_config(const RunConfig& cfg);

const ModelSpec& find_model(const RunConfig& cfg, const std::string& name);
std::vector<ModelEntry> resolve_roster(const RunConfig& cfg);
int resolve_threads(const RunConfig& cfg);

ObservedDataset load_configured_dataset(const RunConfig& cfg);

}  // namespace shel
