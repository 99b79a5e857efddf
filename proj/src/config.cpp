#include "shel/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "shel/error.hpp"

namespace shel {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

double get_num(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + " must be a number");
  return j.get<double>();
}

PriorSpec parse_prior(const json& j, const std::string& where) {
  check_keys(j, where, {"gamma", "inv_gamma", "uniform"});
  if (j.size() != 1) throw ConfigError(where + " must name exactly one density");
  const auto it = j.begin();
  const json& p = it.value();
  if (!p.is_array() || p.size() != 2)
    throw ConfigError(where + "." + it.key() + " must be a [a, b] pair");
  const double a = get_num(p[0], where), b = get_num(p[1], where);
  if (it.key() == "gamma") {
    if (a <= 0.0 || b <= 0.0) throw ConfigError(where + ": gamma needs a, b > 0");
    return PriorSpec::gamma(a, b);
  }
  if (it.key() == "inv_gamma") {
    if (a <= 0.0 || b <= 0.0) throw ConfigError(where + ": inv_gamma needs a, b > 0");
    return PriorSpec::inv_gamma(a, b);
  }
  if (a >= b) throw ConfigError(where + ": uniform needs lo < hi");
  return PriorSpec::uniform(a, b);
}

json prior_to_json(const PriorSpec& p) {
  switch (p.dist) {
    case PriorSpec::Dist::Gamma:
      return json{{"gamma", {p.a, p.b}}};
    case PriorSpec::Dist::InvGamma:
      return json{{"inv_gamma", {p.a, p.b}}};
    case PriorSpec::Dist::Uniform:
      return json{{"uniform", {p.a, p.b}}};
  }
  return {};
}

ModelSpec parse_model_spec(const json& j, const std::string& name) {
  const std::string where = "models." + name;
  check_keys(j, where, {"family", "link", "comparator", "process", "beta_prior"});

  ModelSpec spec;
  spec.name = name;
  const std::string family = j.value("family", "gaussian_fh");
  if (family == "gaussian_fh")
    spec.family = EqFamily::GaussianFH;
  else if (family == "poisson_link")
    spec.family = EqFamily::PoissonLink;
  else
    throw ConfigError(where + ": unknown family '" + family + "'");

  spec.link = spec.family == EqFamily::GaussianFH ? LinkKind::Identity : LinkKind::Log;
  if (j.contains("link")) {
    const std::string link = j["link"].get<std::string>();
    if (link == "identity")
      spec.link = LinkKind::Identity;
    else if (link == "log")
      spec.link = LinkKind::Log;
    else
      throw ConfigError(where + ": unknown link '" + link + "'");
  }
  spec.comparator = j.value("comparator", false);

  // process
  ProcessSpec& proc = spec.process;
  std::string kind = "none";
  if (j.contains("process")) {
    const json& p = j["process"];
    check_keys(p, where + ".process",
               {"kind", "q_policy", "tau_prior", "sigma2_prior", "phi_prior", "a_prior"});
    kind = p.value("kind", "none");
    if (kind == "moran_icar")
      proc.kind = ProcessKind::MoranICAR;
    else if (kind == "exp_gp")
      proc.kind = ProcessKind::ExpGP;
    else if (kind == "independence")
      proc.kind = ProcessKind::Independence;
    else if (kind == "none")
      proc.kind = ProcessKind::None;
    else
      throw ConfigError(where + ".process: unknown kind '" + kind + "'");

    if (p.contains("q_policy")) {
      const json& q = p["q_policy"];
      if (q.is_string() && q.get<std::string>() == "all_positive")
        proc.q_policy = QPolicy::all_positive();
      else if (q.is_number())
        proc.q_policy = QPolicy::top_fraction(q.get<double>());
      else
        throw ConfigError(where + ".process.q_policy must be \"all_positive\" or a fraction");
    }
    // paper defaults: Gamma(1,1) on tau for the Gaussian lattice model,
    // Unif(0.01,100) for the count models; Unif(0.01,100) and Unif(0,4) on
    // the GP scale/range
    if (proc.kind == ProcessKind::MoranICAR)
      proc.tau_prior = spec.family == EqFamily::GaussianFH
                           ? PriorSpec::gamma(1.0, 1.0)
                           : PriorSpec::uniform(0.01, 100.0);
    if (p.contains("tau_prior"))
      proc.tau_prior = parse_prior(p["tau_prior"], where + ".process.tau_prior");
    if (p.contains("sigma2_prior"))
      proc.sigma2_prior = parse_prior(p["sigma2_prior"], where + ".process.sigma2_prior");
    if (p.contains("phi_prior"))
      proc.phi_prior = parse_prior(p["phi_prior"], where + ".process.phi_prior");
    if (p.contains("a_prior"))
      proc.a_prior = parse_prior(p["a_prior"], where + ".process.a_prior");
  }

  // beta prior default: Zellner g = 10 when a process scale exists to couple
  // to, N(0, 100^2) otherwise
  if (proc.kind == ProcessKind::MoranICAR && spec.family == EqFamily::GaussianFH) {
    spec.beta_prior = {BetaPrior::Kind::ZellnerG, 10.0, 100.0};
  } else if (proc.kind == ProcessKind::Independence) {
    spec.beta_prior = {BetaPrior::Kind::ZellnerG, 10.0, 100.0};
  } else {
    spec.beta_prior = {BetaPrior::Kind::NormalSd, 10.0, 100.0};
  }
  if (j.contains("beta_prior")) {
    const json& b = j["beta_prior"];
    check_keys(b, where + ".beta_prior", {"zellner_g", "normal_sd"});
    if (b.size() != 1)
      throw ConfigError(where + ".beta_prior must name exactly one prior");
    if (b.contains("zellner_g"))
      spec.beta_prior = {BetaPrior::Kind::ZellnerG,
                         get_num(b["zellner_g"], where + ".beta_prior.zellner_g"), 100.0};
    else
      spec.beta_prior = {BetaPrior::Kind::NormalSd, 10.0,
                         get_num(b["normal_sd"], where + ".beta_prior.normal_sd")};
  }
  spec.validate();
  return spec;
}

json model_to_json(const ModelSpec& spec) {
  json j;
  j["family"] = spec.family == EqFamily::GaussianFH ? "gaussian_fh" : "poisson_link";
  j["link"] = spec.link == LinkKind::Identity ? "identity" : "log";
  j["comparator"] = spec.comparator;
  json p;
  switch (spec.process.kind) {
    case ProcessKind::MoranICAR:
      p["kind"] = "moran_icar";
      p["q_policy"] = spec.process.q_policy.kind == QPolicy::Kind::AllPositive
                          ? json("all_positive")
                          : json(spec.process.q_policy.fraction);
      p["tau_prior"] = prior_to_json(spec.process.tau_prior);
      break;
    case ProcessKind::ExpGP:
      p["kind"] = "exp_gp";
      p["sigma2_prior"] = prior_to_json(spec.process.sigma2_prior);
      p["phi_prior"] = prior_to_json(spec.process.phi_prior);
      break;
    case ProcessKind::Independence:
      p["kind"] = "independence";
      p["a_prior"] = prior_to_json(spec.process.a_prior);
      break;
    case ProcessKind::None:
      p["kind"] = "none";
      break;
  }
  j["process"] = p;
  if (spec.beta_prior.kind == BetaPrior::Kind::ZellnerG)
    j["beta_prior"] = json{{"zellner_g", spec.beta_prior.g}};
  else
    j["beta_prior"] = json{{"normal_sd", spec.beta_prior.sd}};
  return j;
}

SamplerConfig parse_sampler(const json& j, const std::string& where,
                            const SamplerConfig& base) {
  check_keys(j, where,
             {"iterations", "burn_in", "block_size", "pilot", "proposal_scale",
              "log_scale_positive", "verify_feasibility", "feasibility_eps"});
  SamplerConfig cfg = base;
  cfg.n_iter = j.value("iterations", cfg.n_iter);
  cfg.n_burn = j.value("burn_in", cfg.n_burn);
  cfg.block_size = j.value("block_size", cfg.block_size);
  if (j.contains("pilot")) {
    const json& p = j["pilot"];
    check_keys(p, where + ".pilot", {"enabled", "iterations", "inflation"});
    cfg.pilot.enabled = p.value("enabled", cfg.pilot.enabled);
    cfg.pilot.iterations = p.value("iterations", cfg.pilot.iterations);
    cfg.pilot.inflation = p.value("inflation", cfg.pilot.inflation);
  }
  if (j.contains("proposal_scale")) {
    const json& s = j["proposal_scale"];
    check_keys(s, where + ".proposal_scale", {"process", "beta", "hyper"});
    cfg.scales.process = s.value("process", cfg.scales.process);
    cfg.scales.beta = s.value("beta", cfg.scales.beta);
    cfg.scales.hyper = s.value("hyper", cfg.scales.hyper);
  }
  cfg.log_scale_positive = j.value("log_scale_positive", cfg.log_scale_positive);
  cfg.verify_feasibility = j.value("verify_feasibility", cfg.verify_feasibility);
  cfg.feas_eps = j.value("feasibility_eps", cfg.feas_eps);
  cfg.validate();
  return cfg;
}

json sampler_to_json(const SamplerConfig& cfg) {
  return json{
      {"iterations", cfg.n_iter},
      {"burn_in", cfg.n_burn},
      {"block_size", cfg.block_size},
      {"pilot",
       {{"enabled", cfg.pilot.enabled},
        {"iterations", cfg.pilot.iterations},
        {"inflation", cfg.pilot.inflation}}},
      {"proposal_scale",
       {{"process", cfg.scales.process},
        {"beta", cfg.scales.beta},
        {"hyper", cfg.scales.hyper}}},
      {"log_scale_positive", cfg.log_scale_positive},
      {"verify_feasibility", cfg.verify_feasibility},
      {"feasibility_eps", cfg.feas_eps}};
}

}  // namespace

namespace {
RunConfig parse_run_config_impl(const json& j);
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return parse_run_config_impl(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
}

namespace {
RunConfig parse_run_config_impl(const json& j) {
  check_keys(j, "config",
             {"data", "models", "model", "sampler", "experiment", "seed", "threads",
              "output", "report"});

  RunConfig cfg;
  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, "data", {"path", "spatial", "spatial_kind", "births_offset",
                           "add_intercept"});
    cfg.data.path = d.value("path", "");
    cfg.data.spatial = d.value("spatial", "");
    cfg.data.spatial_kind = d.value("spatial_kind", "auto");
    cfg.data.births_offset = d.value("births_offset", false);
    cfg.data.add_intercept = d.value("add_intercept", true);
  }

  if (j.contains("models")) {
    if (!j["models"].is_object()) throw ConfigError("models must be an object");
    for (auto it = j["models"].begin(); it != j["models"].end(); ++it)
      cfg.models.emplace_back(it.key(), parse_model_spec(it.value(), it.key()));
  }

  if (j.contains("model")) {
    if (j["model"].is_string()) {
      cfg.fit_model = j["model"].get<std::string>();
    } else {
      cfg.models.emplace_back("model", parse_model_spec(j["model"], "model"));
      cfg.fit_model = "model";
    }
  } else if (cfg.models.size() == 1) {
    cfg.fit_model = cfg.models.front().first;
  }

  if (j.contains("sampler"))
    cfg.sampler = parse_sampler(j["sampler"], "sampler", SamplerConfig{});

  if (j.contains("experiment")) {
    const json& e = j["experiment"];
    check_keys(e, "experiment",
               {"generator", "replicates", "models", "generator_model",
                "synthesize_base", "truth", "calibration", "folds",
                "predict_median"});
    const std::string gen = e.value("generator", "parametric");
    if (gen == "parametric")
      cfg.experiment.generator = GeneratorKind::Parametric;
    else if (gen == "from_el_weights")
      cfg.experiment.generator = GeneratorKind::FromELWeights;
    else
      throw ConfigError("experiment.generator must be parametric or from_el_weights");
    cfg.experiment.replicates = e.value("replicates", 20);
    if (e.contains("models"))
      cfg.experiment.roster = e["models"].get<std::vector<std::string>>();
    cfg.experiment.generator_model = e.value("generator_model", "");
    cfg.experiment.synthesize_base = e.value("synthesize_base", false);
    if (e.contains("truth")) {
      const json& t = e["truth"];
      check_keys(t, "experiment.truth",
                 {"beta", "tau", "sigma2_y", "phi", "a", "overdispersion"});
      if (t.contains("beta")) {
        const auto v = t["beta"].get<std::vector<double>>();
        cfg.experiment.truth.beta =
            Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
      cfg.experiment.truth.tau = t.value("tau", 0.0);
      cfg.experiment.truth.sigma2_y = t.value("sigma2_y", 0.0);
      cfg.experiment.truth.phi = t.value("phi", 0.0);
      cfg.experiment.truth.a = t.value("a", 0.0);
      cfg.experiment.truth.overdispersion = t.value("overdispersion", 0.0);
    }
    cfg.experiment.calibration = cfg.sampler;
    cfg.experiment.calibration.n_iter = 1500;
    cfg.experiment.calibration.n_burn = 500;
    if (e.contains("calibration"))
      cfg.experiment.calibration =
          parse_sampler(e["calibration"], "experiment.calibration",
                        cfg.experiment.calibration);
    if (e.contains("folds"))
      cfg.experiment.folds = e["folds"].get<std::vector<int>>();
    cfg.experiment.predict_median = e.value("predict_median", false);
  } else {
    cfg.experiment.calibration = cfg.sampler;
    cfg.experiment.calibration.n_iter = 1500;
    cfg.experiment.calibration.n_burn = 500;
  }

  cfg.seed = j.value("seed", 1ULL);
  cfg.threads = j.value("threads", 0);
  if (j.contains("output")) {
    check_keys(j["output"], "output", {"dir"});
    cfg.out_dir = j["output"].value("dir", "");
  }
  if (j.contains("report")) {
    check_keys(j["report"], "report", {"tau_as_variance"});
    cfg.report_tau_as_variance = j["report"].value("tau_as_variance", true);
  }
  return cfg;
}
}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void apply_overrides(RunConfig& cfg, const std::string& overrides_json) {
  if (overrides_json.empty()) return;
  json j;
  try {
    j = json::parse(overrides_json);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("overrides are not valid JSON: ") + e.what());
  }
  try {
    check_keys(j, "overrides",
               {"seed", "threads", "out", "models", "folds", "model"});
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
    if (j.contains("out")) cfg.out_dir = j["out"].get<std::string>();
    if (j.contains("models"))
      cfg.experiment.roster = j["models"].get<std::vector<std::string>>();
    if (j.contains("folds"))
      cfg.experiment.folds = j["folds"].get<std::vector<int>>();
    if (j.contains("model")) cfg.fit_model = j["model"].get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("override type error: ") + e.what());
  }
}

std::string echo_config(const RunConfig& cfg) {
  json j;
  j["data"] = {{"path", cfg.data.path},
               {"spatial", cfg.data.spatial},
               {"spatial_kind", cfg.data.spatial_kind},
               {"births_offset", cfg.data.births_offset},
               {"add_intercept", cfg.data.add_intercept}};
  json models = json::object();
  for (const auto& [name, spec] : cfg.models) models[name] = model_to_json(spec);
  j["models"] = models;
  if (!cfg.fit_model.empty()) j["model"] = cfg.fit_model;
  j["sampler"] = sampler_to_json(cfg.sampler);

  json e;
  e["generator"] = cfg.experiment.generator == GeneratorKind::Parametric
                       ? "parametric"
                       : "from_el_weights";
  e["replicates"] = cfg.experiment.replicates;
  e["models"] = cfg.experiment.roster;
  e["generator_model"] = cfg.experiment.generator_model;
  e["synthesize_base"] = cfg.experiment.synthesize_base;
  json t;
  t["beta"] = std::vector<double>(
      cfg.experiment.truth.beta.data(),
      cfg.experiment.truth.beta.data() + cfg.experiment.truth.beta.size());
  t["tau"] = cfg.experiment.truth.tau;
  t["sigma2_y"] = cfg.experiment.truth.sigma2_y;
  t["phi"] = cfg.experiment.truth.phi;
  t["a"] = cfg.experiment.truth.a;
  t["overdispersion"] = cfg.experiment.truth.overdispersion;
  e["truth"] = t;
  e["calibration"] = sampler_to_json(cfg.experiment.calibration);
  e["folds"] = cfg.experiment.folds;
  e["predict_median"] = cfg.experiment.predict_median;
  j["experiment"] = e;

  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["output"] = {{"dir", cfg.out_dir}};
  j["report"] = {{"tau_as_variance", cfg.report_tau_as_variance}};
  return j.dump(2) + "\n";
}

const ModelSpec& find_model(const RunConfig& cfg, const std::string& name) {
  for (const auto& [key, spec] : cfg.models)
    if (key == name) return spec;
  throw ConfigError("model '" + name + "' is not defined in the config");
}

std::vector<ModelEntry> resolve_roster(const RunConfig& cfg) {
  std::vector<ModelEntry> roster;
  if (cfg.experiment.roster.empty()) {
    for (const auto& [name, spec] : cfg.models) roster.push_back({name, spec});
  } else {
    for (const auto& name : cfg.experiment.roster)
      roster.push_back({name, find_model(cfg, name)});
  }
  if (roster.empty()) throw EmptyRoster("no models selected");
  return roster;
}

int resolve_threads(const RunConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("SHEL_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

ObservedDataset load_configured_dataset(const RunConfig& cfg) {
  if (cfg.data.path.empty()) throw ConfigError("data.path is required");
  DatasetOptions opts;
  opts.births_offset = cfg.data.births_offset;
  opts.add_intercept = cfg.data.add_intercept;
  opts.spatial_kind = cfg.data.spatial_kind;
  return load_dataset(cfg.data.path, cfg.data.spatial, opts);
}

}  // namespace shel
