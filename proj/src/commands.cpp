#include "shel/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "shel/error.hpp"

namespace shel::cmd {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/" + name);
  if (!out) throw DataError("cannot write " + dir + "/" + name);
  return out;
}

void write_text(const std::string& dir, const std::string& name,
                const std::string& text) {
  auto out = open_out(dir, name);
  out << text;
}

void guard_intercept(const RunConfig& cfg, const ModelSpec& spec) {
  if (!cfg.data.add_intercept && spec.process.kind == ProcessKind::MoranICAR)
    throw NoIntercept("model '" + spec.name +
                      "': the reduced ICAR prior requires the intercept; "
                      "remove the no-intercept override");
}

json accept_json(const ChainOutput& chain, const SamplerConfig& sampler,
                 uint64_t seed) {
  json blocks = json::array();
  for (const auto& b : chain.blocks)
    blocks.push_back({{"name", b.name},
                      {"attempts", b.attempts},
                      {"accepts", b.accepts},
                      {"rate", b.rate()}});
  json j;
  j["blocks"] = blocks;
  j["feasibility_rejects"] = chain.feasibility_rejects;
  j["kept"] = chain.kept();
  j["diverged"] = chain.diverged;
  j["seed"] = seed;
  j["iterations"] = sampler.n_iter;
  j["burn_in"] = sampler.n_burn;
  if (chain.verified_feasible >= 0)
    j["verified_feasible"] = chain.verified_feasible;
  return j;
}

// stored chain plus the derived A = 1/tau row when requested
std::vector<SummaryRow> summarize(const RunConfig& cfg, const ModelSpec& spec,
                                  const ChainOutput& chain) {
  std::vector<SummaryRow> rows = posterior_summary(chain);
  if (cfg.report_tau_as_variance && spec.process.kind == ProcessKind::MoranICAR) {
    for (size_t j = 0; j < chain.names.size(); ++j) {
      if (chain.names[j] != "tau") continue;
      const auto col = chain.samples.col(static_cast<Eigen::Index>(j));
      std::vector<double> inv(col.size());
      for (Eigen::Index i = 0; i < col.size(); ++i) inv[i] = 1.0 / col[i];
      SummaryRow r;
      r.name = "A";
      r.median = quantile(inv, 0.5);
      r.lo = quantile(inv, 0.025);
      r.hi = quantile(inv, 0.975);
      rows.push_back(r);
    }
  }
  return rows;
}

std::string summary_table(const std::vector<SummaryRow>& rows) {
  size_t width = 9;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width) + 2) << "parameter"
     << std::right << std::setw(12) << "median" << std::setw(12) << "2.5%"
     << std::setw(12) << "97.5%" << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(width) + 2) << r.name
       << std::right << std::fixed << std::setprecision(4) << std::setw(12)
       << r.median << std::setw(12) << r.lo << std::setw(12) << r.hi << "\n";
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

}  // namespace

void fit(const RunConfig& cfg, const std::string& out_dir, std::string* summary_text,
         ChainOutput* chain_out) {
  if (cfg.fit_model.empty())
    throw ConfigError("fit needs a 'model' entry in the config");
  const ModelSpec& spec = find_model(cfg, cfg.fit_model);
  guard_intercept(cfg, spec);

  const ObservedDataset data = load_configured_dataset(cfg);
  const SpatialContext ctx = make_context(spec, data);
  PosteriorModel model(spec, data, ctx, {}, cfg.sampler.feas_eps);

  SamplerConfig sampler = cfg.sampler;
  sampler.seed = cfg.seed;
  const ChainOutput chain = run_chain(model, sampler);
  if (chain_out) *chain_out = chain;

  write_text(out_dir, "config_resolved.json", echo_config(cfg));

  {
    auto out = open_out(out_dir, "chain.csv");
    for (const auto& name : chain.names) out << name << ",";
    out << "log_posterior\n";
    for (long s = 0; s < chain.kept(); ++s) {
      for (Eigen::Index j = 0; j < chain.samples.cols(); ++j)
        out << fmt(chain.samples(s, j)) << ",";
      out << fmt(chain.log_post[s]) << "\n";
    }
  }
  write_text(out_dir, "acceptance.json",
             accept_json(chain, sampler, cfg.seed).dump(2) + "\n");

  if (chain.diverged)
    throw ChainDiverged("chain diverged; partial output kept in " + out_dir);

  const auto rows = summarize(cfg, spec, chain);
  {
    auto out = open_out(out_dir, "summary.csv");
    out << "parameter,median,q025,q975\n";
    for (const auto& r : rows)
      out << r.name << "," << fmt(r.median) << "," << fmt(r.lo) << ","
          << fmt(r.hi) << "\n";
  }
  if (summary_text) *summary_text = summary_table(rows);
}

void loo(const RunConfig& cfg, const std::string& out_dir) {
  const ObservedDataset data = load_configured_dataset(cfg);
  const auto roster = resolve_roster(cfg);
  for (const auto& entry : roster) guard_intercept(cfg, entry.spec);

  const MSPEReport report =
      loo_mspe(data, roster, cfg.sampler, derive_seed(cfg.seed, {0x100u}),
               resolve_threads(cfg), cfg.experiment.folds,
               cfg.experiment.predict_median);

  write_text(out_dir, "config_resolved.json", echo_config(cfg));
  {
    auto out = open_out(out_dir, "mspe.csv");
    out << "model,location,id,z,zhat,sq_dev\n";
    for (size_t mi = 0; mi < report.model_names.size(); ++mi)
      for (size_t fi = 0; fi < report.folds.size(); ++fi) {
        const int fold = report.folds[fi];
        out << report.model_names[mi] << "," << fold << "," << data.ids[fold]
            << "," << fmt(data.z[fold]) << ","
            << fmt(report.pred(static_cast<Eigen::Index>(fi),
                               static_cast<Eigen::Index>(mi)))
            << ","
            << fmt(report.sq_dev(static_cast<Eigen::Index>(fi),
                                 static_cast<Eigen::Index>(mi)))
            << "\n";
      }
  }
  json j;
  j["n"] = data.n();
  j["folds"] = report.folds;
  j["complete"] = report.complete;
  json per_model = json::object();
  for (size_t mi = 0; mi < report.model_names.size(); ++mi) {
    per_model[report.model_names[mi]] = {
        {"mspe", report.mspe[mi]},
        {"failed_folds", report.failed_folds[mi]}};
  }
  j["per_model"] = per_model;
  write_text(out_dir, "mspe_report.json", j.dump(2) + "\n");
  if (!report.complete)
    throw FoldFailed("some folds failed; partial results kept in " + out_dir);
}

void simulate(const RunConfig& cfg, const std::string& out_dir) {
  ExperimentPlan plan;
  plan.generator = cfg.experiment.generator;
  plan.n_replicates = cfg.experiment.replicates;
  plan.base = load_configured_dataset(cfg);
  plan.roster = resolve_roster(cfg);
  for (const auto& entry : plan.roster) guard_intercept(cfg, entry.spec);
  plan.sampler = cfg.sampler;
  plan.calibration = cfg.experiment.calibration;
  plan.generator_model = 0;
  if (!cfg.experiment.generator_model.empty()) {
    plan.generator_model = -1;
    for (size_t i = 0; i < plan.roster.size(); ++i)
      if (plan.roster[i].name == cfg.experiment.generator_model)
        plan.generator_model = static_cast<int>(i);
    if (plan.generator_model < 0)
      throw ConfigError("generator_model '" + cfg.experiment.generator_model +
                        "' is not in the roster");
  }
  plan.synthesize_base = cfg.experiment.synthesize_base;
  plan.truth = cfg.experiment.truth;
  plan.master_seed = cfg.seed;
  plan.threads = resolve_threads(cfg);
  plan.predict_median = cfg.experiment.predict_median;

  const Scoreboard board = run_study(plan);

  write_text(out_dir, "config_resolved.json", echo_config(cfg));
  {
    auto out = open_out(out_dir, "replicates.csv");
    out << "replicate,model,mspe\n";
    for (Eigen::Index r = 0; r < board.mspe.rows(); ++r)
      for (size_t mi = 0; mi < board.model_names.size(); ++mi)
        out << r << "," << board.model_names[mi] << ","
            << fmt(board.mspe(r, static_cast<Eigen::Index>(mi))) << "\n";
  }
  json j;
  j["plan_echo"] = json::parse(echo_config(cfg));
  json per_model = json::object();
  for (size_t mi = 0; mi < board.model_names.size(); ++mi) {
    const auto col = board.mspe.col(static_cast<Eigen::Index>(mi));
    per_model[board.model_names[mi]] = {
        {"mean_mspe", board.mean_mspe[mi]},
        {"per_replicate", std::vector<double>(col.data(), col.data() + col.size())}};
  }
  j["per_model"] = per_model;
  json reductions = json::object();
  for (const auto& [pair, pct] : board.reductions) reductions[pair] = pct;
  j["reductions"] = reductions;
  j["complete"] = board.complete;
  write_text(out_dir, "scoreboard.json", j.dump(2) + "\n");
}

void basis(const RunConfig& cfg, const std::string& out_dir) {
  const ObservedDataset data = load_configured_dataset(cfg);
  if (!data.has_graph())
    throw DataError("basis needs an edge-list spatial reference");

  QPolicy policy;
  if (!cfg.fit_model.empty()) {
    const ModelSpec& spec = find_model(cfg, cfg.fit_model);
    guard_intercept(cfg, spec);
    if (spec.process.kind == ProcessKind::MoranICAR) policy = spec.process.q_policy;
  } else if (!cfg.data.add_intercept) {
    throw NoIntercept("basis construction requires the intercept column");
  }

  const SpatialBasis b = moran_basis(data.graph, data.X, policy);

  write_text(out_dir, "config_resolved.json", echo_config(cfg));
  {
    auto out = open_out(out_dir, "moran_basis.csv");
    out << "id";
    for (int j = 0; j < b.q(); ++j) out << ",m" << j;
    out << "\n";
    for (int i = 0; i < data.n(); ++i) {
      out << data.ids[i];
      for (int j = 0; j < b.q(); ++j) out << "," << fmt(b.M(i, j));
      out << "\n";
    }
  }
  {
    auto out = open_out(out_dir, "eigenvalues.csv");
    out << "index,eigenvalue\n";
    for (int j = 0; j < b.q(); ++j) out << j << "," << fmt(b.eigvals[j]) << "\n";
  }
  json j;
  j["n"] = data.n();
  j["q"] = b.q();
  j["min_eig_reduced_precision"] = b.min_eig;
  j["pd"] = b.min_eig > 0.0;
  j["connected"] = data.graph.connected();
  j["logdet_reduced_precision"] = b.logdet_Qr;
  write_text(out_dir, "basis_report.json", j.dump(2) + "\n");
}

}  // namespace shel::cmd
