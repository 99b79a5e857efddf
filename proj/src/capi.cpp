#include "shel/shel.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "json.hpp"

#include "shel/commands.hpp"
#include "shel/config.hpp"
#include "shel/error.hpp"

using nlohmann::json;

struct shel_dataset {
  shel::ObservedDataset data;
};
struct shel_basis {
  shel::SpatialBasis basis;
};
struct shel_chain {
  shel::ChainOutput chain;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

shel_status classify(const std::exception& e) {
  set_error(e.what());
  if (dynamic_cast<const shel::ConfigError*>(&e)) return SHEL_ERR_CONFIG;
  if (dynamic_cast<const shel::DataError*>(&e)) return SHEL_ERR_DATA;
  return SHEL_ERR_NUMERIC;
}

template <typename Fn>
shel_status guarded(Fn&& fn) {
  try {
    fn();
    return SHEL_OK;
  } catch (const std::exception& e) {
    return classify(e);
  } catch (...) {
    set_error("unknown error");
    return SHEL_ERR_NUMERIC;
  }
}

shel_status invalid(const char* what) {
  set_error(what);
  return SHEL_ERR_INVALID;
}

shel::RunConfig config_from(const char* config_json, const char* overrides_json) {
  if (!config_json) throw shel::ConfigError("config text is null");
  shel::RunConfig cfg = shel::parse_run_config(config_json);
  if (overrides_json && *overrides_json) shel::apply_overrides(cfg, overrides_json);
  return cfg;
}

}  // namespace

extern "C" {

const char* shel_version(void) { return "0.1.0"; }

const char* shel_last_error(void) { return g_last_error.c_str(); }

shel_status shel_dataset_load(const char* data_csv, const char* spatial_path,
                              const char* options_json, shel_dataset** out) {
  if (!data_csv || !out) return invalid("shel_dataset_load: null argument");
  *out = nullptr;
  return guarded([&] {
    shel::DatasetOptions opts;
    if (options_json && *options_json) {
      json j = json::parse(options_json, nullptr, false);
      if (j.is_discarded())
        throw shel::ConfigError("dataset options are not valid JSON");
      opts.births_offset = j.value("births_offset", false);
      opts.add_intercept = j.value("add_intercept", true);
      opts.spatial_kind = j.value("spatial_kind", "auto");
    }
    auto handle = std::make_unique<shel_dataset>();
    handle->data =
        shel::load_dataset(data_csv, spatial_path ? spatial_path : "", opts);
    *out = handle.release();
  });
}

void shel_dataset_free(shel_dataset* ds) { delete ds; }

int shel_dataset_n(const shel_dataset* ds) { return ds ? ds->data.n() : -1; }

int shel_dataset_m(const shel_dataset* ds) { return ds ? ds->data.m() : -1; }

shel_status shel_basis_build(const shel_dataset* ds, const char* options_json,
                             shel_basis** out) {
  if (!ds || !out) return invalid("shel_basis_build: null argument");
  *out = nullptr;
  return guarded([&] {
    shel::QPolicy policy;
    if (options_json && *options_json) {
      json j = json::parse(options_json, nullptr, false);
      if (j.is_discarded())
        throw shel::ConfigError("basis options are not valid JSON");
      if (j.contains("q_policy")) {
        if (j["q_policy"].is_number())
          policy = shel::QPolicy::top_fraction(j["q_policy"].get<double>());
        else if (j["q_policy"] != "all_positive")
          throw shel::ConfigError("q_policy must be \"all_positive\" or a fraction");
      }
    }
    if (!ds->data.has_graph())
      throw shel::DataError("dataset has no lattice graph");
    auto handle = std::make_unique<shel_basis>();
    handle->basis = shel::moran_basis(ds->data.graph, ds->data.X, policy);
    *out = handle.release();
  });
}

void shel_basis_free(shel_basis* b) { delete b; }

int shel_basis_q(const shel_basis* b) { return b ? b->basis.q() : -1; }

double shel_basis_min_eig(const shel_basis* b) {
  return b ? b->basis.min_eig : -1.0;
}

shel_status shel_basis_matrix(const shel_basis* b, double* buf, size_t len) {
  if (!b || !buf) return invalid("shel_basis_matrix: null argument");
  const size_t need = static_cast<size_t>(b->basis.M.rows()) *
                      static_cast<size_t>(b->basis.M.cols());
  if (len < need) return invalid("shel_basis_matrix: buffer too small");
  for (Eigen::Index i = 0; i < b->basis.M.rows(); ++i)
    for (Eigen::Index j = 0; j < b->basis.M.cols(); ++j)
      buf[i * b->basis.M.cols() + j] = b->basis.M(i, j);
  return SHEL_OK;
}

void shel_chain_free(shel_chain* c) { delete c; }

long shel_chain_kept(const shel_chain* c) { return c ? c->chain.kept() : -1; }

int shel_chain_dim(const shel_chain* c) {
  return c ? static_cast<int>(c->chain.names.size()) : -1;
}

const char* shel_chain_name(const shel_chain* c, int j) {
  if (!c || j < 0 || j >= static_cast<int>(c->chain.names.size())) return nullptr;
  return c->chain.names[static_cast<size_t>(j)].c_str();
}

shel_status shel_chain_samples(const shel_chain* c, double* buf, size_t len) {
  if (!c || !buf) return invalid("shel_chain_samples: null argument");
  const auto& s = c->chain.samples;
  const size_t need = static_cast<size_t>(s.rows()) * static_cast<size_t>(s.cols());
  if (len < need) return invalid("shel_chain_samples: buffer too small");
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j) buf[i * s.cols() + j] = s(i, j);
  return SHEL_OK;
}

shel_status shel_run_fit(const char* config_json, const char* overrides_json,
                         const char* out_dir, char** summary_out,
                         shel_chain** chain_out) {
  if (!out_dir) return invalid("shel_run_fit: out_dir is null");
  if (summary_out) *summary_out = nullptr;
  if (chain_out) *chain_out = nullptr;
  return guarded([&] {
    const shel::RunConfig cfg = config_from(config_json, overrides_json);
    std::string summary;
    auto chain = std::make_unique<shel_chain>();
    shel::cmd::fit(cfg, out_dir, &summary, &chain->chain);
    if (summary_out) {
      *summary_out = static_cast<char*>(std::malloc(summary.size() + 1));
      if (*summary_out) std::memcpy(*summary_out, summary.c_str(), summary.size() + 1);
    }
    if (chain_out) *chain_out = chain.release();
  });
}

shel_status shel_run_loo(const char* config_json, const char* overrides_json,
                         const char* out_dir) {
  if (!out_dir) return invalid("shel_run_loo: out_dir is null");
  return guarded([&] {
    shel::cmd::loo(config_from(config_json, overrides_json), out_dir);
  });
}

shel_status shel_run_simulate(const char* config_json, const char* overrides_json,
                              const char* out_dir) {
  if (!out_dir) return invalid("shel_run_simulate: out_dir is null");
  return guarded([&] {
    shel::cmd::simulate(config_from(config_json, overrides_json), out_dir);
  });
}

shel_status shel_run_basis(const char* config_json, const char* overrides_json,
                           const char* out_dir) {
  if (!out_dir) return invalid("shel_run_basis: out_dir is null");
  return guarded([&] {
    shel::cmd::basis(config_from(config_json, overrides_json), out_dir);
  });
}

void shel_string_free(char* s) { std::free(s); }

}  // extern "C"
