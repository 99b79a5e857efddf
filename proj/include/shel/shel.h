/* C interface to the SHEL spatial modeling library.
 *
 * All functions return shel_status; 0 is success. On failure,
 * shel_last_error() returns a message describing what went wrong on the
 * calling thread. Handles are opaque and freed with their *_free function.
 */
#ifndef SHEL_H
#define SHEL_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum shel_status {
  SHEL_OK = 0,
  SHEL_ERR_INVALID = 1, /* null/invalid handle or argument */
  SHEL_ERR_CONFIG = 2,  /* config document problems */
  SHEL_ERR_DATA = 3,    /* data files and validation */
  SHEL_ERR_NUMERIC = 4  /* solver / sampler failures */
} shel_status;

typedef struct shel_dataset shel_dataset;
typedef struct shel_basis shel_basis;
typedef struct shel_chain shel_chain;

const char* shel_version(void);
const char* shel_last_error(void);

/* ---- datasets -----------------------------------------------------------
 * options_json (optional): {"births_offset": bool, "add_intercept": bool,
 * "spatial_kind": "auto"|"edges"|"coords"|"none"}
 */
shel_status shel_dataset_load(const char* data_csv, const char* spatial_path,
                              const char* options_json, shel_dataset** out);
void shel_dataset_free(shel_dataset* ds);
int shel_dataset_n(const shel_dataset* ds);   /* -1 on invalid handle */
int shel_dataset_m(const shel_dataset* ds);

/* ---- Moran basis --------------------------------------------------------
 * options_json (optional): {"q_policy": "all_positive" | fraction}
 */
shel_status shel_basis_build(const shel_dataset* ds, const char* options_json,
                             shel_basis** out);
void shel_basis_free(shel_basis* b);
int shel_basis_q(const shel_basis* b);
double shel_basis_min_eig(const shel_basis* b);
/* copies the n x q basis row-major; len must be >= n*q */
shel_status shel_basis_matrix(const shel_basis* b, double* buf, size_t len);

/* ---- chains ------------------------------------------------------------ */
void shel_chain_free(shel_chain* c);
long shel_chain_kept(const shel_chain* c);
int shel_chain_dim(const shel_chain* c);
const char* shel_chain_name(const shel_chain* c, int j);
/* copies the kept x dim sample matrix row-major; len must be >= kept*dim */
shel_status shel_chain_samples(const shel_chain* c, double* buf, size_t len);

/* ---- commands -----------------------------------------------------------
 * config_json is the document text (not a path). overrides_json may be NULL
 * or {"seed": u64, "threads": n, "out": dir, "models": [...], "folds": [...],
 * "model": name}. Outputs are written under out_dir. For fit, summary_out
 * (optional) receives an aligned text table (free with shel_string_free) and
 * chain_out (optional) the stored chain.
 */
shel_status shel_run_fit(const char* config_json, const char* overrides_json,
                         const char* out_dir, char** summary_out,
                         shel_chain** chain_out);
shel_status shel_run_loo(const char* config_json, const char* overrides_json,
                         const char* out_dir);
shel_status shel_run_simulate(const char* config_json, const char* overrides_json,
                              const char* out_dir);
shel_status shel_run_basis(const char* config_json, const char* overrides_json,
                           const char* out_dir);

void shel_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* SHEL_H */
