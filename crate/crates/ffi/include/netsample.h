#ifndef NETSAMPLE_H
#define NETSAMPLE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NsStatus {
  NS_STATUS_OK = 0,
  NS_STATUS_NULL_ARGUMENT = 1,
  NS_STATUS_INVALID_ARGUMENT = 2,
  NS_STATUS_CONFIG = 3,
  NS_STATUS_DATA = 4,
  NS_STATUS_REDUCIBLE = 5,
  NS_STATUS_INTERNAL = 6,
  NS_STATUS_PANIC = 7,
} NsStatus;

typedef enum NsDesignKind {
  NS_DESIGN_KIND_RDS = 0,
  NS_DESIGN_KIND_RDS_PLUS = 1,
  NS_DESIGN_KIND_SB = 2,
  NS_DESIGN_KIND_SB_PLUS = 3,
} NsDesignKind;

typedef enum NsResampleMode {
  NS_RESAMPLE_MODE_REPEATED = 0,
  NS_RESAMPLE_MODE_PROCESS = 1,
  NS_RESAMPLE_MODE_PROCESS_WR = 2,
} NsResampleMode;

typedef enum NsEstimator {
  NS_ESTIMATOR_ADHERENT = 0,
  NS_ESTIMATOR_VH_CURRENT = 1,
  NS_ESTIMATOR_SAMPLE_MEAN = 2,
  NS_ESTIMATOR_ADHERENT_WR = 3,
} NsEstimator;

typedef enum NsVariance {
  NS_VARIANCE_SIMPLE_N = 0,
  NS_VARIANCE_SIMPLE_TAYLOR = 1,
  NS_VARIANCE_TAYLOR_EDGES = 2,
  NS_VARIANCE_TAYLOR_DIAG = 3,
  NS_VARIANCE_TAYLOR_CONSERVATIVE = 4,
  NS_VARIANCE_WR = 5,
} NsVariance;

typedef struct NsFrequencies NsFrequencies;

typedef struct NsPopulation NsPopulation;

typedef struct NsSample NsSample;

// Field design parameters; see [`ns_design_default`].
typedef struct NsDesignConfig {
  size_t target_n;
  double seed_fraction;
  size_t coupon_max;
  uint32_t coupon_expiry_days;
  double redeem_prob;
  bool plus_links;
  double reseed_fraction;
} NsDesignConfig;

// Resampling parameters; see [`ns_resample_default`]. A negative
// `burn_in` selects the automatic rule with `burn_in_extra` iterations
// after first reaching the target size.
typedef struct NsResampleConfig {
  enum NsResampleMode mode;
  size_t iterations;
  size_t target_m;
  double trace_p;
  double seed_p;
  double reseed_p;
  int64_t burn_in;
  size_t burn_in_extra;
  size_t batches;
  bool track_pairs;
} NsResampleConfig;

typedef struct NsEstimate {
  double point;
  double variance;
  double half_width;
  double lo;
  double hi;
} NsEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *ns_last_error_message(void);

// Loads an edge list and an optional attribute CSV (`attributes_path` may
// be NULL).
enum NsStatus ns_population_load(const char *edges_path,
                                 const char *attributes_path,
                                 struct NsPopulation **out);

// Builds a population on nodes `0..node_count` from `edge_count` index
// pairs stored flat in `edges`.
enum NsStatus ns_population_from_edges(size_t node_count,
                                       const size_t *edges,
                                       size_t edge_count,
                                       struct NsPopulation **out);

// Adds or replaces a numeric attribute with one value per node.
enum NsStatus ns_population_set_attribute(struct NsPopulation *pop,
                                          const char *name,
                                          const double *values,
                                          size_t len);

size_t ns_population_node_count(const struct NsPopulation *pop);

size_t ns_population_edge_count(const struct NsPopulation *pop);

void ns_population_free(struct NsPopulation *pop);

// Fills `out` with the default parameters of a design.
enum NsStatus ns_design_default(enum NsDesignKind kind, struct NsDesignConfig *out);

enum NsStatus ns_survey_run(const struct NsPopulation *pop,
                            const struct NsDesignConfig *cfg,
                            uint64_t seed,
                            struct NsSample **out);

// Builds a sample from local structure: `recruitment` holds
// `(recruiter, recruit)` pairs and `plus` extra revealed links, both flat.
enum NsStatus ns_sample_from_edges(size_t member_count,
                                   const size_t *recruitment,
                                   size_t recruitment_count,
                                   const size_t *plus,
                                   size_t plus_count,
                                   struct NsSample **out);

// Adds or replaces a per-member variable.
enum NsStatus ns_sample_set_variable(struct NsSample *sample,
                                     const char *name,
                                     const double *values,
                                     size_t len);

size_t ns_sample_len(const struct NsSample *sample);

// Copies population node indices of the members into `out`, which must
// hold `len` entries where `len` equals [`ns_sample_len`].
enum NsStatus ns_sample_members(const struct NsSample *sample, size_t *out, size_t len);

void ns_sample_free(struct NsSample *sample);

// Fills `out` with the default parameters of a resampling mode.
enum NsStatus ns_resample_default(enum NsResampleMode mode,
                                  size_t target_m,
                                  struct NsResampleConfig *out);

enum NsStatus ns_resample_run(const struct NsSample *sample,
                              const struct NsResampleConfig *cfg,
                              uint64_t seed,
                              struct NsFrequencies **out);

size_t ns_frequencies_len(const struct NsFrequencies *freq);

size_t ns_frequencies_t_effective(const struct NsFrequencies *freq);

// Copies the inclusion frequencies `f_i` into `out` (`len` entries).
enum NsStatus ns_frequencies_copy(const struct NsFrequencies *freq, double *out, size_t len);

void ns_frequencies_free(struct NsFrequencies *freq);

// Point estimate and interval for one variable of a resampled sample.
enum NsStatus ns_estimate(const struct NsSample *sample,
                          const struct NsFrequencies *freq,
                          const char *variable,
                          enum NsEstimator estimator,
                          enum NsVariance variance,
                          double alpha,
                          struct NsEstimate *out);

// Generalized unequal-probability mean `sum(y/w) / sum(1/w)` over plain
// arrays.
enum NsStatus ns_mu_f(const double *y, const double *w, size_t len, double *out);

// Exact stationary marginals of the without-replacement sampling process
// on a sample of at most 12 members. Fails with
// `NS_STATUS_REDUCIBLE` when `reseed_p` is 0.
enum NsStatus ns_exact_marginals(const struct NsSample *sample,
                                 const struct NsResampleConfig *cfg,
                                 double *out,
                                 size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETSAMPLE_H */
