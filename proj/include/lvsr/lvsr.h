#ifndef LVSR_LVSR_H
#define LVSR_LVSR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(LVSR_BUILDING_LIBRARY)
#    define LVSR_API __declspec(dllexport)
#  else
#    define LVSR_API __declspec(dllimport)
#  endif
#else
#  define LVSR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every function returning int returns one of these. On failure a message is
   available from lvsr_last_error() on the calling thread. */
enum {
    LVSR_OK = 0,
    LVSR_ERR_ARGUMENT = 1,
    LVSR_ERR_PARSE = 2,
    LVSR_ERR_BOUNDS = 3,
    LVSR_ERR_NUMERIC = 4,
    LVSR_ERR_IO = 5,
    LVSR_ERR_INTERNAL = 6
};

enum { LVSR_BOUND_BOUCHARD = 0, LVSR_BOUND_REPARAM = 1 };
enum { LVSR_ENCODER_LINEAR_BOUCHARD = 0, LVSR_ENCODER_LINEAR_GAUSSIAN = 1, LVSR_ENCODER_DEEP_GAUSSIAN = 2 };
enum { LVSR_FORMAT_TEXT = 0, LVSR_FORMAT_JSON = 1 };
enum { LVSR_LATENT_AE = 0, LVSR_LATENT_EM = 1 };
enum { LVSR_NEXT_MC = 0, LVSR_NEXT_MEAN = 1 };
enum { LVSR_DCG_BINARY = 0, LVSR_DCG_LITERAL = 1 };
enum { LVSR_BASELINE_POPULARITY = 0, LVSR_BASELINE_ITEMKNN = 1 };

typedef struct lvsr_sessions lvsr_sessions;
typedef struct lvsr_model lvsr_model;
typedef struct lvsr_encoder lvsr_encoder;

LVSR_API const char* lvsr_version(void);
LVSR_API const char* lvsr_last_error(void);
LVSR_API const char* lvsr_status_name(int status);

/* Name <-> enum conversion, e.g. "bouchard", "linear_bouchard". */
LVSR_API int lvsr_bound_from_string(const char* name, int* out);
LVSR_API int lvsr_encoder_kind_from_string(const char* name, int* out);
LVSR_API const char* lvsr_bound_name(int bound);
LVSR_API const char* lvsr_encoder_kind_name(int kind);

/* ---- sessions ---------------------------------------------------------- */

/* num_items <= 0 infers the catalog size from the largest id. */
LVSR_API int lvsr_sessions_load(const char* path, int64_t num_items, lvsr_sessions** out);
/* lengths[i] views of session i are stored back to back in views. ids may be
   NULL, giving "s0", "s1", ... */
LVSR_API int lvsr_sessions_create(int64_t num_items, size_t count, const char* const* ids, const size_t* lengths,
                                  const int64_t* views, lvsr_sessions** out);
LVSR_API int lvsr_sessions_save(const lvsr_sessions* s, const char* path);
LVSR_API void lvsr_sessions_free(lvsr_sessions* s);

LVSR_API size_t lvsr_sessions_count(const lvsr_sessions* s);
LVSR_API size_t lvsr_sessions_num_items(const lvsr_sessions* s);
LVSR_API size_t lvsr_sessions_num_views(const lvsr_sessions* s);
/* Pointers stay valid until the set is freed. */
LVSR_API int lvsr_sessions_get(const lvsr_sessions* s, size_t index, const char** id, const int64_t** views,
                               size_t* length);

LVSR_API int lvsr_sessions_split(const lvsr_sessions* s, double test_fraction, uint64_t seed, lvsr_sessions** train,
                                 lvsr_sessions** test);
LVSR_API int lvsr_sessions_filter_top(const lvsr_sessions* s, size_t keep, lvsr_sessions** out);

/* ---- model parameters -------------------------------------------------- */

/* psi is P x K row-major. */
LVSR_API int lvsr_model_create(size_t num_items, size_t dim, const double* psi, const double* rho, lvsr_model** out);
LVSR_API int lvsr_model_load(const char* path, lvsr_model** out);
LVSR_API int lvsr_model_save(const lvsr_model* m, const char* path, int format);
LVSR_API void lvsr_model_free(lvsr_model* m);
LVSR_API size_t lvsr_model_num_items(const lvsr_model* m);
LVSR_API size_t lvsr_model_dim(const lvsr_model* m);
LVSR_API int lvsr_model_copy_psi(const lvsr_model* m, double* out);
LVSR_API int lvsr_model_copy_rho(const lvsr_model* m, double* out);

/* ---- simulation -------------------------------------------------------- */

LVSR_API int lvsr_random_ground_truth(size_t num_items, size_t dim, uint64_t seed, double psi_scale, double rho_scale,
                                      lvsr_model** out);
/* length_spec is "12" (fixed) or "poisson:9.5". */
LVSR_API int lvsr_simulate(const lvsr_model* truth, uint64_t seed, size_t num_sessions, const char* length_spec,
                           lvsr_sessions** out);

LVSR_API int lvsr_case_study_model(lvsr_model** out);
LVSR_API const char* lvsr_case_study_label(size_t item);
LVSR_API size_t lvsr_case_study_scenario_count(void);
LVSR_API int lvsr_case_study_scenario(size_t index, const char** name, const int64_t** views, size_t* length);

/* ---- training ---------------------------------------------------------- */

typedef struct lvsr_train_config {
    int bound;
    int encoder_kind;
    size_t dim;
    int epochs;
    double learning_rate;
    double l2;
    size_t batch_size;
    size_t mc_samples;
    uint64_t seed;
    int threads;
} lvsr_train_config;

LVSR_API void lvsr_train_config_default(lvsr_train_config* cfg);

typedef void (*lvsr_epoch_callback)(int epoch, double objective, void* user);

/* loss_curve, when non-NULL, receives cfg->epochs values. */
LVSR_API int lvsr_train(const lvsr_sessions* data, const lvsr_train_config* cfg, lvsr_epoch_callback on_epoch,
                        void* user, lvsr_model** model, lvsr_encoder** encoder, double* loss_curve);

LVSR_API int lvsr_encoder_load(const char* path, lvsr_encoder** out);
LVSR_API int lvsr_encoder_save(const lvsr_encoder* e, const char* path);
LVSR_API void lvsr_encoder_free(lvsr_encoder* e);
LVSR_API int lvsr_encoder_kind(const lvsr_encoder* e);
LVSR_API size_t lvsr_encoder_num_items(const lvsr_encoder* e);
LVSR_API size_t lvsr_encoder_dim(const lvsr_encoder* e);

/* ---- inference and prediction ------------------------------------------ */

/* Posterior of one session: mean (K) and covariance (K x K row-major). */
LVSR_API int lvsr_em_infer(const lvsr_model* m, const int64_t* views, size_t length, int iterations, double* mean,
                           double* covariance, double* final_bound);
/* Diagonal posterior from the encoder: mean (K) and variances (K). */
LVSR_API int lvsr_encode(const lvsr_encoder* e, const int64_t* views, size_t length, double* mean, double* variances);
LVSR_API int lvsr_predict(const lvsr_model* m, const double* mean, const double* covariance, int next_item,
                          size_t samples, uint64_t seed, double* probs);
/* Posterior from the history (encoder for LVSR_LATENT_AE, else EM), then the
   next-item distribution (P values). */
LVSR_API int lvsr_predict_session(const lvsr_model* m, const lvsr_encoder* e, const int64_t* views, size_t length,
                                  int latent, int next_item, size_t samples, int em_iterations, uint64_t seed,
                                  double* probs);
/* Ids of the k largest scores, descending, ties to the lower id. */
LVSR_API int lvsr_top_k(const double* scores, size_t count, size_t k, int64_t* out);

/* ---- evaluation -------------------------------------------------------- */

typedef struct lvsr_eval_config {
    size_t metric_k;
    size_t mc_samples;
    int em_iterations;
    int dcg;
    uint64_t seed;
    int threads;
} lvsr_eval_config;

LVSR_API void lvsr_eval_config_default(lvsr_eval_config* cfg);

typedef struct lvsr_report_row {
    char train_algorithm[32];
    char online_latent[8];
    char online_next_item[8];
    double rc_at_k;
    double dcg_at_k;
    size_t evaluated;
    size_t skipped;
} lvsr_report_row;

/* Writes 4 rows with an encoder, 2 (EM only) without; rows must hold 4. */
LVSR_API int lvsr_evaluate_lvm(const lvsr_model* m, const lvsr_encoder* e, const lvsr_sessions* test,
                               const lvsr_eval_config* cfg, const char* train_algorithm, lvsr_report_row* rows,
                               size_t* count);
LVSR_API int lvsr_evaluate_baseline(int baseline, const lvsr_sessions* train, const lvsr_sessions* test,
                                    const lvsr_eval_config* cfg, lvsr_report_row* row);
/* Label for an encoder's training algorithm, e.g. "Bouch/AE". */
LVSR_API const char* lvsr_train_algorithm_label(int encoder_kind);

/* Report as CSV (text = 0) or aligned text (text = 1). Returns the full length
   via *needed; copies at most capacity - 1 bytes plus a terminator. */
LVSR_API int lvsr_format_report(const lvsr_report_row* rows, size_t count, size_t metric_k, int text, char* buffer,
                                size_t capacity, size_t* needed);

#ifdef __cplusplus
}
#endif

#endif
