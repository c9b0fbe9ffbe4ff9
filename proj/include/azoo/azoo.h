/* Policy-network introspection toolkit: C interface.
 *
 * Every function returns an azoo_status. On failure, azoo_last_error()
 * returns a message for the calling thread that stays valid until the next
 * failing call on that thread. Strings returned through char** out-parameters
 * are owned by the caller and released with azoo_string_free. Handles are
 * released with their matching *_free function; passing NULL is a no-op. */
#ifndef AZOO_AZOO_H
#define AZOO_AZOO_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define AZOO_API __declspec(dllexport)
#else
#define AZOO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum azoo_status {
  AZOO_OK = 0,
  AZOO_ERR_INVALID_ARGUMENT = 1,
  AZOO_ERR_SHAPE = 2,
  AZOO_ERR_CONFIG = 3,
  AZOO_ERR_OUT_OF_RANGE = 4,
  AZOO_ERR_IO = 5,
  AZOO_ERR_BAD_MAGIC = 6,
  AZOO_ERR_UNSUPPORTED_VERSION = 7,
  AZOO_ERR_CHECKSUM = 8,
  AZOO_ERR_TRUNCATED = 9,
  AZOO_ERR_MALFORMED = 10,
  AZOO_ERR_SPEC_INCONSISTENT = 11,
  AZOO_ERR_MISSING_STREAM = 12,
  AZOO_ERR_LENGTH_MISMATCH = 13,
  AZOO_ERR_DEGENERATE = 14,
  AZOO_ERR_INSUFFICIENT_DATA = 15,
  AZOO_ERR_INTERNAL = 99
} azoo_status;

typedef struct azoo_model azoo_model;
typedef struct azoo_rollout azoo_rollout;
typedef struct azoo_server azoo_server;

AZOO_API const char* azoo_version(void);
AZOO_API const char* azoo_status_name(azoo_status status);
AZOO_API const char* azoo_last_error(void);
AZOO_API void azoo_string_free(char* s);

/* Frozen models ---------------------------------------------------------- */

AZOO_API azoo_status azoo_model_load(const char* path, azoo_model** out);
AZOO_API azoo_status azoo_model_save(const azoo_model* model, const char* path);
/* head: "q", "dueling", "c51" or "actor_critic"; algorithm as in the model
 * metadata (e.g. "dqn", "a2c"); checkpoint e.g. "final" or "hours:4". */
AZOO_API azoo_status azoo_model_make_random(const char* head, int n_actions, const char* game, const char* algorithm,
                                            const char* run_id, const char* checkpoint, uint64_t seed,
                                            azoo_model** out);
AZOO_API void azoo_model_free(azoo_model* model);
/* JSON object {meta, spec, tensors:[{name, shape}], parameter_count}. */
AZOO_API azoo_status azoo_model_describe(const azoo_model* model, char** json_out);
/* Reads a container without rejecting spec violations; JSON array of
 * {kind, tensor, expected, actual, message}. Corruption still fails. */
AZOO_API azoo_status azoo_model_validate_file(const char* path, char** json_out, size_t* n_violations);

/* Rollouts --------------------------------------------------------------- */

/* env_id "catch"; sampling 0 = greedy argmax, 1 = softmax sampling. */
AZOO_API azoo_status azoo_rollout_record(const azoo_model* model, const char* env_id, int max_steps, int sampling,
                                         uint64_t seed, int capture_activations, azoo_rollout** out);
AZOO_API azoo_status azoo_rollout_save(const azoo_rollout* rollout, const char* dir);
AZOO_API azoo_status azoo_rollout_load(const char* dir, azoo_rollout** out);
AZOO_API void azoo_rollout_free(azoo_rollout* rollout);
AZOO_API azoo_status azoo_rollout_length(const azoo_rollout* rollout, size_t* out);
AZOO_API azoo_status azoo_rollout_final_score(const azoo_rollout* rollout, double* out);
AZOO_API azoo_status azoo_rollout_has_activations(const azoo_rollout* rollout, int* out);

/* Filter analysis -------------------------------------------------------- */

/* magnitudes[4] holds the per-frame mean |w| relative to the present frame. */
AZOO_API azoo_status azoo_temporal_profile(const azoo_model* model, double magnitudes[4], double* present_bias);
AZOO_API azoo_status azoo_filters_png(const azoo_model* model, const char* png_path);

/* Robustness ------------------------------------------------------------- */

/* kind: "observation" or "parameter"; normalization: "algorithm_best" or
 * "overall_best". Output JSON {curves, normalized, exclusions, aggregate,
 * random_baselines}. */
AZOO_API azoo_status azoo_robustness(const azoo_model* const* models, size_t n_models, const char* kind,
                                     const char* env_id, const double* sigmas, size_t n_sigmas, int episodes,
                                     int max_steps, uint64_t seed, const char* normalization, char** json_out);

/* Distinguisher ---------------------------------------------------------- */

typedef struct azoo_classify_options {
  size_t frames_per_model; /* 0 selects the default, 2501 */
  int max_epochs;          /* 0 selects 50 */
  int patience;            /* 0 selects 5 */
  int batch_size;          /* 0 selects 64 */
  double learning_rate;    /* 0 selects 1e-4 */
  uint64_t seed;
} azoo_classify_options;

/* labels[i] names the class of rollouts[i]. Output JSON {classes, confusion,
 * precision, recall, f1, mean_f1, accuracy, best_epoch, history}.
 * confusion_png may be NULL. */
AZOO_API azoo_status azoo_classify(const azoo_rollout* const* rollouts, const char* const* labels, size_t n,
                                   const azoo_classify_options* options, const char* confusion_png, char** json_out);

/* Embeddings ------------------------------------------------------------- */

typedef struct azoo_embed_options {
  size_t pca_dims;   /* 0 selects 50 */
  double perplexity; /* 0 selects 30 */
  int iterations;    /* 0 selects 3000 */
  uint64_t seed;
} azoo_embed_options;

/* Writes out_dir/embedding.json and PNG thumbnails under out_dir/frames. */
AZOO_API azoo_status azoo_embed_ram(const azoo_rollout* const* rollouts, size_t n, const azoo_embed_options* options,
                                    const char* out_dir);
/* layer: "conv1".."conv3", "fc", "head_raw" or "q"; NULL selects "fc". */
AZOO_API azoo_status azoo_embed_hidden(const azoo_model* model, const azoo_rollout* rollout, const char* layer,
                                       const azoo_embed_options* options, const char* out_dir);

/* Maximal patches -------------------------------------------------------- */

AZOO_API azoo_status azoo_receptive_field(const azoo_model* model, int layer, int* size, int* jump);
/* JSON array of {step, unit_x, unit_y, value, rect, frame_rect}; png_path may
 * be NULL. */
AZOO_API azoo_status azoo_patches(const azoo_model* model, const azoo_rollout* rollout, int layer, int filter,
                                  size_t k, const char* png_path, char** json_out);

/* Activation maximization ------------------------------------------------ */

typedef struct azoo_dream_options {
  int iterations; /* 0 selects 512 */
  double step;    /* 0 selects 0.05 */
  int jitter;     /* negative selects 4 */
  double tv_weight;
  double l1_weight;
  uint64_t seed;
  int plain_ascent; /* nonzero disables Adam */
} azoo_dream_options;

/* objective: "q:A", "head_raw:U", "fc:U", "convL:C" (channel mean) or
 * "convL:C@Y,X" (single unit). input_out, when non-NULL, receives 4*84*84
 * floats. png_path and csv_path may be NULL. */
AZOO_API azoo_status azoo_dream(const azoo_model* model, const char* objective, const azoo_dream_options* options,
                                float* input_out, const char* png_path, const char* csv_path);

/* Rendering -------------------------------------------------------------- */

/* Writes out_dir/frame_NNNNN.png for steps [first, first+count), clamped to
 * the rollout; requires a rollout recorded with activations. */
AZOO_API azoo_status azoo_render_trace(const azoo_model* model, const azoo_rollout* rollout, size_t first,
                                       size_t count, const char* out_dir);
/* cells is row-major rows×cols. */
AZOO_API azoo_status azoo_render_grid(const azoo_rollout* const* cells, size_t rows, size_t cols,
                                      const char* const* row_labels, const char* const* col_labels, size_t step,
                                      const char* png_path);

/* Static serving --------------------------------------------------------- */

/* port 0 picks a free port. The server runs on a background thread. */
AZOO_API azoo_status azoo_server_start(const char* dir, const char* host, int port, azoo_server** out);
AZOO_API int azoo_server_port(const azoo_server* server);
AZOO_API void azoo_server_stop(azoo_server* server);
/* Blocks serving until the process is terminated. */
AZOO_API azoo_status azoo_serve(const char* dir, const char* host, int port);

#ifdef __cplusplus
}
#endif

#endif
