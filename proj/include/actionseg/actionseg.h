/* C interface to libactionseg.
 *
 * Every call returns an as_status. On failure the message is available from
 * as_last_error() on the same thread until the next failing call. Handles are
 * opaque and owned by the caller; release them with the matching *_free.
 */
#ifndef ACTIONSEG_H
#define ACTIONSEG_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define AS_API __declspec(dllexport)
#else
#define AS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum as_status {
  AS_OK = 0,
  AS_ERR_USAGE = 1,    /* bad arguments or configuration */
  AS_ERR_DATA = 2,     /* unreadable, malformed or inconsistent input */
  AS_ERR_INTERNAL = 3
} as_status;

typedef struct as_config as_config;
typedef struct as_sequence as_sequence;
typedef struct as_features as_features;
typedef struct as_model as_model;
typedef struct as_bank as_bank;
typedef struct as_segmentation as_segmentation;

AS_API const char* as_version(void);
AS_API const char* as_last_error(void);
AS_API void as_string_free(char* s);

/* Pipeline settings. Keys as in the configuration file. */
AS_API as_status as_config_new(as_config** out);
AS_API void as_config_free(as_config* cfg);
AS_API as_status as_config_set(as_config* cfg, const char* key, const char* value);
AS_API as_status as_config_load(as_config* cfg, const char* path);
AS_API as_status as_config_validate(const as_config* cfg);
AS_API as_status as_config_to_text(const as_config* cfg, char** text);

/* Grayscale sequences. format: NULL or "" to detect, "pgm-dir" or "y4m". */
AS_API as_status as_sequence_load(const char* path, const char* format, as_sequence** out);
AS_API void as_sequence_free(as_sequence* seq);
AS_API size_t as_sequence_frame_count(const as_sequence* seq);
AS_API int as_sequence_width(const as_sequence* seq);
AS_API int as_sequence_height(const as_sequence* seq);
/* Copies width*height luma values of frame i (row-major) into dst. */
AS_API as_status as_sequence_frame(const as_sequence* seq, size_t i, double* dst, size_t dst_len);

/* Horn-Schunck flow from frame t-1 to frame t, written as <stem>.raw + <stem>.json. */
AS_API as_status as_flow_dump(const as_config* cfg, const as_sequence* seq, size_t t, const char* stem);

/* Per-frame 14-dimensional descriptors of the retained frames. */
AS_API as_status as_features_extract(const as_config* cfg, const as_sequence* seq, as_features** out);
AS_API void as_features_free(as_features* f);
AS_API size_t as_features_frame_count(const as_features* f);
AS_API int as_features_frame_index(const as_features* f, size_t i);
AS_API size_t as_features_vector_count(const as_features* f, size_t i);
/* Copies vector_count(i) * 14 values of retained frame i into dst. */
AS_API as_status as_features_vectors(const as_features* f, size_t i, double* dst, size_t dst_len);

/* Single mixture models. */
AS_API as_status as_model_load(const char* path, as_model** out);
AS_API as_status as_model_save(const as_model* m, const char* path);
AS_API void as_model_free(as_model* m);
AS_API size_t as_model_dim(const as_model* m);
AS_API size_t as_model_components(const as_model* m);
AS_API as_status as_model_log_pdf(const as_model* m, const double* x, size_t dim, double* out);

/* A directory of models written by as_cmd_train. */
AS_API as_status as_bank_load(const char* dir, as_bank** out);
AS_API void as_bank_free(as_bank* b);
AS_API size_t as_bank_action_count(const as_bank* b);
/* Name of action ordinal a (1-based); NULL when out of range. Owned by the bank. */
AS_API const char* as_bank_action_name(const as_bank* b, int a);

/* Segments a video; n_frames is the original frame count (0: infer). */
AS_API as_status as_segment(const as_config* cfg, const as_bank* b, const as_features* f, size_t n_frames,
                            as_segmentation** out);
AS_API void as_segmentation_free(as_segmentation* s);
AS_API size_t as_segmentation_frame_count(const as_segmentation* s);
/* Action ordinal of frame t, 0 when out of range. */
AS_API int as_segmentation_frame_label(const as_segmentation* s, size_t t);
AS_API size_t as_segmentation_segment_count(const as_segmentation* s);
AS_API as_status as_segmentation_segment(const as_segmentation* s, size_t i, int* start_frame, int* end_frame,
                                         int* action);
AS_API as_status as_segmentation_csv(const as_segmentation* s, const as_bank* b, char** csv);

/* Whole subcommands, as run by the actionseg tool. */
AS_API as_status as_cmd_train(const as_config* cfg, const char* manifest, const char* out_dir, size_t* model_files);
AS_API as_status as_cmd_segment(const as_config* cfg, const char* models_dir, const char* video,
                                const char* out_csv, const char* scores_json);
/* report_text (optional) receives a human-readable summary; free with as_string_free. */
AS_API as_status as_cmd_eval(const as_config* cfg, const char* models_dir, const char* manifest, const char* out_json,
                             const char* pred_dir, char** report_text);
AS_API as_status as_cmd_synth(const char* spec_path, uint64_t seed, const char* out_dir, size_t* instances,
                              size_t* test_videos);

#ifdef __cplusplus
}
#endif

#endif
