/*
 * bcrnet: curvilinear landmark detection via Bezier curve proposals and
 * hierarchical refinement.
 *
 * C API over the shared library. All functions return a status code
 * (bcr_status); on failure bcr_last_error() holds a human-readable message
 * for the calling thread. Objects are opaque handles released with their
 * matching *_free function. Strings returned through char** out-parameters
 * are heap-allocated and must be released with bcr_string_free().
 */
#ifndef BCRNET_H
#define BCRNET_H

#include <stdint.h>

#if defined(_WIN32)
#define BCR_API __declspec(dllexport)
#else
#define BCR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct bcr_dataset bcr_dataset;
typedef struct bcr_model bcr_model;

/* Status codes double as process exit classes: usage errors cover bad
 * configuration, malformed or missing input files; runtime errors cover
 * failures during computation. */
typedef enum bcr_status {
  BCR_OK = 0,
  BCR_ERR_RUNTIME = 1,
  BCR_ERR_USAGE = 2
} bcr_status;

BCR_API const char* bcr_version(void);

/* Message of the most recent failure on this thread ("" if none). */
BCR_API const char* bcr_last_error(void);

BCR_API void bcr_string_free(char* s);

/* ---- datasets ---- */

/* Procedural dataset; height/width must be divisible by 32. */
BCR_API int bcr_dataset_synth(uint64_t seed, int count, int height, int width,
                              bcr_dataset** out);

/* Loads annotations.json plus the images it references. categories_csv may
 * be NULL for the default "ridge,ligament,silhouette". */
BCR_API int bcr_dataset_load(const char* annotations_json, const char* categories_csv,
                             bcr_dataset** out);

/* Writes annotations.json, one RGB PNG and one depth PNG per image. */
BCR_API int bcr_dataset_save(const bcr_dataset* ds, const char* dir);

BCR_API int bcr_dataset_count(const bcr_dataset* ds, int* out_count);

BCR_API void bcr_dataset_free(bcr_dataset* ds);

/* ---- models ---- */

/* config_text: key=value lines ('#' comments allowed); unknown keys are
 * rejected by name. NULL or "" uses the defaults. */
BCR_API int bcr_model_create(const char* config_text, bcr_model** out);

BCR_API int bcr_model_load(const char* checkpoint_path, bcr_model** out);

BCR_API int bcr_model_save(const bcr_model* model, const char* checkpoint_path);

/* Canonical serialization of the model's effective configuration. */
BCR_API int bcr_model_config(const bcr_model* model, char** out_config_text);

/* Re-applies run settings (epochs, learning rate, ...) on an existing model.
 * Keys that would change the architecture must keep their current values. */
BCR_API int bcr_model_set_config(bcr_model* model, const char* config_text);

BCR_API void bcr_model_free(bcr_model* model);

/* ---- pipeline ---- */

typedef void (*bcr_epoch_callback)(int epoch, double lambda_d, double total_loss, void* user);

/* Trains from the model's current epoch up to its configured epoch count,
 * writing the checkpoint after every epoch and one tab-separated metric-log
 * line per epoch. checkpoint_path/log_path may be NULL to skip persistence.
 */
BCR_API int bcr_train(bcr_model* model, bcr_dataset* ds, const char* checkpoint_path,
                      const char* log_path, bcr_epoch_callback cb, void* user);

/* Detection metrics over the dataset (threshold < 0 uses the configured
 * one). Returns a human-readable table and machine-readable key=value text.
 */
BCR_API int bcr_evaluate(bcr_model* model, bcr_dataset* ds, double threshold, char** out_table,
                         char** out_key_values);

/* Single-image inference. depth_png NULL looks for "<image>_depth.png" and
 * zero-fills when absent. The JSON carries all four prediction stages plus
 * the thresholded final curves. */
BCR_API int bcr_infer(bcr_model* model, const char* image_png, const char* depth_png,
                      double threshold, char** out_curves_json);

/* Vector overlay (SVG): input image, optional ground truth from an
 * annotations file (entry annotation_index), initial and final curves, and
 * the dilated tolerance band. */
BCR_API int bcr_render(bcr_model* model, const char* image_png, const char* depth_png,
                       const char* annotations_json, int annotation_index, double threshold,
                       const char* svg_out_path);

#ifdef __cplusplus
}
#endif

#endif /* BCRNET_H */
