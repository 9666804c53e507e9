/* C interface to the corrdistill library.
 *
 * Every fallible call returns a cd_status. On failure a message describing
 * the last error on the calling thread is available from cd_last_error().
 * Strings returned through char** out-parameters are heap allocated and must
 * be released with cd_string_free(). Handles are released with their own
 * *_free function; passing NULL to a free function is a no-op.
 */
#ifndef CORRDISTILL_H
#define CORRDISTILL_H

#include <stddef.h>
#include <stdint.h>

#if defined(CORRDISTILL_BUILDING_LIBRARY)
#define CD_API __attribute__((visibility("default")))
#else
#define CD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cd_status {
  CD_OK = 0,
  CD_INVALID_ARGUMENT = 1,
  CD_DIMENSION = 2,
  CD_IO = 3,
  CD_BAD_MAGIC = 4,
  CD_BAD_DTYPE = 5,
  CD_SIZE_MISMATCH = 6,
  CD_NON_FINITE = 7,
  CD_CONFIGURATION = 8,
  CD_DEGENERATE_TARGET = 9,
  CD_DEGENERATE_INPUT = 10,
  CD_RESOURCE = 11,
  CD_CONTRACT = 12,
  CD_PARSE = 13,
  CD_INTERNAL = 14
} cd_status;

typedef struct cd_dataset cd_dataset;
typedef struct cd_model cd_model;

CD_API const char* cd_version(void);
CD_API const char* cd_status_name(cd_status status);
/* Message of the most recent failure on this thread ("" if none). */
CD_API const char* cd_last_error(void);
CD_API void cd_string_free(char* str);

/* ---- feature archives ---- */

CD_API cd_status cd_archive_write(const char* path, const float* data, size_t channels,
                                  size_t height, size_t width);
/* Reads the header into channels/height/width. When buffer is non-NULL and
 * capacity >= C*H*W, also copies the values (channel-major). */
CD_API cd_status cd_archive_read(const char* path, size_t* channels, size_t* height,
                                 size_t* width, float* buffer, size_t capacity);

/* ---- datasets ---- */

CD_API cd_status cd_dataset_load(const char* manifest_path, cd_dataset** out);
CD_API cd_status cd_dataset_synthetic(size_t n_images, size_t grid, size_t n_classes,
                                      size_t channels, double noise_sigma, uint64_t seed,
                                      cd_dataset** out);
/* Writes <dir>/<id>.dfa, <id>.pgm and manifest.json. */
CD_API cd_status cd_dataset_save(const cd_dataset* dataset, const char* dir);
CD_API size_t cd_dataset_size(const cd_dataset* dataset);
CD_API void cd_dataset_free(cd_dataset* dataset);

/* ---- training and evaluation ---- */

/* config_json may be NULL (all defaults); out_dir may be NULL (nothing written).
 * summary_json may be NULL. */
CD_API cd_status cd_train(const char* config_json, const cd_dataset* dataset, const char* out_dir,
                          cd_model** out, char** summary_json);
CD_API cd_status cd_model_load(const char* checkpoint_dir, cd_model** out);
CD_API cd_status cd_model_save(const cd_model* model, const char* checkpoint_dir);
CD_API size_t cd_model_code_dim(const cd_model* model);
CD_API void cd_model_free(cd_model* model);

/* Metrics as JSON. When out_dir is non-NULL, also writes confusion.csv and one
 * <id>.pred.pgm per labelled item there. When crf_manifest is non-NULL, the
 * manifest's source images (PPM) are used for CRF refinement of the cluster
 * predictions. */
CD_API cd_status cd_evaluate(const cd_model* model, const cd_dataset* dataset,
                             const char* crf_manifest, const char* out_dir, char** report_json);

/* ---- diagnostics ---- */

/* Precision/recall of raw feature correspondence against label co-occurrence.
 * self_pairs != 0 pairs each image with itself, otherwise all ordered pairs.
 * JSON: {"average_precision", "thresholds", "precision", "recall"}. */
CD_API cd_status cd_diagnose_pr(const cd_dataset* dataset, int self_pairs, char** result_json);

/* Within-image cosine histogram of codes (model non-NULL) or raw features.
 * JSON: {"bin_edges", "counts", "mass_high", "mass_zero"}. */
CD_API cd_status cd_diagnose_hist(const cd_model* model, const cd_dataset* dataset, size_t n_pairs,
                                  uint64_t seed, char** result_json);

/* Five-crops the dataset when it carries no crop provenance, builds the KNN
 * index and counts same-parent neighbours. JSON: {"k", "entries", "counts"}. */
CD_API cd_status cd_knn_stats(const cd_dataset* dataset, size_t k_nn, char** result_json);

/* ---- CRF ---- */

/* Mean-field refinement of a unary archive (classes x H x W log-potentials)
 * against a PPM image. Writes labels as PGM. crf_json may be NULL. */
CD_API cd_status cd_crf_refine(const char* image_ppm, const char* unary_dfa, const char* crf_json,
                               const char* labels_pgm);

/* Unsupervised Potts solve on a PPM image. continuous != 0 solves for unit
 * vectors of size dim, else a dim-way discrete labelling. Writes the labels as
 * PGM and the top-3 code dimensions as PPM (either path may be NULL).
 * JSON: {"energy": [...], "labels": n_distinct}. */
CD_API cd_status cd_potts_solve(const char* image_ppm, int continuous, size_t dim, size_t steps,
                                uint64_t seed, const char* labels_pgm, const char* codes_ppm,
                                char** result_json);

/* Writes a two-region demo image (PPM) and a noisy unary archive to out_dir. */
CD_API cd_status cd_make_crf_demo(const char* out_dir, size_t size, double label_noise,
                                  uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* CORRDISTILL_H */
