/* C interface to the spectral unmixing library.
 *
 * Objects are opaque handles released with the matching *_free function.
 * Every call returns an spmx_status; on failure spmx_last_error() returns a
 * thread-local message describing the most recent error on this thread.
 * Strings returned through char** are heap-allocated and must be released
 * with spmx_string_free. JSON arguments are UTF-8 documents; NULL means
 * "use defaults".
 */
#ifndef SPMX_H
#define SPMX_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SPMX_API __declspec(dllexport)
#else
#define SPMX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spmx_status {
  SPMX_OK = 0,
  SPMX_ERR_CONFIG = 1,   /* invalid argument, config, spec or spectrum */
  SPMX_ERR_IO = 2,       /* file access or container format */
  SPMX_ERR_SHAPE = 3,    /* incompatible shapes */
  SPMX_ERR_DATA = 4,     /* data that a metric or solver cannot handle */
  SPMX_ERR_INTERNAL = 5
} spmx_status;

typedef struct spmx_image spmx_image;   /* spectral image, L x Z x Y x X */
typedef struct spmx_cmap spmx_cmap;     /* concentration map, F x Z x Y x X */
typedef struct spmx_mixing spmx_mixing; /* L x F mixing matrix with its band layout */

SPMX_API const char* spmx_version(void);
SPMX_API const char* spmx_last_error(void);
SPMX_API const char* spmx_status_name(spmx_status status);
SPMX_API void spmx_string_free(char* s);

/* Worker cap for data-parallel kernels; 0 restores the default. */
SPMX_API void spmx_set_threads(size_t n);

/* Mixing matrices. */
SPMX_API spmx_status spmx_mixing_read_csv(const char* path, int renormalize, spmx_mixing** out);
SPMX_API spmx_status spmx_mixing_write_csv(const spmx_mixing* m, const char* path);
/* fluorophores_json: array of built-in names or spectrum CSV paths.
 * layout_json: {"bands": [[lo, hi], ...]}; NULL gives 32 bands over 440-696 nm. */
SPMX_API spmx_status spmx_mixing_build(const char* fluorophores_json, const char* spectra_dir,
                                       const char* base_dir, const char* layout_json,
                                       spmx_mixing** out);
SPMX_API size_t spmx_mixing_bands(const spmx_mixing* m);
SPMX_API size_t spmx_mixing_fluorophores(const spmx_mixing* m);
SPMX_API double spmx_mixing_get(const spmx_mixing* m, size_t band, size_t fluorophore);
/* ConditioningReport as JSON. */
SPMX_API spmx_status spmx_analyze(const spmx_mixing* m, char** report_json);
SPMX_API void spmx_mixing_free(spmx_mixing* m);

/* Spectral images. dims receives {L, Z, Y, X}. */
SPMX_API spmx_status spmx_image_read(const char* path, spmx_image** out);
/* dtype: "f32" or "u16". */
SPMX_API spmx_status spmx_image_write(const spmx_image* s, const char* path, const char* dtype);
SPMX_API void spmx_image_dims(const spmx_image* s, size_t dims[4]);
SPMX_API const double* spmx_image_data(const spmx_image* s);
SPMX_API void spmx_image_free(spmx_image* s);

/* Concentration maps. dims receives {F, Z, Y, X}. */
SPMX_API spmx_status spmx_cmap_read(const char* path, spmx_cmap** out);
SPMX_API spmx_status spmx_cmap_write(const spmx_cmap* u, const char* path);
SPMX_API void spmx_cmap_dims(const spmx_cmap* u, size_t dims[4]);
SPMX_API const double* spmx_cmap_data(const spmx_cmap* u);
SPMX_API void spmx_cmap_free(spmx_cmap* u);

/* Simulation. */
SPMX_API spmx_status spmx_phantom(const char* phantom_json, spmx_cmap** out);
SPMX_API spmx_status spmx_simulate(const spmx_cmap* u, const spmx_mixing* m,
                                   const char* acquisition_json, spmx_image** out);
SPMX_API spmx_status spmx_mix_forward(const spmx_cmap* u, const spmx_mixing* m,
                                      spmx_image** out);

/* Unmixing. Offset and gain recorded by the simulator are removed first.
 * meta_json (optional) receives the solver metadata. */
SPMX_API int spmx_method_valid(const char* method);
SPMX_API spmx_status spmx_unmix(const char* method, const spmx_image* s, const spmx_mixing* m,
                                const char* solver_json, spmx_cmap** out, char** meta_json);

/* Metric report as JSON and as report CSV rows. */
SPMX_API spmx_status spmx_evaluate(const spmx_cmap* gt, const spmx_cmap* est,
                                   const char* dataset, const char* method,
                                   char** report_json, char** report_csv);

/* Runs a sweep and writes table_<axis>.csv/.json and summary.json to out_dir.
 * Relative spectrum paths in the spec resolve against base_dir. */
SPMX_API spmx_status spmx_bench(const char* spec_json, const char* base_dir, const char* out_dir,
                                char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* SPMX_H */
