/* Public C interface of the hand+object annotation engine.
 *
 * All functions return hoa_status; on failure hoa_last_error() carries a
 * human-readable message for the calling thread. Paths are UTF-8. Handles
 * are opaque and freed with their matching *_free function.
 */
#ifndef HOANNOTATE_H
#define HOANNOTATE_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define HOA_API __declspec(dllexport)
#else
#define HOA_API __attribute__((visibility("default")))
#endif

typedef enum hoa_status {
  HOA_OK = 0,
  HOA_ERR_INVALID_INPUT = 2, /* bad file, argument, or malformed data */
  HOA_ERR_OPTIM_FAILED = 3   /* optimization could not proceed */
} hoa_status;

HOA_API const char* hoa_version(void);

/* Message for the most recent failing call on this thread. */
HOA_API const char* hoa_last_error(void);

typedef struct hoa_options {
  long long seed;          /* RNG seed for all stages (default 0) */
  int downscale;           /* observation downscale during optimization */
  const char* config_file; /* optional key=value config, NULL for defaults */
  const char* gt_dir;      /* optional ground-truth dir for metrics, may be NULL */
  int write_overlays;      /* dump silhouette overlays next to the result */
} hoa_options;

/* Fills an options struct with the defaults (seed 0, downscale 4). */
HOA_API void hoa_options_init(hoa_options* opts);

/* Multi-camera annotation of a sequence directory. Writes per-frame pose
 * CSVs, the energy log, and metrics when ground truth is available. */
HOA_API hoa_status hoa_annotate_multi(const char* sequence_dir,
                                      const char* out_dir,
                                      const hoa_options* opts);

/* Single-camera (rigid-grasp) annotation. */
HOA_API hoa_status hoa_annotate_single(const char* sequence_dir,
                                       const char* out_dir,
                                       const hoa_options* opts);

/* Single-image hand fit from a keypoint CSV (21 rows "u,v,conf" then 20
 * rows "dx,dy,dz"), a calibration file (camera 0 is used), and a hand
 * model file. Writes one 51-float pose row and one 10-float shape row. */
HOA_API hoa_status hoa_fit_hand(const char* keypoints_csv, const char* calib_file,
                                const char* hand_model_file,
                                const char* out_pose_csv,
                                const char* out_shape_csv,
                                const hoa_options* opts);

/* Shape calibration on a hand-only sequence; writes shape.csv in out_dir. */
HOA_API hoa_status hoa_calibrate_shape(const char* sequence_dir,
                                       const char* out_dir,
                                       const hoa_options* opts);

/* Synthetic sequence generation into out_dir (config file selects frames,
 * cameras, noise, trajectory; NULL for the defaults). */
HOA_API hoa_status hoa_synth(const char* out_dir, const hoa_options* opts);

/* Finite-difference gradient verification. Returns HOA_OK when every term
 * passes; prints one line per check to stdout when verbose is nonzero. */
HOA_API hoa_status hoa_check_grad(long long seed, int verbose);

/* Metrics of a result directory against a ground-truth directory, using
 * the models of the given sequence. Writes metrics.csv into result_dir. */
HOA_API hoa_status hoa_eval(const char* result_dir, const char* gt_dir,
                            const char* sequence_dir);

/* ---- Result access ---- */
typedef struct hoa_result hoa_result;

HOA_API hoa_status hoa_result_load(const char* result_dir, hoa_result** out);
HOA_API int hoa_result_frame_count(const hoa_result* result);
/* 51 doubles: 45 joint angles, 3 global rotation, 3 translation. */
HOA_API hoa_status hoa_result_hand_pose(const hoa_result* result, int frame,
                                        double out_pose[51]);
/* 6 doubles: axis-angle rotation, translation. */
HOA_API hoa_status hoa_result_object_pose(const hoa_result* result, int frame,
                                          double out_pose[6]);
/* 10 shape coefficients. */
HOA_API hoa_status hoa_result_shape(const hoa_result* result, double out_shape[10]);
HOA_API void hoa_result_free(hoa_result* result);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* HOANNOTATE_H */
