#include "hoannotate.h"

#include "hoa/errors.hpp"
#include "hoa/gradcheck.hpp"
#include "hoa/lifter.hpp"
#include "hoa/render.hpp"
#include "hoa/seqio.hpp"
#include "hoa/stages.hpp"
#include "hoa/synth.hpp"

#include <cstdio>
#include <string>

namespace {

thread_local std::string g_last_error;

hoa_status fail(hoa_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
hoa_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return HOA_OK;
  } catch (const hoa::InvalidInput& e) {
    return fail(HOA_ERR_INVALID_INPUT, e.what());
  } catch (const hoa::OptimFailure& e) {
    return fail(HOA_ERR_OPTIM_FAILED, e.what());
  } catch (const std::exception& e) {
    return fail(HOA_ERR_INVALID_INPUT, e.what());
  }
}

hoa::StageConfig stageConfigFrom(const hoa_options* opts) {
  hoa::StageConfig config;
  if (!opts) return config;
  if (opts->config_file && opts->config_file[0]) {
    hoa::applyConfig(hoa::readConfigFile(opts->config_file), &config);
  }
  config.seed = static_cast<uint64_t>(opts->seed);
  if (opts->downscale > 0) config.downscale = opts->downscale;
  return config;
}

// Silhouette overlay dumps for visual inspection of a result.
void writeOverlays(const hoa::fs::path& out_dir, const hoa::LoadedSequence& loaded,
                   const hoa::AnnotationResult& result) {
  const int frames = static_cast<int>(result.hand.size());
  for (int t = 0; t < frames; ++t) {
    const hoa::PosedMesh hand =
        hoa::skin(loaded.models.hand, result.hand[t], result.shape);
    const hoa::PosedMesh obj = loaded.models.hasObject()
                                   ? loaded.models.posedObject(result.object[t])
                                   : hoa::PosedMesh{};
    for (int c = 0; c < loaded.seq.rig.count(); ++c) {
      const hoa::HardRaster hr =
          hoa::hardRasterize(hand, obj, loaded.seq.rig.cameras[c]);
      hoa::ImageU8 overlay(hr.labels.width, hr.labels.height, 0);
      for (size_t i = 0; i < hr.labels.data.size(); ++i) {
        const uint8_t rendered = hr.labels.data[i];
        const uint8_t observed = loaded.seq.frames[t].views[c].mask.data[i];
        // 4 levels: background, observed only, rendered only, agreement.
        overlay.data[i] = static_cast<uint8_t>(
            (observed != 0 ? 100 : 0) + (rendered != 0 ? 155 : 0));
      }
      char name[64];
      std::snprintf(name, sizeof(name), "overlay_cam%d_%06d.pgm", c, t);
      hoa::writePgm8(out_dir / name, overlay);
    }
  }
}

hoa_status annotate(const char* sequence_dir, const char* out_dir,
                    const hoa_options* opts, bool multi) {
  return guarded([&] {
    if (!sequence_dir || !out_dir) throw hoa::InvalidInput("null path argument");
    const hoa::StageConfig config = stageConfigFrom(opts);
    hoa::LoadedSequence loaded = hoa::loadSequence(sequence_dir);
    if (loaded.object_init.empty() && loaded.models.hasObject())
      throw hoa::InvalidInput(std::string(sequence_dir) +
                              ": init_object.csv is required for object scenes");
    hoa::AnnotationResult result;
    if (multi) {
      result = hoa::pipelineMulticam(loaded.seq, loaded.models, config,
                                     loaded.object_init, loaded.shape);
    } else {
      result = hoa::pipelineSinglecam(loaded.seq, loaded.models, config,
                                      loaded.object_init, loaded.shape);
    }

    const hoa::fs::path out(out_dir);
    if (opts && opts->gt_dir && opts->gt_dir[0]) {
      hoa::AnnotationResult gt = hoa::loadResult(opts->gt_dir);
      const hoa::Metrics metrics = hoa::evaluate(result, gt, loaded.models);
      hoa::saveResult(out, result, &metrics);
    } else if (loaded.gt) {
      const hoa::Metrics metrics = hoa::evaluate(result, *loaded.gt, loaded.models);
      hoa::saveResult(out, result, &metrics);
    } else {
      hoa::saveResult(out, result);
    }
    if (opts && opts->write_overlays) writeOverlays(out, loaded, result);
    if (!result.converged)
      throw hoa::OptimFailure("pipeline failed at stage: " + result.failure_stage);
  });
}

}  // namespace

extern "C" {

const char* hoa_version(void) { return "0.1.0"; }

const char* hoa_last_error(void) { return g_last_error.c_str(); }

void hoa_options_init(hoa_options* opts) {
  if (!opts) return;
  opts->seed = 0;
  opts->downscale = 4;
  opts->config_file = nullptr;
  opts->gt_dir = nullptr;
  opts->write_overlays = 0;
}

hoa_status hoa_annotate_multi(const char* sequence_dir, const char* out_dir,
                              const hoa_options* opts) {
  return annotate(sequence_dir, out_dir, opts, true);
}

hoa_status hoa_annotate_single(const char* sequence_dir, const char* out_dir,
                               const hoa_options* opts) {
  return annotate(sequence_dir, out_dir, opts, false);
}

hoa_status hoa_fit_hand(const char* keypoints_csv, const char* calib_file,
                        const char* hand_model_file, const char* out_pose_csv,
                        const char* out_shape_csv, const hoa_options* opts) {
  return guarded([&] {
    if (!keypoints_csv || !calib_file || !hand_model_file || !out_pose_csv)
      throw hoa::InvalidInput("null path argument");
    const hoa::MatX rows = hoa::readCsvMatrix(keypoints_csv, 3);
    if (rows.rows() != 41)
      throw hoa::InvalidInput(std::string(keypoints_csv) +
                              ": expected 21 keypoint rows + 20 direction rows");
    hoa::KeypointPrediction pred;
    pred.keypoints = rows.topRows(21);
    pred.directions = rows.bottomRows(20);
    for (int i = 0; i < 20; ++i) {
      const double n = pred.directions.row(i).norm();
      if (n > 1e-9) pred.directions.row(i) /= n;
    }
    const hoa::CameraRig rig = hoa::loadCalib(calib_file);
    pred.camera = rig.cameras[0];
    const hoa::HandModel model = hoa::loadHandModel(hand_model_file);

    hoa::EnergyWeights weights;
    if (opts && opts->config_file && opts->config_file[0]) {
      hoa::StageConfig sc;
      hoa::applyConfig(hoa::readConfigFile(opts->config_file), &sc);
      weights = sc.weights;
    }
    const hoa::LifterFit fit = hoa::fitHand(pred, model, weights);
    hoa::writeCsvRow(out_pose_csv, fit.pose.toVector());
    if (out_shape_csv && out_shape_csv[0]) {
      hoa::writeCsvRow(out_shape_csv, fit.shape.beta);
    }
    if (!fit.converged) throw hoa::OptimFailure("hand fit did not improve on its initialization");
  });
}

hoa_status hoa_calibrate_shape(const char* sequence_dir, const char* out_dir,
                               const hoa_options* opts) {
  return guarded([&] {
    if (!sequence_dir || !out_dir) throw hoa::InvalidInput("null path argument");
    const hoa::StageConfig config = stageConfigFrom(opts);
    const hoa::LoadedSequence loaded = hoa::loadSequence(sequence_dir);
    const hoa::ShapeEstimate est =
        hoa::estimateShape(loaded.seq, loaded.models.hand, config);
    hoa::fs::create_directories(out_dir);
    hoa::writeCsvRow(hoa::fs::path(out_dir) / "shape.csv", est.shape.beta);
    const int frames = static_cast<int>(est.poses.size());
    for (int t = 0; t < frames; ++t) {
      char name[64];
      std::snprintf(name, sizeof(name), "hand_pose_%06d.csv", t);
      hoa::writeCsvRow(hoa::fs::path(out_dir) / name, est.poses[t].toVector());
    }
  });
}

hoa_status hoa_synth(const char* out_dir, const hoa_options* opts) {
  return guarded([&] {
    if (!out_dir) throw hoa::InvalidInput("null path argument");
    hoa::SynthConfig config;
    if (opts && opts->config_file && opts->config_file[0]) {
      hoa::applyConfig(hoa::readConfigFile(opts->config_file), &config);
    }
    if (opts) config.seed = static_cast<uint64_t>(opts->seed);
    const hoa::SynthResult synth = hoa::generate(config);
    hoa::saveSequence(out_dir, synth);
  });
}

hoa_status hoa_check_grad(long long seed, int verbose) {
  return guarded([&] {
    const hoa::GradCheckReport report =
        hoa::runGradientChecks(static_cast<uint64_t>(seed));
    if (verbose) {
      for (const auto& e : report.entries) {
        std::printf("%-12s trial %d  rel_err %.3e  tol %.0e  %s\n", e.name.c_str(),
                    e.trial, e.rel_err, e.tolerance, e.pass ? "ok" : "FAIL");
      }
      std::printf("gradient checks finished in %.1f s\n", report.seconds);
    }
    if (!report.allPass())
      throw hoa::OptimFailure("gradient checks failed");
  });
}

hoa_status hoa_eval(const char* result_dir, const char* gt_dir,
                    const char* sequence_dir) {
  return guarded([&] {
    if (!result_dir || !gt_dir || !sequence_dir)
      throw hoa::InvalidInput("null path argument");
    const hoa::AnnotationResult result = hoa::loadResult(result_dir);
    const hoa::AnnotationResult gt = hoa::loadResult(gt_dir);
    const hoa::LoadedSequence loaded = hoa::loadSequence(sequence_dir);
    const hoa::Metrics metrics = hoa::evaluate(result, gt, loaded.models);
    hoa::saveMetricsCsv(hoa::fs::path(result_dir) / "metrics.csv", metrics);
    std::printf("mean joint error: %.4f m\n", metrics.mean.joint_err);
    std::printf("mean hand mesh error: %.4f m\n", metrics.mean.hand_mesh_err);
    std::printf("mean object mesh error: %.4f m\n", metrics.mean.obj_mesh_err);
    std::printf("F@5mm: %.3f  F@15mm: %.3f\n", metrics.mean.f5, metrics.mean.f15);
  });
}

struct hoa_result {
  hoa::AnnotationResult data;
};

hoa_status hoa_result_load(const char* result_dir, hoa_result** out) {
  return guarded([&] {
    if (!result_dir || !out) throw hoa::InvalidInput("null argument");
    auto* handle = new hoa_result{hoa::loadResult(result_dir)};
    *out = handle;
  });
}

int hoa_result_frame_count(const hoa_result* result) {
  return result ? static_cast<int>(result->data.hand.size()) : 0;
}

hoa_status hoa_result_hand_pose(const hoa_result* result, int frame,
                                double out_pose[51]) {
  return guarded([&] {
    if (!result || !out_pose) throw hoa::InvalidInput("null argument");
    if (frame < 0 || frame >= static_cast<int>(result->data.hand.size()))
      throw hoa::InvalidInput("frame index out of range");
    const hoa::VecX v = result->data.hand[frame].toVector();
    for (int i = 0; i < 51; ++i) out_pose[i] = v[i];
  });
}

hoa_status hoa_result_object_pose(const hoa_result* result, int frame,
                                  double out_pose[6]) {
  return guarded([&] {
    if (!result || !out_pose) throw hoa::InvalidInput("null argument");
    if (frame < 0 || frame >= static_cast<int>(result->data.object.size()))
      throw hoa::InvalidInput("frame index out of range");
    const hoa::VecX v = result->data.object[frame].toVector();
    for (int i = 0; i < 6; ++i) out_pose[i] = v[i];
  });
}

hoa_status hoa_result_shape(const hoa_result* result, double out_shape[10]) {
  return guarded([&] {
    if (!result || !out_shape) throw hoa::InvalidInput("null argument");
    for (int i = 0; i < 10; ++i) out_shape[i] = result->data.shape.beta[i];
  });
}

void hoa_result_free(hoa_result* result) { delete result; }

}  // extern "C"
