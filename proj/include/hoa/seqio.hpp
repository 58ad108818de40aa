#pragma once

#include "hoa/evaluator.hpp"
#include "hoa/stages.hpp"
#include "hoa/synth.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hoa {

namespace fs = std::filesystem;

// ---- Image files ----
// 8-bit binary PGM. Mask files store the raw labels {0,1,2}; debug dumps
// scale to 0..255.
void writePgm8(const fs::path& path, const ImageU8& image, int maxval = 255);
ImageU8 readPgm8(const fs::path& path);

// 16-bit PGM with the metric scale recorded in a header comment
// ("# depth_scale <meters-per-unit>"). Zero means invalid.
void writeDepthPgm(const fs::path& path, const ImageD& depth_meters,
                   double depth_scale);
ImageD readDepthPgm(const fs::path& path, double* depth_scale = nullptr);

// Renderer debug dump: silhouettes as 8-bit (0..255), depth as 16-bit.
void dumpRenderDebug(const fs::path& prefix, const RenderOutput& render,
                     double depth_scale = 1e-4);

// ---- CSV ----
void writeCsvRow(const fs::path& path, const VecX& values);
VecX readCsvRow(const fs::path& path, int expected = -1);
void writeCsvMatrix(const fs::path& path, const MatX& values);
MatX readCsvMatrix(const fs::path& path, int expected_cols = -1);

// ---- Model / mesh files ----
void saveHandModel(const fs::path& path, const HandModel& model);
HandModel loadHandModel(const fs::path& path);
void saveObj(const fs::path& path, const TriMesh& mesh);
TriMesh loadObj(const fs::path& path);

// ---- Calibration ----
void saveCalib(const fs::path& path, const CameraRig& rig);
CameraRig loadCalib(const fs::path& path);

// ---- Flat key=value config ----
std::map<std::string, std::string> readConfigFile(const fs::path& path);
// Applies recognized keys onto the config; unknown keys raise InvalidInput.
void applyConfig(const std::map<std::string, std::string>& kv, StageConfig* config);
void applyConfig(const std::map<std::string, std::string>& kv, SynthConfig* config);

// ---- Sequence directory ----
struct LoadedSequence {
  SequenceData seq;
  SceneModels models;
  ShapeParams shape;  // from shape.csv when present
  std::vector<ObjectPose> object_init;       // may be empty
  std::optional<AnnotationResult> gt;        // from gt/ when present
};

// Layout: calib.txt, hand.model, object.obj (optional), per-camera
// subdirectories cam0..camN with mask_%06d.pgm, depth_%06d.pgm,
// kps_%06d.csv, optional init_object.csv (one row or one per frame),
// optional shape.csv and gt/.
LoadedSequence loadSequence(const fs::path& root);
void saveSequence(const fs::path& root, const SynthResult& synth);

// ---- Results ----
void saveResult(const fs::path& out_dir, const AnnotationResult& result,
                const Metrics* metrics = nullptr);
AnnotationResult loadResult(const fs::path& dir);
void saveMetricsCsv(const fs::path& path, const Metrics& metrics);

}  // namespace hoa
