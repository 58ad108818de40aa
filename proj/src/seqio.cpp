#include "hoa/seqio.hpp"

#include "hoa/errors.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hoa {
namespace {

std::string formatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void fileError(const fs::path& path, const std::string& what) {
  throw InvalidInput(path.string() + ": " + what);
}

std::ifstream openIn(const fs::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) fileError(path, "cannot open for reading");
  return in;
}

std::ofstream openOut(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) fileError(path, "cannot open for writing");
  return out;
}

// PGM header: magic, optional comments, width height, maxval.
struct PgmHeader {
  int width = 0, height = 0, maxval = 0;
  std::vector<std::string> comments;
};

PgmHeader readPgmHeader(std::istream& in, const fs::path& path) {
  std::string magic;
  in >> magic;
  if (magic != "P5") fileError(path, "not a binary PGM (P5)");
  PgmHeader h;
  int fields = 0;
  while (fields < 3) {
    in >> std::ws;
    if (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      h.comments.push_back(line);
      continue;
    }
    int v;
    if (!(in >> v)) fileError(path, "truncated PGM header");
    if (fields == 0) h.width = v;
    else if (fields == 1) h.height = v;
    else h.maxval = v;
    ++fields;
  }
  in.get();  // single whitespace after maxval
  if (h.width <= 0 || h.height <= 0) fileError(path, "bad PGM dimensions");
  return h;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void writePgm8(const fs::path& path, const ImageU8& image, int maxval) {
  auto out = openOut(path, true);
  out << "P5\n" << image.width << " " << image.height << "\n" << maxval << "\n";
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
}

ImageU8 readPgm8(const fs::path& path) {
  auto in = openIn(path, true);
  const PgmHeader h = readPgmHeader(in, path);
  if (h.maxval > 255) fileError(path, "expected an 8-bit PGM");
  ImageU8 img(h.width, h.height);
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    fileError(path, "truncated PGM pixel data");
  return img;
}

void writeDepthPgm(const fs::path& path, const ImageD& depth_meters,
                   double depth_scale) {
  auto out = openOut(path, true);
  out << "P5\n# depth_scale " << formatDouble(depth_scale) << "\n"
      << depth_meters.width << " " << depth_meters.height << "\n65535\n";
  std::vector<uint8_t> buf(depth_meters.data.size() * 2);
  for (size_t i = 0; i < depth_meters.data.size(); ++i) {
    const double d = depth_meters.data[i];
    uint16_t raw = 0;
    if (std::isfinite(d) && d > 0) {
      raw = static_cast<uint16_t>(
          std::clamp(std::llround(d / depth_scale), 0LL, 65535LL));
    }
    buf[2 * i] = static_cast<uint8_t>(raw >> 8);  // big-endian per PGM spec
    buf[2 * i + 1] = static_cast<uint8_t>(raw & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

ImageD readDepthPgm(const fs::path& path, double* depth_scale) {
  auto in = openIn(path, true);
  const PgmHeader h = readPgmHeader(in, path);
  if (h.maxval != 65535) fileError(path, "expected a 16-bit depth PGM");
  double scale = 1e-4;
  bool have_scale = false;
  for (const std::string& c : h.comments) {
    const auto pos = c.find("depth_scale");
    if (pos != std::string::npos) {
      scale = std::strtod(c.c_str() + pos + 11, nullptr);
      have_scale = true;
    }
  }
  if (!have_scale) fileError(path, "missing depth_scale header comment");
  if (scale <= 0) fileError(path, "invalid depth_scale");
  std::vector<uint8_t> buf(static_cast<size_t>(h.width) * h.height * 2);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    fileError(path, "truncated depth data");
  ImageD img(h.width, h.height, 0.0);
  for (size_t i = 0; i < img.data.size(); ++i) {
    const uint16_t raw = static_cast<uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    img.data[i] = raw * scale;
  }
  if (depth_scale) *depth_scale = scale;
  return img;
}

void dumpRenderDebug(const fs::path& prefix, const RenderOutput& render,
                     double depth_scale) {
  auto to8 = [](const ImageD& img) {
    ImageU8 out(img.width, img.height);
    for (size_t i = 0; i < img.data.size(); ++i) {
      out.data[i] = static_cast<uint8_t>(
          std::clamp(std::lround(img.data[i] * 255.0), 0L, 255L));
    }
    return out;
  };
  writePgm8(fs::path(prefix.string() + "_silh_hand.pgm"), to8(render.silh_hand));
  writePgm8(fs::path(prefix.string() + "_silh_obj.pgm"), to8(render.silh_obj));
  writeDepthPgm(fs::path(prefix.string() + "_depth.pgm"), render.depth, depth_scale);
}

void writeCsvRow(const fs::path& path, const VecX& values) {
  auto out = openOut(path);
  for (int i = 0; i < values.size(); ++i) {
    out << (i ? "," : "") << formatDouble(values[i]);
  }
  out << "\n";
}

VecX readCsvRow(const fs::path& path, int expected) {
  const MatX m = readCsvMatrix(path, expected);
  if (m.rows() != 1) fileError(path, "expected a single CSV row");
  return m.row(0).transpose();
}

void writeCsvMatrix(const fs::path& path, const MatX& values) {
  auto out = openOut(path);
  for (int r = 0; r < values.rows(); ++r) {
    for (int c = 0; c < values.cols(); ++c) {
      out << (c ? "," : "") << formatDouble(values(r, c));
    }
    out << "\n";
  }
}

MatX readCsvMatrix(const fs::path& path, int expected_cols) {
  auto in = openIn(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) fileError(path, "non-numeric CSV cell: " + cell);
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      fileError(path, "ragged CSV rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fileError(path, "empty CSV file");
  if (expected_cols > 0 && static_cast<int>(rows.front().size()) != expected_cols)
    fileError(path, "expected " + std::to_string(expected_cols) + " columns");
  MatX m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c) m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
  }
  return m;
}

void saveHandModel(const fs::path& path, const HandModel& model) {
  auto out = openOut(path);
  const int v = model.vertexCount();
  out << "vertices " << v << "\n";
  for (int i = 0; i < v; ++i) {
    out << formatDouble(model.template_vertices(i, 0)) << " "
        << formatDouble(model.template_vertices(i, 1)) << " "
        << formatDouble(model.template_vertices(i, 2)) << "\n";
  }
  out << "faces " << model.faceCount() << "\n";
  for (int f = 0; f < model.faceCount(); ++f) {
    out << model.faces(f, 0) << " " << model.faces(f, 1) << " " << model.faces(f, 2) << "\n";
  }
  out << "parents 16\n";
  for (int i = 0; i < kNumNodes; ++i) out << model.parents[i] << (i + 1 < kNumNodes ? " " : "\n");
  out << "rest_joints 16\n";
  for (int i = 0; i < kNumNodes; ++i) {
    out << formatDouble(model.rest_joints(i, 0)) << " "
        << formatDouble(model.rest_joints(i, 1)) << " "
        << formatDouble(model.rest_joints(i, 2)) << "\n";
  }
  out << "tips 5\n";
  for (int i = 0; i < 5; ++i) out << model.tips[i] << (i + 1 < 5 ? " " : "\n");
  out << "skin_weights " << v << " 16\n";
  for (int i = 0; i < v; ++i) {
    for (int j = 0; j < kNumNodes; ++j) {
      out << formatDouble(model.skin_weights(i, j)) << (j + 1 < kNumNodes ? " " : "\n");
    }
  }
  // Per vertex: 10 blendshapes x 3 displacement components.
  out << "shape_dirs " << v << " 30\n";
  for (int i = 0; i < v; ++i) {
    for (int b = 0; b < kNumShapeParams; ++b) {
      for (int k = 0; k < 3; ++k) {
        out << formatDouble(model.shape_dirs[b](i, k));
        out << ((b == kNumShapeParams - 1 && k == 2) ? "\n" : " ");
      }
    }
  }
  out << "limits 45\n";
  for (int i = 0; i < kNumFingerAngles; ++i) {
    out << formatDouble(model.limits_lo[i]) << " " << formatDouble(model.limits_hi[i]) << "\n";
  }
}

HandModel loadHandModel(const fs::path& path) {
  auto in = openIn(path);
  HandModel model;
  std::string section;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) fileError(path, "while reading " + what);
  };
  while (in >> section) {
    if (section == "vertices") {
      int n;
      need(static_cast<bool>(in >> n) && n > 0, "vertex count");
      model.template_vertices.resize(n, 3);
      for (int i = 0; i < n; ++i) {
        need(static_cast<bool>(in >> model.template_vertices(i, 0) >>
                               model.template_vertices(i, 1) >>
                               model.template_vertices(i, 2)),
             "vertices");
      }
    } else if (section == "faces") {
      int n;
      need(static_cast<bool>(in >> n) && n >= 0, "face count");
      model.faces.resize(n, 3);
      for (int i = 0; i < n; ++i) {
        need(static_cast<bool>(in >> model.faces(i, 0) >> model.faces(i, 1) >>
                               model.faces(i, 2)),
             "faces");
      }
    } else if (section == "parents") {
      int n;
      need(static_cast<bool>(in >> n) && n == kNumNodes, "parents count");
      for (int i = 0; i < kNumNodes; ++i) need(static_cast<bool>(in >> model.parents[i]), "parents");
    } else if (section == "rest_joints") {
      int n;
      need(static_cast<bool>(in >> n) && n == kNumNodes, "rest_joints count");
      model.rest_joints.resize(kNumNodes, 3);
      for (int i = 0; i < kNumNodes; ++i) {
        need(static_cast<bool>(in >> model.rest_joints(i, 0) >> model.rest_joints(i, 1) >>
                               model.rest_joints(i, 2)),
             "rest_joints");
      }
    } else if (section == "tips") {
      int n;
      need(static_cast<bool>(in >> n) && n == 5, "tips count");
      for (int i = 0; i < 5; ++i) need(static_cast<bool>(in >> model.tips[i]), "tips");
    } else if (section == "skin_weights") {
      int n, k;
      need(static_cast<bool>(in >> n >> k) && k == kNumNodes, "skin_weights header");
      model.skin_weights.resize(n, kNumNodes);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < kNumNodes; ++j) {
          need(static_cast<bool>(in >> model.skin_weights(i, j)), "skin_weights");
        }
      }
    } else if (section == "shape_dirs") {
      int n, k;
      need(static_cast<bool>(in >> n >> k) && k == 30, "shape_dirs header");
      for (auto& d : model.shape_dirs) d.resize(n, 3);
      for (int i = 0; i < n; ++i) {
        for (int b = 0; b < kNumShapeParams; ++b) {
          for (int c = 0; c < 3; ++c) {
            need(static_cast<bool>(in >> model.shape_dirs[b](i, c)), "shape_dirs");
          }
        }
      }
    } else if (section == "limits") {
      int n;
      need(static_cast<bool>(in >> n) && n == kNumFingerAngles, "limits count");
      model.limits_lo.resize(kNumFingerAngles);
      model.limits_hi.resize(kNumFingerAngles);
      for (int i = 0; i < kNumFingerAngles; ++i) {
        need(static_cast<bool>(in >> model.limits_lo[i] >> model.limits_hi[i]), "limits");
      }
    } else {
      fileError(path, "unknown model section: " + section);
    }
  }
  try {
    model.finalize();
  } catch (const InvalidInput& e) {
    fileError(path, e.what());
  }
  return model;
}

void saveObj(const fs::path& path, const TriMesh& mesh) {
  auto out = openOut(path);
  for (int v = 0; v < mesh.vertexCount(); ++v) {
    out << "v " << formatDouble(mesh.vertices(v, 0)) << " "
        << formatDouble(mesh.vertices(v, 1)) << " "
        << formatDouble(mesh.vertices(v, 2)) << "\n";
  }
  for (int f = 0; f < mesh.faceCount(); ++f) {
    out << "f " << mesh.faces(f, 0) + 1 << " " << mesh.faces(f, 1) + 1 << " "
        << mesh.faces(f, 2) + 1 << "\n";
  }
}

TriMesh loadObj(const fs::path& path) {
  auto in = openIn(path);
  std::vector<Vec3> verts;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z()))
        fileError(path, "bad vertex at line " + std::to_string(line_no));
      verts.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        // "i", "i/j", "i/j/k" forms; only the vertex index is used.
        idx.push_back(std::atoi(tok.c_str()));
      }
      if (idx.size() < 3)
        fileError(path, "face with fewer than 3 vertices at line " + std::to_string(line_no));
      for (int& i : idx) {
        if (i < 0) i = static_cast<int>(verts.size()) + i + 1;
        if (i < 1 || i > static_cast<int>(verts.size()))
          fileError(path, "face index out of range at line " + std::to_string(line_no));
      }
      for (size_t k = 2; k < idx.size(); ++k) {
        faces.push_back({idx[0] - 1, idx[k - 1] - 1, idx[k] - 1});
      }
    }
    // Other tags (vn, vt, o, g, s, usemtl...) are ignored.
  }
  if (verts.empty()) fileError(path, "no vertices");
  TriMesh mesh;
  mesh.vertices.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(static_cast<int>(i)) = verts[i].transpose();
  mesh.faces.resize(static_cast<int>(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i) mesh.faces.row(static_cast<int>(i)) = faces[i].transpose();
  return mesh;
}

void saveCalib(const fs::path& path, const CameraRig& rig) {
  auto out = openOut(path);
  out << "cameras " << rig.count() << " reference " << rig.reference << "\n";
  for (const Camera& cam : rig.cameras) {
    out << formatDouble(cam.fx) << " " << formatDouble(cam.fy) << " "
        << formatDouble(cam.cx) << " " << formatDouble(cam.cy) << " "
        << cam.width << " " << cam.height << " " << formatDouble(cam.depth_scale);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << " " << formatDouble(cam.extrinsic.rot(r, c));
      out << " " << formatDouble(cam.extrinsic.trans[r]);
    }
    out << "\n";
  }
}

CameraRig loadCalib(const fs::path& path) {
  auto in = openIn(path);
  std::string tag;
  int count = 0;
  CameraRig rig;
  if (!(in >> tag >> count) || tag != "cameras")
    fileError(path, "expected 'cameras N'");
  if (!(in >> tag >> rig.reference) || tag != "reference")
    fileError(path, "expected 'reference K'");
  for (int i = 0; i < count; ++i) {
    Camera cam;
    if (!(in >> cam.fx >> cam.fy >> cam.cx >> cam.cy >> cam.width >> cam.height >>
          cam.depth_scale))
      fileError(path, "truncated camera intrinsics");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (!(in >> cam.extrinsic.rot(r, c))) fileError(path, "truncated extrinsic");
      }
      if (!(in >> cam.extrinsic.trans[r])) fileError(path, "truncated extrinsic");
    }
    rig.cameras.push_back(cam);
  }
  try {
    rig.validate();
  } catch (const InvalidInput& e) {
    fileError(path, e.what());
  }
  return rig;
}

std::map<std::string, std::string> readConfigFile(const fs::path& path) {
  auto in = openIn(path);
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fileError(path, "expected key=value at line " + std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fileError(path, "empty key at line " + std::to_string(line_no));
    kv[key] = value;
  }
  return kv;
}

namespace {

double toDouble(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw InvalidInput("config value for '" + key + "' is not a number: " + value);
  return v;
}

}  // namespace

void applyConfig(const std::map<std::string, std::string>& kv, StageConfig* config) {
  for (const auto& [key, value] : kv) {
    if (key == "batch_size") config->batch_size = static_cast<int>(toDouble(key, value));
    else if (key == "iterations") config->iterations = static_cast<int>(toDouble(key, value));
    else if (key == "learning_rate") config->learning_rate = toDouble(key, value);
    else if (key == "lr_decay") config->lr_decay = toDouble(key, value);
    else if (key == "omega_size") config->omega_size = static_cast<int>(toDouble(key, value));
    else if (key == "seed") config->seed = static_cast<uint64_t>(toDouble(key, value));
    else if (key == "downscale") config->downscale = static_cast<int>(toDouble(key, value));
    else if (key == "cloud_max_range") config->cloud_max_range = toDouble(key, value);
    else if (key == "cloud_max_points") config->cloud_max_points = static_cast<int>(toDouble(key, value));
    else if (key == "init_perturb_rot_deg") config->init_perturb_rot_deg = toDouble(key, value);
    else if (key == "init_perturb_trans") config->init_perturb_trans = toDouble(key, value);
    else if (key == "init_perturb_joint") config->init_perturb_joint = toDouble(key, value);
    else if (key == "alpha") config->weights.alpha = toDouble(key, value);
    else if (key == "beta") config->weights.beta = toDouble(key, value);
    else if (key == "gamma") config->weights.gamma = toDouble(key, value);
    else if (key == "delta") config->weights.delta = toDouble(key, value);
    else if (key == "epsilon") config->weights.epsilon = toDouble(key, value);
    else if (key == "zeta") config->weights.zeta = toDouble(key, value);
    else if (key == "eta") config->weights.eta = toDouble(key, value);
    else if (key == "nu") config->weights.nu = toDouble(key, value);
    else if (key == "w_phy") config->weights.w_phy = toDouble(key, value);
    else if (key == "rho") config->weights.rho = toDouble(key, value);
    else if (key == "sigma") config->weights.sigma = toDouble(key, value);
    else if (key == "tau") config->weights.tau = toDouble(key, value);
    else if (key == "tukey_c") config->weights.tukey_c = toDouble(key, value);
    else if (key == "sharpness") config->weights.sharpness = toDouble(key, value);
    else throw InvalidInput("unknown config key: " + key);
  }
}

void applyConfig(const std::map<std::string, std::string>& kv, SynthConfig* config) {
  for (const auto& [key, value] : kv) {
    if (key == "frames") config->frames = static_cast<int>(toDouble(key, value));
    else if (key == "cameras") config->cameras = static_cast<int>(toDouble(key, value));
    else if (key == "width") config->width = static_cast<int>(toDouble(key, value));
    else if (key == "height") config->height = static_cast<int>(toDouble(key, value));
    else if (key == "focal") config->focal = toDouble(key, value);
    else if (key == "object_type") config->object_type = value;
    else if (key == "object_size") config->object_size = toDouble(key, value);
    else if (key == "mode") config->mode = value;
    else if (key == "object_rot_speed_deg") config->object_rot_speed_deg = toDouble(key, value);
    else if (key == "object_trans_amp") config->object_trans_amp = toDouble(key, value);
    else if (key == "grasp_perturb_amp") config->grasp_perturb_amp = toDouble(key, value);
    else if (key == "depth_noise") config->depth_noise = toDouble(key, value);
    else if (key == "keypoint_noise") config->keypoint_noise = toDouble(key, value);
    else if (key == "mask_erosion") config->mask_erosion = static_cast<int>(toDouble(key, value));
    else if (key == "seed") config->seed = static_cast<uint64_t>(toDouble(key, value));
    else if (key == "init_object_rot_deg") config->init_object_rot_deg = toDouble(key, value);
    else if (key == "init_object_trans") config->init_object_trans = toDouble(key, value);
    else if (key.rfind("shape", 0) == 0 && key.size() == 6 && key[5] >= '0' && key[5] <= '9') {
      config->shape.beta[key[5] - '0'] = toDouble(key, value);
    }
    else throw InvalidInput("unknown synth config key: " + key);
  }
}

namespace {

std::string frameName(const char* prefix, int frame, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%06d.%s", prefix, frame, ext);
  return buf;
}

}  // namespace

LoadedSequence loadSequence(const fs::path& root) {
  if (!fs::is_directory(root)) throw InvalidInput(root.string() + ": not a directory");
  LoadedSequence out;
  out.seq.rig = loadCalib(root / "calib.txt");
  out.models.hand = loadHandModel(root / "hand.model");
  if (fs::exists(root / "object.obj")) {
    out.models.object = loadObj(root / "object.obj");
  }
  out.models.finalize();
  if (fs::exists(root / "shape.csv")) {
    out.shape.beta = readCsvRow(root / "shape.csv", kNumShapeParams);
  }

  const int ncams = out.seq.rig.count();
  // Frame count: from camera 0's masks; all cameras must agree.
  int frames = 0;
  while (fs::exists(root / "cam0" / frameName("mask", frames, "pgm"))) ++frames;
  if (frames == 0) throw InvalidInput(root.string() + ": no frames found under cam0/");
  for (int c = 0; c < ncams; ++c) {
    const fs::path cam_dir = root / ("cam" + std::to_string(c));
    if (!fs::is_directory(cam_dir)) throw InvalidInput(cam_dir.string() + ": missing camera directory");
    int cf = 0;
    while (fs::exists(cam_dir / frameName("mask", cf, "pgm"))) ++cf;
    if (cf != frames)
      throw InvalidInput(cam_dir.string() + ": frame count mismatch (" +
                         std::to_string(cf) + " vs " + std::to_string(frames) + ")");
  }

  out.seq.frames.resize(frames);
  for (int t = 0; t < frames; ++t) {
    for (int c = 0; c < ncams; ++c) {
      const fs::path cam_dir = root / ("cam" + std::to_string(c));
      FrameObservation obs;
      obs.mask = readPgm8(cam_dir / frameName("mask", t, "pgm"));
      obs.depth = readDepthPgm(cam_dir / frameName("depth", t, "pgm"));
      obs.keypoints = readCsvMatrix(cam_dir / frameName("kps", t, "csv"), 3);
      if (obs.keypoints.rows() != 21)
        throw InvalidInput((cam_dir / frameName("kps", t, "csv")).string() +
                           ": expected 21 keypoint rows");
      try {
        obs.validate();
        if (!obs.mask.sameSize(out.seq.rig.cameras[c].width,
                               out.seq.rig.cameras[c].height))
          throw InvalidInput("observation resolution does not match the camera");
      } catch (const InvalidInput& e) {
        throw InvalidInput((cam_dir / frameName("mask", t, "pgm")).string() + ": " + e.what());
      }
      out.seq.frames[t].views.push_back(std::move(obs));
    }
  }

  if (fs::exists(root / "init_object.csv")) {
    const MatX m = readCsvMatrix(root / "init_object.csv", kObjectParams);
    if (m.rows() != 1 && m.rows() != frames)
      throw InvalidInput((root / "init_object.csv").string() +
                         ": expected 1 row or one per frame");
    for (int r = 0; r < m.rows(); ++r) {
      out.object_init.push_back(ObjectPose::fromVector(m.row(r).transpose()));
    }
  }

  if (fs::is_directory(root / "gt")) {
    AnnotationResult gt;
    for (int t = 0; t < frames; ++t) {
      gt.hand.push_back(HandPose::fromVector(
          readCsvRow(root / "gt" / frameName("hand_pose", t, "csv"), kHandParams)));
      gt.object.push_back(ObjectPose::fromVector(
          readCsvRow(root / "gt" / frameName("object_pose", t, "csv"), kObjectParams)));
    }
    if (fs::exists(root / "gt" / "shape.csv")) {
      gt.shape.beta = readCsvRow(root / "gt" / "shape.csv", kNumShapeParams);
    }
    out.gt = std::move(gt);
  }
  return out;
}

void saveSequence(const fs::path& root, const SynthResult& synth) {
  fs::create_directories(root);
  saveCalib(root / "calib.txt", synth.seq.rig);
  saveHandModel(root / "hand.model", synth.models.hand);
  if (synth.models.hasObject()) saveObj(root / "object.obj", synth.models.object);

  const int frames = synth.seq.frameCount();
  for (int c = 0; c < synth.seq.rig.count(); ++c) {
    const fs::path cam_dir = root / ("cam" + std::to_string(c));
    fs::create_directories(cam_dir);
    for (int t = 0; t < frames; ++t) {
      const FrameObservation& obs = synth.seq.frames[t].views[c];
      writePgm8(cam_dir / frameName("mask", t, "pgm"), obs.mask);
      writeDepthPgm(cam_dir / frameName("depth", t, "pgm"), obs.depth,
                    synth.seq.rig.cameras[c].depth_scale);
      writeCsvMatrix(cam_dir / frameName("kps", t, "csv"), obs.keypoints);
    }
  }
  if (!synth.object_init.empty()) {
    MatX m(frames, kObjectParams);
    for (int t = 0; t < frames; ++t) m.row(t) = synth.object_init[t].toVector().transpose();
    writeCsvMatrix(root / "init_object.csv", m);
  }
  const fs::path gt_dir = root / "gt";
  fs::create_directories(gt_dir);
  for (int t = 0; t < frames; ++t) {
    writeCsvRow(gt_dir / frameName("hand_pose", t, "csv"), synth.gt.hand[t].toVector());
    writeCsvRow(gt_dir / frameName("object_pose", t, "csv"), synth.gt.object[t].toVector());
  }
  writeCsvRow(gt_dir / "shape.csv", synth.gt.shape.beta);
}

void saveResult(const fs::path& out_dir, const AnnotationResult& result,
                const Metrics* metrics) {
  fs::create_directories(out_dir);
  const int frames = static_cast<int>(result.hand.size());
  for (int t = 0; t < frames; ++t) {
    writeCsvRow(out_dir / frameName("hand_pose", t, "csv"), result.hand[t].toVector());
    writeCsvRow(out_dir / frameName("object_pose", t, "csv"), result.object[t].toVector());
  }
  writeCsvRow(out_dir / "shape.csv", result.shape.beta);

  // Per-iteration energy log across stages.
  {
    auto out = openOut(out_dir / "energy_log.csv");
    out << "stage,iteration,mask,dpt,j2d,e3d,joint,phy,tc,total\n";
    for (const StageLog& log : result.stage_logs) {
      int it = 0;
      for (const EnergyBreakdown& bd : log.iterations) {
        out << log.stage << "," << it++ << "," << formatDouble(bd.mask) << ","
            << formatDouble(bd.dpt) << "," << formatDouble(bd.j2d) << ","
            << formatDouble(bd.e3d) << "," << formatDouble(bd.joint) << ","
            << formatDouble(bd.phy) << "," << formatDouble(bd.tc) << ","
            << formatDouble(bd.total) << "\n";
      }
    }
  }
  {
    auto out = openOut(out_dir / "status.txt");
    out << "converged " << (result.converged ? 1 : 0) << "\n";
    if (!result.failure_stage.empty()) out << "failure_stage " << result.failure_stage << "\n";
    out << "frames " << frames << "\n";
  }
  if (metrics) saveMetricsCsv(out_dir / "metrics.csv", *metrics);
}

AnnotationResult loadResult(const fs::path& dir) {
  AnnotationResult result;
  int frames = 0;
  while (fs::exists(dir / frameName("hand_pose", frames, "csv"))) ++frames;
  if (frames == 0) throw InvalidInput(dir.string() + ": no pose files found");
  for (int t = 0; t < frames; ++t) {
    result.hand.push_back(HandPose::fromVector(
        readCsvRow(dir / frameName("hand_pose", t, "csv"), kHandParams)));
    result.object.push_back(ObjectPose::fromVector(
        readCsvRow(dir / frameName("object_pose", t, "csv"), kObjectParams)));
  }
  if (fs::exists(dir / "shape.csv")) {
    result.shape.beta = readCsvRow(dir / "shape.csv", kNumShapeParams);
  }
  return result;
}

void saveMetricsCsv(const fs::path& path, const Metrics& metrics) {
  auto out = openOut(path);
  out << "frame,joint_err,joint_err_root,hand_mesh_err,obj_mesh_err,"
         "procrustes_err,f5,f15,obj_trans_err,obj_rot_err_deg\n";
  auto row = [&](const std::string& name, const FrameMetrics& fm) {
    out << name << "," << formatDouble(fm.joint_err) << ","
        << formatDouble(fm.joint_err_root) << "," << formatDouble(fm.hand_mesh_err)
        << "," << formatDouble(fm.obj_mesh_err) << ","
        << formatDouble(fm.procrustes_err) << "," << formatDouble(fm.f5) << ","
        << formatDouble(fm.f15) << "," << formatDouble(fm.obj_trans_err) << ","
        << formatDouble(fm.obj_rot_err_deg) << "\n";
  };
  for (size_t t = 0; t < metrics.frames.size(); ++t) {
    row(std::to_string(t), metrics.frames[t]);
  }
  row("mean", metrics.mean);
}

}  // namespace hoa
