#include "bodyfit/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "bodyfit/log.hpp"

namespace bodyfit {

using json = nlohmann::ordered_json;

namespace {

json read_json(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string("cannot open ") + what + " file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(1) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

// Field access with the document path and field name in the error.
template <class T>
T field(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": field '" + key + "': " + e.what());
  }
}

std::vector<double> to_vector(const Eigen::MatrixXd& m) {
  // Column-major, which for 3 x N is point by point.
  return std::vector<double>(m.data(), m.data() + m.size());
}

Eigen::Matrix3Xd to_points(const std::vector<double>& v, const std::string& where) {
  if (v.size() % 3 != 0) throw ParseError(where + ": point list length is not a multiple of 3");
  return Eigen::Map<const Eigen::Matrix3Xd>(v.data(), 3, static_cast<Eigen::Index>(v.size() / 3));
}

json pose_json(const PoseParams& pose) {
  json j;
  j["translation"] = to_vector(pose.root_translation);
  j["rotations"] = to_vector(pose.joint_rotations);
  return j;
}

PoseParams pose_from_json(const json& j, const std::string& where) {
  PoseParams pose;
  const auto t = field<std::vector<double>>(j, "translation", where);
  if (t.size() != 3) throw ParseError(where + ": translation must have 3 entries");
  pose.root_translation = Eigen::Vector3d(t[0], t[1], t[2]);
  pose.joint_rotations = to_points(field<std::vector<double>>(j, "rotations", where), where);
  return pose;
}

ShapeParams shape_from(const std::vector<double>& beta) {
  ShapeParams s;
  s.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cameras

void save_cameras(const std::string& path, const std::vector<Camera>& cameras) {
  json j;
  j["format"] = "bodyfit-cameras";
  j["version"] = 1;
  json list = json::array();
  for (const auto& c : cameras) {
    json jc;
    const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> r = c.rotation;
    jc["rotation"] = std::vector<double>(r.data(), r.data() + 9);
    jc["translation"] = to_vector(c.translation);
    jc["focal"] = to_vector(c.focal);
    jc["principal_point"] = to_vector(c.principal_point);
    jc["width"] = c.width;
    jc["height"] = c.height;
    list.push_back(jc);
  }
  j["cameras"] = list;
  write_json(path, j);
}

std::vector<Camera> load_cameras(const std::string& path) {
  const json j = read_json(path, "cameras");
  const auto list = field<json>(j, "cameras", path);
  if (!list.is_array()) throw ParseError(path + ": field 'cameras' must be an array");
  std::vector<Camera> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = path + ": cameras[" + std::to_string(i) + "]";
    const json& jc = list[i];
    Camera c;
    const auto r = field<std::vector<double>>(jc, "rotation", where);
    const auto t = field<std::vector<double>>(jc, "translation", where);
    const auto f = field<std::vector<double>>(jc, "focal", where);
    const auto p = field<std::vector<double>>(jc, "principal_point", where);
    if (r.size() != 9 || t.size() != 3 || f.size() != 2 || p.size() != 2) {
      throw ParseError(where + ": wrong element count in rotation/translation/focal/principal_point");
    }
    c.rotation = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(r.data());
    c.translation = Eigen::Vector3d(t[0], t[1], t[2]);
    c.focal = Eigen::Vector2d(f[0], f[1]);
    c.principal_point = Eigen::Vector2d(p[0], p[1]);
    c.width = field<int>(jc, "width", where);
    c.height = field<int>(jc, "height", where);
    try {
      c.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detections

void save_detections(const std::string& path, const SequenceBundle& bundle) {
  json j;
  j["format"] = "bodyfit-detections";
  j["version"] = 1;
  j["views"] = bundle.views;
  j["frames"] = bundle.frames;
  j["joints"] = bundle.joints;
  j["frame_rate"] = bundle.frame_rate;
  if (bundle.image_width > 0) j["image_size"] = {bundle.image_width, bundle.image_height};
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(bundle.views) * bundle.frames * bundle.joints * 3);
  for (int v = 0; v < bundle.views; ++v) {
    for (int t = 0; t < bundle.frames; ++t) {
      const JointDetections& d = bundle.observations[t].detections[v];
      for (int k = 0; k < bundle.joints; ++k) {
        data.push_back(d.positions(0, k));
        data.push_back(d.positions(1, k));
        data.push_back(d.confidence[k]);
      }
    }
  }
  j["data"] = data;
  write_json(path, j);
}

std::string mask_filename(int view, int frame) {
  return "view" + std::to_string(view) + "_frame" + std::to_string(frame) + ".pgm";
}

SequenceBundle load_bundle(const BundlePaths& paths, int model_joints) {
  const std::string& path = paths.detections;
  const json j = read_json(path, "detections");
  SequenceBundle b;
  b.views = field<int>(j, "views", path);
  b.frames = field<int>(j, "frames", path);
  b.joints = field<int>(j, "joints", path);
  b.frame_rate = j.contains("frame_rate") ? field<double>(j, "frame_rate", path) : 0.0;
  if (j.contains("image_size")) {
    const auto size = field<std::vector<int>>(j, "image_size", path);
    if (size.size() != 2) throw ParseError(path + ": field 'image_size' must be [width, height]");
    b.image_width = size[0];
    b.image_height = size[1];
  }
  if (b.views < 1 || b.frames < 1 || b.joints < 1) {
    throw ValidationError(path + ": views, frames and joints must be positive");
  }

  // Detector joint k feeds model joint map[k]; identity when absent.
  std::vector<int> map(b.joints);
  for (int k = 0; k < b.joints; ++k) map[k] = k;
  if (j.contains("joint_map")) {
    map = field<std::vector<int>>(j, "joint_map", path);
    if (static_cast<int>(map.size()) != b.joints) {
      throw ValidationError(path + ": joint_map has " + std::to_string(map.size()) +
                            " entries, expected " + std::to_string(b.joints));
    }
    for (int m : map) {
      if (m < -1 || m >= model_joints) {
        throw ValidationError(path + ": joint_map entry " + std::to_string(m) +
                              " outside the model's joints");
      }
    }
  } else if (b.joints != model_joints) {
    throw ValidationError(path + ": " + std::to_string(b.joints) + " joints but the model has " +
                          std::to_string(model_joints) + " (add a joint_map)");
  }

  const auto data = field<std::vector<double>>(j, "data", path);
  const std::size_t expected = static_cast<std::size_t>(b.views) * b.frames * b.joints * 3;
  if (data.size() != expected) {
    throw ValidationError(path + ": field 'data' has " + std::to_string(data.size()) +
                          " numbers, expected views*frames*joints*3 = " + std::to_string(expected));
  }

  b.observations.assign(b.frames, FrameObservations{});
  int clamped = 0;
  std::size_t idx = 0;
  for (int v = 0; v < b.views; ++v) {
    for (int t = 0; t < b.frames; ++t) {
      JointDetections d = JointDetections::missing(model_joints);
      for (int k = 0; k < b.joints; ++k, idx += 3) {
        const int m = map[k];
        if (m < 0) continue;
        double w = data[idx + 2];
        const double x = data[idx];
        const double y = data[idx + 1];
        if (!std::isfinite(w)) w = 0.0;
        if (w < 0.0 || w > 1.0) {
          ++clamped;
          w = std::clamp(w, 0.0, 1.0);
        }
        if (!std::isfinite(x) || !std::isfinite(y)) w = 0.0;
        d.positions.col(m) = w > 0.0 ? Eigen::Vector2d(x, y) : Eigen::Vector2d::Zero();
        d.confidence[m] = w;
      }
      b.observations[t].detections.push_back(std::move(d));
    }
  }
  if (clamped > 0) {
    log_warning(path + ": " + std::to_string(clamped) + " confidence value(s) clamped to [0, 1]");
  }
  b.joints = model_joints;

  if (!paths.cameras.empty()) {
    b.cameras = load_cameras(paths.cameras);
    if (static_cast<int>(b.cameras.size()) != b.views) {
      throw ValidationError(paths.cameras + ": " + std::to_string(b.cameras.size()) +
                            " cameras for " + std::to_string(b.views) + " views");
    }
    if (b.image_width == 0) {
      b.image_width = b.cameras[0].width;
      b.image_height = b.cameras[0].height;
    }
  }

  if (!paths.masks.empty()) {
    const std::filesystem::path dir(paths.masks);
    if (!std::filesystem::is_directory(dir)) {
      throw ValidationError("masks directory " + paths.masks + " does not exist");
    }
    for (int t = 0; t < b.frames; ++t) {
      for (int v = 0; v < b.views; ++v) {
        std::filesystem::path file = dir / mask_filename(v, t);
        if (!std::filesystem::exists(file)) {
          std::filesystem::path png = file;
          png.replace_extension(".png");
          if (!std::filesystem::exists(png)) {
            throw ValidationError("missing mask file " + file.string());
          }
          file = png;
        }
        Mask m = read_mask(file.string());
        if (!b.cameras.empty() &&
            (m.width != b.cameras[v].width || m.height != b.cameras[v].height)) {
          throw ValidationError(file.string() + ": mask size " + std::to_string(m.width) + "x" +
                                std::to_string(m.height) + " does not match camera " +
                                std::to_string(v));
        }
        b.observations[t].masks.push_back(std::move(m));
      }
    }
    if (b.image_width == 0) {
      b.image_width = b.observations[0].masks[0].width;
      b.image_height = b.observations[0].masks[0].height;
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Masks

void write_pgm(const std::string& path, const Mask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write mask " + path);
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  std::vector<char> row(static_cast<std::size_t>(mask.width));
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) row[x] = mask.at(x, y) ? static_cast<char>(255) : 0;
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("failed writing mask " + path);
}

Mask read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mask " + path);
  auto token = [&]() {
    std::string t;
    while (in >> std::ws && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
    }
    in >> t;
    return t;
  };
  if (token() != "P5") throw ParseError(path + ": not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw ParseError(path + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw ParseError(path + ": unsupported PGM dimensions or depth");
  }
  in.get();  // single whitespace after the header
  std::vector<unsigned char> pixels(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size())) {
    throw ParseError(path + ": truncated PGM pixel data");
  }
  Mask m(w, h);
  const int threshold = maxval / 2;
  for (std::size_t i = 0; i < pixels.size(); ++i) m.data[i] = pixels[i] > threshold ? 1 : 0;
  return m;
}

Mask read_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ParseError(path + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ParseError(path + ": " + msg);
  }
  Mask m(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = buffer[i] >= 128 ? 1 : 0;
  return m;
}

Mask read_mask(const std::string& path) {
  const std::string ext = std::filesystem::path(path).extension().string();
  if (ext == ".png" || ext == ".PNG") return read_png(path);
  return read_pgm(path);
}

// ---------------------------------------------------------------------------
// Results

FitRecord make_record(const BodyModel& model, const SequenceFit& fit) {
  FitRecord r;
  r.shape = fit.shape;
  r.poses = fit.poses;
  for (const auto& pose : fit.poses) r.joints.push_back(posed_joints(model, fit.shape, pose));
  return r;
}

void write_results(const BodyModel& model, const SequenceFit& fit, const PipelineConfig& config,
                   const std::filesystem::path& out_dir, const WriteOptions& options) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  json j;
  j["format"] = "bodyfit-poses";
  j["version"] = 1;
  j["frames"] = fit.frames();
  j["joints"] = model.num_joints();
  j["shape"] = to_vector(fit.shape.beta);
  json frames = json::array();
  for (int t = 0; t < fit.frames(); ++t) {
    json f;
    f["frame"] = t;
    f["fitted"] = static_cast<bool>(fit.fitted[t]);
    const json p = pose_json(fit.poses[t]);
    f["translation"] = p["translation"];
    f["rotations"] = p["rotations"];
    f["joints"] = to_vector(posed_joints(model, fit.shape, fit.poses[t]));
    f["stage_one_shape"] = to_vector(fit.frame_shapes[t].beta);
    if (std::isfinite(fit.frame_objectives[t])) {
      f["stage_one_objective"] = fit.frame_objectives[t];
    } else {
      f["stage_one_objective"] = nullptr;
    }
    frames.push_back(f);
  }
  j["poses"] = frames;

  json prov;
  prov["views"] = fit.provenance.views;
  prov["silhouette"] = fit.provenance.silhouette;
  prov["stage_two"] = fit.provenance.stage_two;
  prov["stage2_silhouette"] = fit.provenance.stage2_silhouette;
  prov["monocular"] = fit.provenance.monocular;
  prov["camera_source"] = fit.provenance.camera_source;
  prov["window"] = fit.provenance.window;
  prov["dct_k"] = fit.provenance.dct_k;
  json windows = json::array();
  for (const auto& w : fit.windows) {
    json jw;
    jw["rounds"] = w.rounds;
    jw["objective_trace"] = w.objective_trace;
    windows.push_back(jw);
  }
  prov["windows"] = windows;
  j["provenance"] = prov;

  const FitConfig& c = config.fit;
  json cfg;
  cfg["sigma1"] = c.sigma1;
  cfg["sigma2"] = c.sigma2;
  cfg["lambda_t"] = c.lambda_t;
  cfg["lambda_t_axis"] = to_vector(c.lambda_t_axis);
  json sched = json::array();
  for (const auto& [lt, lb] : c.schedule) sched.push_back({lt, lb});
  cfg["schedule"] = sched;
  cfg["silhouette_weight"] = c.silhouette_weight;
  cfg["silhouette_stride"] = c.silhouette_stride;
  cfg["window"] = config.window;
  cfg["dct_k"] = config.dct_k;
  cfg["sigma1_anneal"] = config.sigma1_anneal;
  cfg["silhouette_rounds"] = config.silhouette_rounds;
  cfg["silhouette_iterations"] = config.silhouette_iterations;
  cfg["stage_two_rounds"] = config.stage_two_rounds;
  cfg["stage_two_rtol"] = config.stage_two_rtol;
  cfg["gtol"] = config.solve.gtol;
  cfg["xtol"] = config.solve.xtol;
  cfg["max_iterations"] = config.solve.max_iterations;
  cfg["max_radius"] = config.solve.max_radius;
  j["config"] = cfg;

  write_json((out_dir / "poses.json").string(), j);

  if (options.obj) {
    for (int t = 0; t < fit.frames(); ++t) {
      const PosedBody body = forward(model, fit.shape, fit.poses[t]);
      write_obj((out_dir / ("frame" + std::to_string(t) + ".obj")).string(), body.vertices,
                model.faces);
    }
  }
}

FitRecord load_results(const std::string& path) {
  const json j = read_json(path, "results");
  if (field<std::string>(j, "format", path) != "bodyfit-poses") {
    throw ParseError(path + ": not a bodyfit poses document");
  }
  FitRecord r;
  r.shape = shape_from(field<std::vector<double>>(j, "shape", path));
  const auto frames = field<json>(j, "poses", path);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::string where = path + ": poses[" + std::to_string(t) + "]";
    r.poses.push_back(pose_from_json(frames[t], where));
    r.joints.push_back(to_points(field<std::vector<double>>(frames[t], "joints", where), where));
  }
  if (static_cast<int>(r.poses.size()) != field<int>(j, "frames", path)) {
    throw ValidationError(path + ": frame count does not match the pose list");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Pose prior

void save_pose_prior(const std::string& path, const PosePrior& prior) {
  json j;
  j["format"] = "bodyfit-pose-prior";
  j["version"] = 1;
  j["mean"] = to_vector(prior.mean);
  j["precision"] = to_vector(prior.precision);
  write_json(path, j);
}

PosePrior load_pose_prior(const std::string& path) {
  const json j = read_json(path, "pose prior");
  const auto mean = field<std::vector<double>>(j, "mean", path);
  const auto precision = field<std::vector<double>>(j, "precision", path);
  if (mean.size() != precision.size()) {
    throw ValidationError(path + ": mean and precision differ in length");
  }
  PosePrior prior;
  prior.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  prior.precision =
      Eigen::Map<const Eigen::VectorXd>(precision.data(), static_cast<Eigen::Index>(precision.size()));
  if ((prior.precision.array() < 0.0).any()) {
    throw ValidationError(path + ": precisions must be nonnegative");
  }
  return prior;
}

// ---------------------------------------------------------------------------
// Ground truth

void save_truth(const std::string& path, const Truth& truth) {
  json j;
  j["format"] = "bodyfit-truth";
  j["version"] = 1;
  j["frames"] = truth.poses.size();
  j["shape"] = to_vector(truth.shape.beta);
  json frames = json::array();
  for (std::size_t t = 0; t < truth.poses.size(); ++t) {
    json f = pose_json(truth.poses[t]);
    f["joints"] = to_vector(truth.joints[t]);
    if (t < truth.swapped.size()) f["swapped_views"] = truth.swapped[t];
    frames.push_back(f);
  }
  j["poses"] = frames;
  j["rest_vertices"] = to_vector(truth.rest_vertices);
  write_json(path, j);
}

Truth load_truth(const std::string& path) {
  const json j = read_json(path, "truth");
  if (field<std::string>(j, "format", path) != "bodyfit-truth") {
    throw ParseError(path + ": not a bodyfit truth document");
  }
  Truth truth;
  truth.shape = shape_from(field<std::vector<double>>(j, "shape", path));
  const auto frames = field<json>(j, "poses", path);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::string where = path + ": poses[" + std::to_string(t) + "]";
    truth.poses.push_back(pose_from_json(frames[t], where));
    truth.joints.push_back(to_points(field<std::vector<double>>(frames[t], "joints", where), where));
    if (frames[t].contains("swapped_views")) {
      truth.swapped.push_back(field<std::vector<int>>(frames[t], "swapped_views", where));
    }
  }
  truth.rest_vertices = to_points(field<std::vector<double>>(j, "rest_vertices", path), path);
  return truth;
}

}  // namespace bodyfit
