#pragma once

// File formats: detections and camera documents, mask images, fit results
// and ground truth. Layouts are described in the README.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bodyfit/body_model.hpp"
#include "bodyfit/camera.hpp"
#include "bodyfit/pipeline.hpp"
#include "bodyfit/silhouette.hpp"

namespace bodyfit {

struct SequenceBundle {
  int views = 0;
  int frames = 0;
  int joints = 0;
  double frame_rate = 0.0;  ///< informational
  int image_width = 0;      ///< 0 when unknown
  int image_height = 0;
  std::vector<Camera> cameras;  ///< empty when no camera document was given
  std::vector<FrameObservations> observations;  ///< one per frame
};

struct BundlePaths {
  std::string detections;
  std::string cameras;  ///< optional
  std::string masks;    ///< optional directory
};

/// Loads and validates a bundle for a model with `model_joints` joints.
/// Confidences outside [0, 1] are clamped with a warning; missing joints
/// (non-finite positions or unmapped) get confidence 0.
SequenceBundle load_bundle(const BundlePaths& paths, int model_joints);

// Individual documents.
void save_detections(const std::string& path, const SequenceBundle& bundle);
void save_cameras(const std::string& path, const std::vector<Camera>& cameras);
std::vector<Camera> load_cameras(const std::string& path);

/// Mask file name for a view/frame pair, e.g. "view0_frame12.pgm".
std::string mask_filename(int view, int frame);

/// Binary PGM (P5): 0 background, 255 foreground; read as > 127.
void write_pgm(const std::string& path, const Mask& mask);
Mask read_pgm(const std::string& path);
/// 8-bit grayscale (or colour, converted) PNG thresholded at 128.
Mask read_png(const std::string& path);
/// Reads by extension (.pgm or .png).
Mask read_mask(const std::string& path);

/// Fit results as stored on disk.
struct FitRecord {
  ShapeParams shape;
  std::vector<PoseParams> poses;
  std::vector<Eigen::Matrix3Xd> joints;  ///< 3D joints per frame, meters
};

FitRecord make_record(const BodyModel& model, const SequenceFit& fit);

struct WriteOptions {
  bool obj = false;
};

/// Writes `poses.json` (and `frame{t}.obj` meshes when requested) into
/// `out_dir`. `config` is echoed for reproducibility.
void write_results(const BodyModel& model, const SequenceFit& fit, const PipelineConfig& config,
                   const std::filesystem::path& out_dir, const WriteOptions& options = {});

FitRecord load_results(const std::string& path);

/// Pose prior sidecar: {"mean": [3J], "precision": [3J]}.
void save_pose_prior(const std::string& path, const PosePrior& prior);
PosePrior load_pose_prior(const std::string& path);

/// Ground truth of a synthetic sequence.
struct Truth {
  ShapeParams shape;
  std::vector<PoseParams> poses;
  std::vector<Eigen::Matrix3Xd> joints;
  Eigen::Matrix3Xd rest_vertices;  ///< shaped body at theta = 0
  std::vector<std::vector<int>> swapped;  ///< frame x view, 1 where labels were swapped
};

void save_truth(const std::string& path, const Truth& truth);
Truth load_truth(const std::string& path);

}  // namespace bodyfit
