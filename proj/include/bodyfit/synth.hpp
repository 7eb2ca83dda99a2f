#pragma once

// Synthetic sequences with known ground truth, and the evaluation metrics.

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "bodyfit/body_model.hpp"
#include "bodyfit/io.hpp"

namespace bodyfit {

struct SynthOptions {
  std::uint64_t seed = 0;
  int views = 4;
  int frames = 60;
  double noise_px = 0.0;
  double swap_rate = 0.0;
  std::vector<int> swap_views;  ///< views eligible for label swaps; empty = all
  int mask_noise = 0;           ///< max dilation/erosion radius in pixels
  bool masks = true;

  int width = 500;
  int height = 500;
  double focal = 800.0;
  double camera_distance = 4.0;
  double camera_height = 0.3;
  double shape_std = 1.0;                                          ///< beta ~ N(0, std^2)
  Eigen::Vector3d translation_amplitude = Eigen::Vector3d(0.2, 0.05, 0.2);
  double yaw_amplitude = 1.0471975511965976;                       ///< pi / 3
  double motion_scale = 1.0;                                       ///< scales joint-angle motion
};

struct SynthResult {
  SequenceBundle bundle;
  Truth truth;
};

/// Cameras on a circle around the subject, view v at azimuth v * 90 degrees
/// (view 0 in front), all aimed at the pelvis height.
std::vector<Camera> ring_cameras(const SynthOptions& options);

SynthResult synth_generate(const BodyModel& model, const SynthOptions& options);

/// Swaps every left/right pair of a detection set in place.
void swap_left_right(const BodyModel& model, JointDetections& dets);

/// Writes detections.json, cameras.json, masks/ and truth.json into `dir`.
void write_synth(const SynthResult& synth, const std::string& dir);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalOptions {
  bool procrustes = false;
  bool vertex_error = false;
};

struct EvalReport {
  std::vector<double> per_frame_mm;
  double mean_mm = 0.0;
  double median_mm = 0.0;
  std::vector<double> per_frame_procrustes_mm;  ///< empty unless requested
  double mean_procrustes_mm = 0.0;
  double vertex_error_mm = -1.0;  ///< < 0 unless requested
  double sum_squared_error = 0.0;             ///< raw, meters^2
  double sum_squared_procrustes_error = 0.0;  ///< after alignment, meters^2
};

/// Similarity transform (s, R, t) minimizing |s R X + t - Y|_F^2; returns
/// the aligned X.
Eigen::Matrix3Xd procrustes_align(const Eigen::Matrix3Xd& X, const Eigen::Matrix3Xd& Y);

/// Mean per-joint Euclidean error of each frame, optionally after per-frame
/// similarity alignment, and the rest-pose vertex error of the shapes.
EvalReport evaluate(const BodyModel& model, const FitRecord& fit, const Truth& truth,
                    const EvalOptions& options);

/// Mean per-joint error (mm) between two joint sets.
double mean_joint_error_mm(const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b);

/// Mean per-vertex distance (mm) between the theta = 0 bodies of two shapes.
double vertex_error_mm(const BodyModel& model, const ShapeParams& a, const ShapeParams& b);

}  // namespace bodyfit
