#pragma once

// Two-stage sequence fitting: robust per-frame multi-view fits (joints, then
// silhouettes), a median shape, and windowed refits under the DCT
// trajectory prior. Also the monocular variant.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bodyfit/body_model.hpp"
#include "bodyfit/camera.hpp"
#include "bodyfit/energy.hpp"
#include "bodyfit/parallel.hpp"
#include "bodyfit/silhouette.hpp"
#include "bodyfit/solver.hpp"
#include "bodyfit/temporal.hpp"

namespace bodyfit {

struct FrameObservations {
  std::vector<JointDetections> detections;  ///< one per view
  std::vector<Mask> masks;                  ///< one per view, or empty
};

struct PipelineConfig {
  FitConfig fit;
  int window = 30;
  int dct_k = 10;
  bool silhouette = true;          ///< stage-one silhouette pass
  bool stage_two = true;
  bool stage2_silhouette = false;  ///< keep silhouettes in the windowed refit
  bool monocular = false;
  int threads = 1;

  /// Per pass. The radius cap keeps early steps inside one period of the
  /// rotation vectors; weakly constrained twists otherwise jump far away.
  SolveOptions solve{.max_radius = 1.0, .trace_path = {}};
  int silhouette_rounds = 4;        ///< re-linearizations of the silhouette term
  int silhouette_iterations = 15;   ///< solver iterations per round
  /// Multipliers of sigma1 for graduated robustness in stage one: placement
  /// and the prior schedule run at the first, then one pass per remaining
  /// entry, ending at sigma1 itself. Entries >= 1, nonincreasing.
  std::vector<double> sigma1_anneal = {10.0, 4.0, 2.0};
  int stage_two_rounds = 20;
  double stage_two_rtol = 1e-6;     ///< relative decrease that ends the refit

  void validate() const;
};

/// Default configuration, tuned on the synthetic suite.
PipelineConfig default_pipeline_config(const BodyModel& model);

/// Least-squares residuals of one frame. Squared norm equals
///   sum_v E_J + lambda_theta E_theta + lambda_beta E_beta
///   + silhouette surrogate + temporal term against fixed targets,
/// with each optional part enabled by its pointer/weight.
struct FrameProblem {
  const BodyModel* model = nullptr;
  std::span<const Camera> cameras;
  std::span<const JointDetections> detections;
  double sigma1 = 10.0;
  std::vector<int> joint_subset;  ///< empty: all joints

  const PosePrior* pose_prior = nullptr;
  double lambda_theta = 0.0;
  double lambda_beta = 0.0;

  const SilhouetteLinearization* silhouette = nullptr;
  std::span<const DistanceField> silhouette_fields;
  double silhouette_weight = 0.0;

  const Eigen::Matrix3Xd* temporal_targets = nullptr;
  double sigma2 = 0.05;
  double lambda_t = 0.0;
  Eigen::Vector3d lambda_t_axis = Eigen::Vector3d::Ones();

  template <class T>
  void operator()(const T* params, std::vector<T>& out) const {
    const BodyModel& m = *model;
    const Kinematics<T> k = compute_kinematics(m, params);
    for (std::size_t v = 0; v < cameras.size(); ++v) {
      append_joint_residuals(k, cameras[v], detections[v], sigma1, joint_subset, out);
    }
    if (pose_prior && lambda_theta > 0.0) {
      append_pose_prior_residuals(params + 3, *pose_prior, lambda_theta, out);
    }
    if (lambda_beta > 0.0) {
      append_shape_prior_residuals(params + 3 + 3 * m.num_joints(), m.num_shape(), lambda_beta,
                                   out);
    }
    if (silhouette && silhouette_weight > 0.0) {
      append_silhouette_residuals(m, k, params, cameras, silhouette_fields, *silhouette,
                                  silhouette_weight, out);
    }
    if (temporal_targets && lambda_t > 0.0) {
      append_temporal_residuals(k, *temporal_targets, sigma2, lambda_t, lambda_t_axis, out);
    }
  }

  double value(const Eigen::VectorXd& params) const;
};

struct FrameFit {
  ShapeParams shape;
  PoseParams pose;
  double objective = 0.0;  ///< stage-one energy at the solution
  std::vector<SolveReport> passes;
};

/// Initial placement from the observations alone (no previous frame):
/// torso triangulation with two or more calibrated views, otherwise a
/// camera-facing body at the depth implied by the torso's image size.
/// Returns candidate starting poses (the monocular case yields the facing
/// and back-facing hypotheses).
std::vector<PoseParams> initial_poses(const BodyModel& model, std::span<const Camera> cameras,
                                      std::span<const JointDetections> detections);

/// Three passes: translation and root orientation on torso joints, full
/// pose and shape on all joints (annealed priors), then joints plus
/// silhouettes. Throws UnfittableFrame when no view has a confident joint.
FrameFit fit_frame(const BodyModel& model, const FrameObservations& obs,
                   std::span<const Camera> cameras, const PipelineConfig& config,
                   const FrameFit* init = nullptr);

/// Componentwise median (mean of the two middle values for even counts).
ShapeParams median_shape(std::span<const ShapeParams> shapes);

struct WindowFit {
  std::vector<PoseParams> poses;
  DctCoefficients coefficients;
  std::vector<double> objective_trace;  ///< E_2 (without the constant shape prior) per round
  int rounds = 0;
};

WindowFit fit_window(const BodyModel& model, const ShapeParams& shape,
                     std::span<const FrameObservations> window, std::span<const Camera> cameras,
                     std::span<const PoseParams> init, const PipelineConfig& config);

/// Window boundaries [start, end) for a sequence of `frames` frames.
std::vector<std::pair<int, int>> window_ranges(int frames, int window);

struct Provenance {
  int views = 0;
  bool silhouette = false;
  bool stage_two = false;
  bool stage2_silhouette = false;
  bool monocular = false;
  std::string camera_source = "file";  ///< "file" or "default"
  int window = 30;
  int dct_k = 10;
};

struct SequenceFit {
  std::vector<PoseParams> poses;             ///< final (after stage two when enabled)
  std::vector<PoseParams> stage_one_poses;
  std::vector<ShapeParams> frame_shapes;     ///< stage-one shape per frame
  std::vector<double> frame_objectives;      ///< stage-one energy (NaN if unfittable)
  std::vector<bool> fitted;                  ///< false: interpolated frame
  ShapeParams shape;                         ///< median shape
  std::vector<WindowFit> windows;
  Provenance provenance;

  int frames() const { return static_cast<int>(poses.size()); }
};

/// Fills unfitted poses from their fitted neighbours: linear translation,
/// spherical interpolation of each joint rotation; ends copy the nearest.
void interpolate_missing(std::vector<PoseParams>& poses, const std::vector<bool>& fitted);

PoseParams interpolate_pose(const PoseParams& a, const PoseParams& b, double t);

SequenceFit fit_sequence(const BodyModel& model, std::span<const FrameObservations> frames,
                         std::span<const Camera> cameras, const PipelineConfig& config);

/// Single-view fit. Without a camera, one is synthesized from the image size
/// (focal = max(width, height), principal point at the centre) and recorded
/// in the provenance.
SequenceFit fit_monocular(const BodyModel& model, std::span<const FrameObservations> frames,
                          const std::optional<Camera>& camera, int image_width, int image_height,
                          const PipelineConfig& config);

}  // namespace bodyfit
