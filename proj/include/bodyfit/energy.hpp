#pragma once

// Stage-one data and prior terms: the Geman-McClure robust loss, the
// multi-view joint reprojection term, pose/shape priors and their sum.

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bodyfit/body_model.hpp"
#include "bodyfit/camera.hpp"

namespace bodyfit {

/// 2D joint detections of one view in one frame, indexed by model joint.
/// A joint with confidence 0 is missing and its position is ignored.
struct JointDetections {
  Eigen::Matrix2Xd positions;   ///< pixels
  Eigen::VectorXd confidence;  ///< in [0, 1]

  static JointDetections missing(int num_joints) {
    return {Eigen::Matrix2Xd::Zero(2, num_joints), Eigen::VectorXd::Zero(num_joints)};
  }
  int num_joints() const { return static_cast<int>(confidence.size()); }
  bool any_confident() const { return (confidence.array() > 0.0).any(); }
};

/// Diagonal Gaussian prior over the joint-rotation block.
struct PosePrior {
  Eigen::VectorXd mean;
  Eigen::VectorXd precision;
};

/// Rest-pose-centred prior with stiffer spine/hips and looser limbs. The
/// root orientation is unconstrained.
PosePrior make_default_pose_prior(const BodyModel& model);

struct FitConfig {
  double lambda_theta = 1.0;
  double lambda_beta = 1e-4;
  double lambda_t = 1.0;
  Eigen::Vector3d lambda_t_axis = Eigen::Vector3d::Ones();  ///< per-axis multiplier
  double sigma1 = 10.0;    ///< pixels
  double sigma2 = 0.05;    ///< meters
  /// Stage-one annealing schedule of (lambda_theta, lambda_beta).
  std::vector<std::pair<double, double>> schedule = {{10.0, 1e-4}, {5.0, 1e-4}, {1.0, 1e-4}};
  double silhouette_weight = 1e-5;
  int silhouette_stride = 2;
  PosePrior pose_prior;

  void validate() const;
};

/// rho_sigma(e) = e^2 / (sigma^2 + e^2).
double geman_mcclure(double e, double sigma);

double joint_term(const BodyModel& model, const ShapeParams& shape, const PoseParams& pose,
                  const Camera& cam, const JointDetections& dets, double sigma1);

double pose_prior_term(const PoseParams& pose, const PosePrior& prior);

double shape_prior_term(const ShapeParams& shape);

/// E_M = lambda_theta E_theta + lambda_beta E_beta + sum_v E_J(view v).
double multiview_term(const BodyModel& model, const ShapeParams& shape, const PoseParams& pose,
                      std::span<const Camera> cameras, std::span<const JointDetections> dets,
                      const FitConfig& config);

// ---------------------------------------------------------------------------
// Least-squares residual forms. Each robust term contributes a residual
// vector whose squared norm equals the term's value.

/// Appends two residuals per joint: sqrt(w) * e / sqrt(sigma^2 + |e|^2).
/// Behind-camera joints contribute the constant (sqrt(w), 0).
/// `joint_subset` empty means all joints.
template <class T>
void append_joint_residuals(const Kinematics<T>& k, const Camera& cam,
                            const JointDetections& dets, double sigma,
                            std::span<const int> joint_subset, std::vector<T>& out) {
  using std::sqrt;
  auto one = [&](int j) {
    const double w = dets.confidence[j];
    if (w <= 0.0) {
      out.emplace_back(0.0);
      out.emplace_back(0.0);
      return;
    }
    const auto pix = project_point(cam, k.joints[j]);
    if (!pix) {
      out.emplace_back(std::sqrt(w));
      out.emplace_back(0.0);
      return;
    }
    const T ex = (*pix)[0] - dets.positions(0, j);
    const T ey = (*pix)[1] - dets.positions(1, j);
    const T s = std::sqrt(w) / sqrt(sigma * sigma + ex * ex + ey * ey);
    out.push_back(ex * s);
    out.push_back(ey * s);
  };
  if (joint_subset.empty()) {
    for (int j = 0; j < static_cast<int>(k.joints.size()); ++j) one(j);
  } else {
    for (int j : joint_subset) one(j);
  }
}

/// sqrt(lambda * precision_k) * (theta_k - mean_k) for every rotation
/// coordinate with positive precision.
template <class T>
void append_pose_prior_residuals(const T* rotations, const PosePrior& prior, double lambda,
                                 std::vector<T>& out) {
  for (Eigen::Index i = 0; i < prior.mean.size(); ++i) {
    if (prior.precision[i] <= 0.0) continue;
    out.push_back((rotations[i] - prior.mean[i]) * std::sqrt(lambda * prior.precision[i]));
  }
}

template <class T>
void append_shape_prior_residuals(const T* beta, int count, double lambda, std::vector<T>& out) {
  const double s = std::sqrt(lambda);
  for (int i = 0; i < count; ++i) out.push_back(beta[i] * s);
}

}  // namespace bodyfit
