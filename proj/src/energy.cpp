#include "bodyfit/energy.hpp"

#include <cmath>
#include <string>

namespace bodyfit {

namespace {
constexpr double kPosePriorScale = 1e-3;
}  // namespace

PosePrior make_default_pose_prior(const BodyModel& model) {
  const int nj = model.num_joints();
  PosePrior prior;
  prior.mean = Eigen::VectorXd::Zero(3 * nj);
  prior.precision = Eigen::VectorXd::Zero(3 * nj);
  for (int j = 1; j < nj; ++j) {
    const std::string name = j < static_cast<int>(model.joint_names.size()) ? model.joint_names[j] : "";
    double p = 0.25;  // limbs
    if (name.rfind("spine", 0) == 0 || name.find("hip") != std::string::npos ||
        name == "neck" || name.find("collar") != std::string::npos) {
      p = 1.0;
    } else if (name == "head" || name.find("hand") != std::string::npos ||
               name.find("foot") != std::string::npos) {
      p = 0.5;
    }
    // Each joint's robust data term is bounded by its confidence, so the
    // prior must stay orders of magnitude weaker to avoid biasing
    // well-observed joints.
    prior.precision.segment<3>(3 * j).setConstant(kPosePriorScale * p);
  }
  return prior;
}

void FitConfig::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument(std::string(name) + " must be a nonnegative finite weight");
    }
  };
  nonneg(lambda_theta, "lambda_theta");
  nonneg(lambda_beta, "lambda_beta");
  nonneg(lambda_t, "lambda_t");
  nonneg(silhouette_weight, "silhouette_weight");
  for (int i = 0; i < 3; ++i) nonneg(lambda_t_axis[i], "lambda_t axis multiplier");
  for (const auto& [t, b] : schedule) {
    nonneg(t, "schedule lambda_theta");
    nonneg(b, "schedule lambda_beta");
  }
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw InvalidArgument("sigma1 and sigma2 must be positive");
  if (silhouette_stride < 1) throw InvalidArgument("silhouette stride must be positive");
  if (pose_prior.mean.size() != pose_prior.precision.size()) {
    throw InvalidArgument("pose prior mean/precision size mismatch");
  }
  if ((pose_prior.precision.array() < 0.0).any()) {
    throw InvalidArgument("pose prior precisions must be nonnegative");
  }
}

double geman_mcclure(double e, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("robustness constant sigma must be positive");
  const double e2 = e * e;
  return e2 / (sigma * sigma + e2);
}

double joint_term(const BodyModel& model, const ShapeParams& shape, const PoseParams& pose,
                  const Camera& cam, const JointDetections& dets, double sigma1) {
  if (dets.num_joints() != model.num_joints() || dets.positions.cols() != model.num_joints()) {
    throw InvalidArgument("detections have " + std::to_string(dets.num_joints()) +
                          " joints, model has " + std::to_string(model.num_joints()));
  }
  if (!(sigma1 > 0.0)) throw InvalidArgument("sigma1 must be positive");
  const Eigen::Matrix3Xd joints = posed_joints(model, shape, pose);
  double total = 0.0;
  for (int j = 0; j < model.num_joints(); ++j) {
    const double w = dets.confidence[j];
    if (w <= 0.0) continue;
    const Eigen::Vector3d xc = cam.rotation * joints.col(j) + cam.translation;
    if (!(xc.z() > kMinDepth)) {
      total += w;  // supremum of the robust loss
      continue;
    }
    const double residual = (project(cam, joints.col(j)) - dets.positions.col(j)).norm();
    total += w * geman_mcclure(residual, sigma1);
  }
  return total;
}

double pose_prior_term(const PoseParams& pose, const PosePrior& prior) {
  const Eigen::Index n = pose.joint_rotations.size();
  if (prior.mean.size() != n || prior.precision.size() != n) {
    throw InvalidArgument("pose prior dimension " + std::to_string(prior.mean.size()) +
                          " does not match pose dimension " + std::to_string(n));
  }
  const Eigen::Map<const Eigen::VectorXd> theta(pose.joint_rotations.data(), n);
  return (prior.precision.array() * (theta - prior.mean).array().square()).sum();
}

double shape_prior_term(const ShapeParams& shape) { return shape.beta.squaredNorm(); }

double multiview_term(const BodyModel& model, const ShapeParams& shape, const PoseParams& pose,
                      std::span<const Camera> cameras, std::span<const JointDetections> dets,
                      const FitConfig& config) {
  if (cameras.size() != dets.size()) {
    throw InvalidArgument("camera count " + std::to_string(cameras.size()) +
                          " does not match detection view count " + std::to_string(dets.size()));
  }
  double total = 0.0;
  if (config.lambda_theta > 0.0) total += config.lambda_theta * pose_prior_term(pose, config.pose_prior);
  if (config.lambda_beta > 0.0) total += config.lambda_beta * shape_prior_term(shape);
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    total += joint_term(model, shape, pose, cameras[v], dets[v], config.sigma1);
  }
  return total;
}

}  // namespace bodyfit
