#pragma once

// Check suites shared by the unit tests and the acceptance binary: the
// worked examples, the brute-force oracles and the derivative comparisons.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "bodyfit/body_model.hpp"
#include "bodyfit/camera.hpp"
#include "bodyfit/energy.hpp"
#include "bodyfit/silhouette.hpp"

namespace bodyfit::testing {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Every worked example with a closed-form expected outcome, optionally only
/// those whose name starts with `prefix` (e.g. "camera:").
std::vector<CheckResult> example_checks(std::string_view prefix = {});

// Independent oracles.
DistanceField brute_force_distance(const Mask& mask);
double brute_force_silhouette_term(const Mask& rendered, const Mask& observed, int stride);
/// Similarity alignment of X onto Y computed directly from an SVD of the
/// cross-covariance.
Eigen::Matrix3Xd svd_procrustes(const Eigen::Matrix3Xd& X, const Eigen::Matrix3Xd& Y);
Mask random_mask(int width, int height, double density, std::uint64_t seed);

CheckResult distance_transform_oracle(int count, std::uint64_t seed);
CheckResult silhouette_term_oracle(int count, std::uint64_t seed);
CheckResult procrustes_oracle(int count, std::uint64_t seed);

/// Largest relative Frobenius difference between the dual-number Jacobian
/// and central differences over `states` random states.
struct DerivativeStats {
  double max_relative_error = 0.0;
  int states = 0;
};
DerivativeStats multiview_jacobian_check(int states, std::uint64_t seed);
DerivativeStats silhouette_jacobian_check(int states, std::uint64_t seed);
DerivativeStats stage_two_jacobian_check(int states, std::uint64_t seed);

/// Relative Frobenius error of `a` against reference `b`.
double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// A 4-view ring scene around the default model, used by several suites.
std::vector<Camera> test_cameras(int views);
/// Detections equal to exact projections of `joints`, confidence 1.
JointDetections exact_detections(const Camera& cam, const Eigen::Matrix3Xd& joints);

}  // namespace bodyfit::testing
