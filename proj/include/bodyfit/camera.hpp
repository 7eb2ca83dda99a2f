#pragma once

#include <array>
#include <optional>

#include <Eigen/Core>

#include "bodyfit/errors.hpp"
#include "bodyfit/rotation.hpp"

namespace bodyfit {

/// Minimum camera-frame depth (meters) for a projectable point.
inline constexpr double kMinDepth = 1e-6;

/// Ideal pinhole camera: x_cam = R p + t, pixel = f * (x/z, y/z) + c.
struct Camera {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  ///< world -> camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector2d focal{1.0, 1.0};
  Eigen::Vector2d principal_point = Eigen::Vector2d::Zero();
  int width = 1;
  int height = 1;

  void validate() const;

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

  /// Camera at `eye` looking at `target`; `up` is the world up direction,
  /// which maps to the image's -y axis.
  static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up, double focal, int width, int height);

  /// Default monocular camera for unknown calibration: identity extrinsics,
  /// focal = max(width, height), principal point at the image centre.
  static Camera default_for_image(int width, int height);
};

Eigen::Vector2d project(const Camera& cam, const Eigen::Vector3d& point);

/// d pixel / d point (2x3).
Eigen::Matrix<double, 2, 3> project_jacobian(const Camera& cam, const Eigen::Vector3d& point);

/// Unit-direction ray through a pixel, in world coordinates.
Eigen::Vector3d back_project_direction(const Camera& cam, const Eigen::Vector2d& pixel);

/// Scalar-generic projection; returns nullopt when the point is not in front
/// of the camera.
template <class T>
std::optional<std::array<T, 2>> project_point(const Camera& cam, const Vec3<T>& p) {
  const Vec3<T> xc = mul(cam.rotation, p);
  const T z = xc[2] + cam.translation.z();
  if (value_of(z) <= kMinDepth) return std::nullopt;
  const T inv_z = 1.0 / z;
  return std::array<T, 2>{(xc[0] + cam.translation.x()) * inv_z * cam.focal.x() +
                              cam.principal_point.x(),
                          (xc[1] + cam.translation.y()) * inv_z * cam.focal.y() +
                              cam.principal_point.y()};
}

}  // namespace bodyfit
