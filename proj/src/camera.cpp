#include "bodyfit/camera.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/LU>

namespace bodyfit {

void Camera::validate() const {
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
  if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw ValidationError("camera rotation must be orthonormal with determinant +1");
  }
  if (!(focal.x() > 0.0 && focal.y() > 0.0)) throw ValidationError("camera focal must be positive");
  if (width <= 0 || height <= 0) throw ValidationError("camera image size must be positive");
  if (!translation.allFinite() || !principal_point.allFinite()) {
    throw ValidationError("camera parameters must be finite");
  }
}

Camera Camera::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up, double focal, int width, int height) {
  const Eigen::Vector3d z = (target - eye).normalized();
  const Eigen::Vector3d x = z.cross(up).normalized();  // image right
  const Eigen::Vector3d y = z.cross(x);                // image down
  Camera cam;
  cam.rotation.row(0) = x.transpose();
  cam.rotation.row(1) = y.transpose();
  cam.rotation.row(2) = z.transpose();
  cam.translation = -cam.rotation * eye;
  cam.focal = {focal, focal};
  cam.principal_point = {0.5 * width, 0.5 * height};
  cam.width = width;
  cam.height = height;
  return cam;
}

Camera Camera::default_for_image(int width, int height) {
  Camera cam;
  const double f = std::max(width, height);
  cam.focal = {f, f};
  cam.principal_point = {0.5 * width, 0.5 * height};
  cam.width = width;
  cam.height = height;
  return cam;
}

namespace {

Eigen::Vector3d to_camera(const Camera& cam, const Eigen::Vector3d& point) {
  const Eigen::Vector3d xc = cam.rotation * point + cam.translation;
  if (!(xc.z() > kMinDepth)) {
    throw BehindCamera("point at camera depth " + std::to_string(xc.z()) +
                       " is not in front of the camera");
  }
  return xc;
}

}  // namespace

Eigen::Vector2d project(const Camera& cam, const Eigen::Vector3d& point) {
  const Eigen::Vector3d xc = to_camera(cam, point);
  return cam.focal.cwiseProduct(xc.head<2>() / xc.z()) + cam.principal_point;
}

Eigen::Matrix<double, 2, 3> project_jacobian(const Camera& cam, const Eigen::Vector3d& point) {
  const Eigen::Vector3d xc = to_camera(cam, point);
  const double iz = 1.0 / xc.z();
  Eigen::Matrix<double, 2, 3> dpix_dxc;
  dpix_dxc << cam.focal.x() * iz, 0.0, -cam.focal.x() * xc.x() * iz * iz,
      0.0, cam.focal.y() * iz, -cam.focal.y() * xc.y() * iz * iz;
  return dpix_dxc * cam.rotation;
}

Eigen::Vector3d back_project_direction(const Camera& cam, const Eigen::Vector2d& pixel) {
  const Eigen::Vector3d ray_cam((pixel.x() - cam.principal_point.x()) / cam.focal.x(),
                                (pixel.y() - cam.principal_point.y()) / cam.focal.y(), 1.0);
  return (cam.rotation.transpose() * ray_cam).normalized();
}

}  // namespace bodyfit
