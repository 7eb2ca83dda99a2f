#pragma once

// Windowed temporal prior: orthonormal DCT bases, per-joint trajectory
// assembly and the robust low-rank reconstruction term.

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bodyfit/body_model.hpp"
#include "bodyfit/camera.hpp"
#include "bodyfit/energy.hpp"

namespace bodyfit {

/// First K columns of the orthonormal DCT-II over N samples.
struct DctBasis {
  int N = 0;
  int K = 0;
  Eigen::MatrixXd B;  ///< N x K
};

DctBasis dct_basis(int N, int K);

/// Joint coordinates over a window: row 3e+d holds coordinate d of joint e
/// across the N frames.
struct TrajectoryMatrix {
  Eigen::MatrixXd data;  ///< 3J x N

  int frames() const { return static_cast<int>(data.cols()); }
  int joints() const { return static_cast<int>(data.rows() / 3); }
  Eigen::VectorXd row(int e, int d) const { return data.row(3 * e + d).transpose(); }
};

TrajectoryMatrix assemble_trajectories(const BodyModel& model, const ShapeParams& shape,
                                       std::span<const PoseParams> poses);

/// Per-(joint, axis) coefficient vectors, column 3e+d.
struct DctCoefficients {
  Eigen::MatrixXd c;  ///< K x 3J
};

struct TemporalTermResult {
  double energy = 0.0;
  Eigen::VectorXd coefficients;
};

/// sum_j rho_sigma(d_j - (B c)_j) for the given coefficients.
double temporal_energy(const Eigen::VectorXd& trajectory, const DctBasis& basis,
                       const Eigen::VectorXd& coefficients, double sigma2);

/// Minimizes the robust reconstruction error over c: starts from the
/// least-squares projection B^T d (or `warm_start` when it scores lower) and
/// refines by iteratively reweighted least squares, which never increases
/// the energy.
TemporalTermResult temporal_term(const Eigen::VectorXd& trajectory, const DctBasis& basis,
                                 double sigma2, const Eigen::VectorXd* warm_start = nullptr);

/// Re-optimizes every (joint, axis) coefficient vector of a window.
/// `previous` (if non-null) provides warm starts. Returns the weighted sum
/// sum_{e,d} axis_weight[d] * E_T.
double fit_coefficients(const TrajectoryMatrix& traj, const DctBasis& basis, double sigma2,
                        const Eigen::Vector3d& axis_weight, DctCoefficients& coeffs,
                        const DctCoefficients* previous = nullptr);

/// Weighted temporal energy for fixed coefficients.
double trajectory_energy(const TrajectoryMatrix& traj, const DctBasis& basis,
                         const DctCoefficients& coeffs, double sigma2,
                         const Eigen::Vector3d& axis_weight);

/// E_2 = sum_n E_M(shape, pose_n) + lambda_t * sum_{e,d} axis_d E_T(C_{e,d}, D_{e,d}).
/// `detections[n]` holds the per-view detections of frame n.
double stage_two_objective(const BodyModel& model, const ShapeParams& shape,
                           std::span<const PoseParams> poses, const DctCoefficients& coeffs,
                           std::span<const Camera> cameras,
                           std::span<const std::vector<JointDetections>> detections,
                           const DctBasis& basis, const FitConfig& config);

/// Temporal residuals of one frame against fixed reconstruction targets
/// (3 x J, the frame's row of B C): sqrt(lambda * axis_d) * r / sqrt(sigma^2 + r^2).
template <class T>
void append_temporal_residuals(const Kinematics<T>& k, const Eigen::Matrix3Xd& targets,
                               double sigma2, double lambda_t, const Eigen::Vector3d& axis_weight,
                               std::vector<T>& out) {
  using std::sqrt;
  for (std::size_t e = 0; e < k.joints.size(); ++e) {
    for (int d = 0; d < 3; ++d) {
      const double w = lambda_t * axis_weight[d];
      if (w <= 0.0) continue;
      const T r = k.joints[e][d] - targets(d, static_cast<Eigen::Index>(e));
      out.push_back(r * (std::sqrt(w) / sqrt(sigma2 * sigma2 + r * r)));
    }
  }
}

}  // namespace bodyfit
