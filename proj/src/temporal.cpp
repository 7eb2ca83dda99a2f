#include "bodyfit/temporal.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

namespace bodyfit {

DctBasis dct_basis(int N, int K) {
  if (N < 1) throw InvalidArgument("DCT window length must be positive");
  if (K < 1 || K > N) {
    throw InvalidArgument("DCT component count " + std::to_string(K) + " outside [1, " +
                          std::to_string(N) + "]");
  }
  DctBasis basis;
  basis.N = N;
  basis.K = K;
  basis.B.resize(N, K);
  for (int k = 0; k < K; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / N) : std::sqrt(2.0 / N);
    for (int n = 0; n < N; ++n) {
      basis.B(n, k) = s * std::cos(std::numbers::pi * (2.0 * n + 1.0) * k / (2.0 * N));
    }
  }
  return basis;
}

TrajectoryMatrix assemble_trajectories(const BodyModel& model, const ShapeParams& shape,
                                       std::span<const PoseParams> poses) {
  if (poses.empty()) throw InvalidArgument("trajectory window must contain at least one frame");
  const int nj = model.num_joints();
  TrajectoryMatrix traj;
  traj.data.resize(3 * nj, static_cast<Eigen::Index>(poses.size()));
  for (std::size_t n = 0; n < poses.size(); ++n) {
    const Eigen::Matrix3Xd joints = posed_joints(model, shape, poses[n]);
    traj.data.col(static_cast<Eigen::Index>(n)) =
        Eigen::Map<const Eigen::VectorXd>(joints.data(), 3 * nj);
  }
  return traj;
}

namespace {

void check_dims(const Eigen::VectorXd& trajectory, const DctBasis& basis) {
  if (trajectory.size() != basis.N) {
    throw InvalidArgument("trajectory length " + std::to_string(trajectory.size()) +
                          " does not match basis length " + std::to_string(basis.N));
  }
}

double robust_sum(const Eigen::VectorXd& r, double sigma2) {
  const double s2 = sigma2 * sigma2;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) total += r[i] * r[i] / (s2 + r[i] * r[i]);
  return total;
}

}  // namespace

double temporal_energy(const Eigen::VectorXd& trajectory, const DctBasis& basis,
                       const Eigen::VectorXd& coefficients, double sigma2) {
  check_dims(trajectory, basis);
  if (coefficients.size() != basis.K) {
    throw InvalidArgument("coefficient count does not match basis component count");
  }
  if (!(sigma2 > 0.0)) throw InvalidArgument("sigma2 must be positive");
  return robust_sum(trajectory - basis.B * coefficients, sigma2);
}

TemporalTermResult temporal_term(const Eigen::VectorXd& trajectory, const DctBasis& basis,
                                 double sigma2, const Eigen::VectorXd* warm_start) {
  check_dims(trajectory, basis);
  if (!(sigma2 > 0.0)) throw InvalidArgument("sigma2 must be positive");
  const double s2 = sigma2 * sigma2;

  TemporalTermResult best;
  best.coefficients = basis.B.transpose() * trajectory;
  best.energy = robust_sum(trajectory - basis.B * best.coefficients, sigma2);
  if (warm_start && warm_start->size() == basis.K) {
    const double e = robust_sum(trajectory - basis.B * *warm_start, sigma2);
    if (e < best.energy) {
      best.energy = e;
      best.coefficients = *warm_start;
    }
  }

  // Majorize-minimize: rho is concave in r^2, so the weighted least-squares
  // surrogate with w = sigma^2 / (sigma^2 + r^2)^2 bounds it from above.
  Eigen::VectorXd w(basis.N);
  for (int iter = 0; iter < 100 && best.energy > 0.0; ++iter) {
    const Eigen::VectorXd r = trajectory - basis.B * best.coefficients;
    for (int n = 0; n < basis.N; ++n) {
      const double q = s2 + r[n] * r[n];
      w[n] = s2 / (q * q);
    }
    const Eigen::MatrixXd BtW = basis.B.transpose() * w.asDiagonal();
    const Eigen::VectorXd c = (BtW * basis.B).ldlt().solve(BtW * trajectory);
    if (!c.allFinite()) break;
    const double e = robust_sum(trajectory - basis.B * c, sigma2);
    if (!(e < best.energy)) break;
    const bool small = best.energy - e <= 1e-14 * best.energy;
    best.energy = e;
    best.coefficients = c;
    if (small) break;
  }
  return best;
}

double fit_coefficients(const TrajectoryMatrix& traj, const DctBasis& basis, double sigma2,
                        const Eigen::Vector3d& axis_weight, DctCoefficients& coeffs,
                        const DctCoefficients* previous) {
  const int rows = static_cast<int>(traj.data.rows());
  coeffs.c.resize(basis.K, rows);
  const bool warm = previous && previous->c.rows() == basis.K && previous->c.cols() == rows;
  double total = 0.0;
  for (int i = 0; i < rows; ++i) {
    const Eigen::VectorXd d = traj.data.row(i).transpose();
    Eigen::VectorXd prev;
    if (warm) prev = previous->c.col(i);
    const TemporalTermResult res = temporal_term(d, basis, sigma2, warm ? &prev : nullptr);
    coeffs.c.col(i) = res.coefficients;
    total += axis_weight[i % 3] * res.energy;
  }
  return total;
}

double trajectory_energy(const TrajectoryMatrix& traj, const DctBasis& basis,
                         const DctCoefficients& coeffs, double sigma2,
                         const Eigen::Vector3d& axis_weight) {
  if (coeffs.c.rows() != basis.K || coeffs.c.cols() != traj.data.rows()) {
    throw InvalidArgument("DCT coefficient matrix has wrong dimensions");
  }
  if (traj.frames() != basis.N) {
    throw InvalidArgument("trajectory length does not match basis length");
  }
  if (!(sigma2 > 0.0)) throw InvalidArgument("sigma2 must be positive");
  const Eigen::MatrixXd residual = traj.data - (basis.B * coeffs.c).transpose();
  double total = 0.0;
  for (Eigen::Index i = 0; i < residual.rows(); ++i) {
    total += axis_weight[i % 3] * robust_sum(residual.row(i).transpose(), sigma2);
  }
  return total;
}

double stage_two_objective(const BodyModel& model, const ShapeParams& shape,
                           std::span<const PoseParams> poses, const DctCoefficients& coeffs,
                           std::span<const Camera> cameras,
                           std::span<const std::vector<JointDetections>> detections,
                           const DctBasis& basis, const FitConfig& config) {
  if (poses.size() != detections.size()) {
    throw InvalidArgument("window has " + std::to_string(poses.size()) + " poses but " +
                          std::to_string(detections.size()) + " detection frames");
  }
  double total = 0.0;
  for (std::size_t n = 0; n < poses.size(); ++n) {
    total += multiview_term(model, shape, poses[n], cameras, detections[n], config);
  }
  if (config.lambda_t > 0.0) {
    const TrajectoryMatrix traj = assemble_trajectories(model, shape, poses);
    total += config.lambda_t *
             trajectory_energy(traj, basis, coeffs, config.sigma2, config.lambda_t_axis);
  }
  return total;
}

}  // namespace bodyfit
