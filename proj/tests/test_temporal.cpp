#include <cmath>
#include <random>

#include <doctest.h>

#include "bodyfit/energy.hpp"
#include "bodyfit/temporal.hpp"
#include "unit.hpp"

using namespace bodyfit;
using namespace bodyfit::testing;

TEST_CASE("temporal worked examples") { require_examples("temporal:"); }

TEST_CASE("DCT bases are orthonormal for every size") {
  double worst = 0.0;
  for (int n = 2; n <= 64; ++n) {
    const DctBasis full = dct_basis(n, n);
    worst = std::max(worst, (full.B.transpose() * full.B - Eigen::MatrixXd::Identity(n, n))
                                .cwiseAbs()
                                .maxCoeff());
    for (int k = 1; k <= n; ++k) {
      const DctBasis b = dct_basis(n, k);
      REQUIRE(b.B.cols() == k);
      CHECK(b.B == full.B.leftCols(k));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("DCT columns follow the orthonormal cosine formula") {
  const DctBasis b = dct_basis(7, 7);
  for (int j = 0; j < 7; ++j) {
    for (int k = 0; k < 7; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / 7.0) : std::sqrt(2.0 / 7.0);
      CHECK(b.B(j, k) == doctest::Approx(scale * std::cos(M_PI * k * (2 * j + 1) / 14.0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("trajectories equal per-frame forward passes") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(1);
  const ShapeParams s = random_beta(gen);
  std::vector<PoseParams> poses;
  for (int t = 0; t < 3; ++t) poses.push_back(random_theta(m, gen, 0.4));
  const TrajectoryMatrix traj = assemble_trajectories(m, s, poses);
  REQUIRE(traj.frames() == 3);
  REQUIRE(traj.joints() == m.num_joints());
  for (int t = 0; t < 3; ++t) {
    const Eigen::Matrix3Xd j = posed_joints(m, s, poses[t]);
    for (int e = 0; e < m.num_joints(); ++e) {
      for (int d = 0; d < 3; ++d) CHECK(traj.row(e, d)[t] == j(d, e));
    }
  }
}

TEST_CASE("a column outside the basis costs its robust sum at zero coefficients") {
  const DctBasis full = dct_basis(30, 30), b = dct_basis(30, 10);
  const double sigma = 0.05;
  for (double amplitude : {0.01, 0.5}) {
    const Eigen::VectorXd d = amplitude * full.B.col(10);
    double direct = 0.0;
    for (int j = 0; j < 30; ++j) direct += geman_mcclure(d[j], sigma);
    CHECK(temporal_energy(d, b, Eigen::VectorXd::Zero(10), sigma) ==
          doctest::Approx(direct).epsilon(1e-12));
    // The projection onto the basis is zero, and the robust refinement can
    // only lower the energy from there.
    CHECK((b.B.transpose() * d).cwiseAbs().maxCoeff() < 1e-12);
    const auto r = temporal_term(d, b, sigma);
    CHECK(r.energy <= direct + 1e-12);
  }
  // In the quadratic regime zero coefficients are optimal to first order.
  const Eigen::VectorXd small = 1e-5 * full.B.col(10);
  const auto r = temporal_term(small, b, sigma);
  CHECK(r.coefficients.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("two-frame window with one coefficient matches the component-wise sum") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(2);
  std::normal_distribution<double> noise(0.0, 10.0), coef(0.0, 0.3);
  const ShapeParams s = random_beta(gen);
  const auto cams = test_cameras(2);
  std::vector<PoseParams> poses;
  std::vector<std::vector<JointDetections>> dets;
  for (int t = 0; t < 2; ++t) {
    poses.push_back(random_theta(m, gen, 0.3));
    std::vector<JointDetections> frame;
    for (const auto& c : cams) {
      JointDetections d = exact_detections(c, posed_joints(m, s, random_theta(m, gen, 0.3)));
      for (Eigen::Index i = 0; i < d.positions.size(); ++i) d.positions.data()[i] += noise(gen);
      frame.push_back(d);
    }
    dets.push_back(frame);
  }
  const DctBasis basis = dct_basis(2, 1);
  DctCoefficients c;
  c.c.resize(1, 3 * m.num_joints());
  for (Eigen::Index i = 0; i < c.c.size(); ++i) c.c.data()[i] = coef(gen);
  FitConfig cfg;
  cfg.pose_prior = make_default_pose_prior(m);
  cfg.lambda_t = 2.5;
  cfg.lambda_t_axis = Eigen::Vector3d(1.0, 0.5, 0.25);

  double want = 0.0;
  for (int t = 0; t < 2; ++t) want += multiview_term(m, s, poses[t], cams, dets[t], cfg);
  const double b = 1.0 / std::sqrt(2.0);
  for (int t = 0; t < 2; ++t) {
    const Eigen::Matrix3Xd j = posed_joints(m, s, poses[t]);
    for (int e = 0; e < m.num_joints(); ++e) {
      for (int d = 0; d < 3; ++d) {
        want += cfg.lambda_t * cfg.lambda_t_axis[d] *
                geman_mcclure(j(d, e) - b * c.c(0, 3 * e + d), cfg.sigma2);
      }
    }
  }
  CHECK(stage_two_objective(m, s, poses, c, cams, dets, basis, cfg) ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("temporal energy is invariant to a constant shift") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 0.05);
  const DctBasis b = dct_basis(30, 10);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd d(30);
    for (int j = 0; j < 30; ++j) d[j] = 0.3 * std::sin(0.2 * j + trial) + n(gen);
    d[7] += 0.4;  // an outlier
    const double base = temporal_term(d, b, 0.05).energy;
    const Eigen::VectorXd moved = d.array() + 1.7;
    CHECK(temporal_term(moved, b, 0.05).energy == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("small residuals behave quadratically") {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> n(0.0, 1e-4);
  const DctBasis b = dct_basis(30, 10);
  Eigen::VectorXd d(30);
  for (int j = 0; j < 30; ++j) d[j] = 0.2 * std::cos(0.1 * j) + n(gen);
  const double sigma = 0.05;
  const double ls = (d - b.B * (b.B.transpose() * d)).squaredNorm() / (sigma * sigma);
  CHECK(temporal_term(d, b, sigma).energy == doctest::Approx(ls).epsilon(0.01));
}

TEST_CASE("robust coefficients never score worse than the projection") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0.0, 0.02);
  const DctBasis b = dct_basis(30, 10);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd d(30);
    for (int j = 0; j < 30; ++j) d[j] = 0.2 * std::sin(0.15 * j * (1 + trial % 3)) + n(gen);
    for (int k = 0; k < 3; ++k) d[(7 * trial + 11 * k) % 30] += 0.3;
    const Eigen::VectorXd projected = b.B.transpose() * d;
    const auto r = temporal_term(d, b, 0.05);
    CHECK(r.energy <= temporal_energy(d, b, projected, 0.05) + 1e-12);
    CHECK(r.energy == doctest::Approx(temporal_energy(d, b, r.coefficients, 0.05)).epsilon(1e-12));
  }
}

TEST_CASE("coefficient fitting weights each axis") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(6);
  const ShapeParams s = random_beta(gen);
  std::vector<PoseParams> poses;
  for (int t = 0; t < 6; ++t) poses.push_back(random_theta(m, gen, 0.3));
  const TrajectoryMatrix traj = assemble_trajectories(m, s, poses);
  const DctBasis b = dct_basis(6, 2);
  DctCoefficients c;
  const Eigen::Vector3d axis(1.0, 0.0, 2.0);
  const double total = fit_coefficients(traj, b, 0.05, axis, c);
  double want = 0.0;
  for (int e = 0; e < traj.joints(); ++e) {
    for (int d = 0; d < 3; ++d) {
      want += axis[d] * temporal_energy(traj.row(e, d), b, c.c.col(3 * e + d), 0.05);
    }
  }
  CHECK(total == doctest::Approx(want).epsilon(1e-12));
  CHECK(trajectory_energy(traj, b, c, 0.05, axis) == doctest::Approx(total).epsilon(1e-12));
}
