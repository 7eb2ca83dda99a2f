#include <cmath>
#include <random>

#include <doctest.h>

#include "bodyfit/energy.hpp"
#include "bodyfit/pipeline.hpp"
#include "bodyfit/solver.hpp"
#include "unit.hpp"

using namespace bodyfit;
using namespace bodyfit::testing;

namespace {

// Robust 1D location: residuals sqrt(rho_1(x - d_i)).
Objective robust_location(const std::vector<double>& data) {
  auto f = [data](const auto* x, auto& r) {
    using std::sqrt;
    for (double d : data) {
      const auto e = x[0] - d;
      r.push_back(e / sqrt(1.0 + e * e));
    }
  };
  return autodiff_objective(Eigen::VectorXd::Zero(1), {0}, f);
}

Objective random_quadratic(std::mt19937_64& gen, int m, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd A(m, n);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = g(gen);
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = g(gen);
  Objective obj;
  obj.dim = n;
  obj.residuals = [A, b](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x - b); };
  obj.linearize = [A, b](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    r = A * x - b;
    J = A;
  };
  return obj;
}

}  // namespace

TEST_CASE("solver worked examples") { require_examples("solver:"); }

TEST_CASE("robust location ignores the outlier and matches a grid search") {
  const std::vector<double> data{0.0, 0.1, -0.1, 10.0};
  const Objective obj = robust_location(data);
  const auto rep = minimize(obj, Eigen::VectorXd::Constant(1, 2.5));
  auto F = [&](double x) { return obj.residuals(Eigen::VectorXd::Constant(1, x)).squaredNorm(); };
  double best_x = 0.0, best = F(0.0);
  for (int i = -30000; i <= 120000; ++i) {
    const double x = 1e-4 * i;
    if (F(x) < best) {
      best = F(x);
      best_x = x;
    }
  }
  CHECK(std::abs(rep.x[0]) < 0.05);
  CHECK(std::abs(rep.x[0] - best_x) <= 1e-4);
  CHECK(rep.final_objective <= best + 1e-12);
}

TEST_CASE("accepted steps never increase the objective and the radius stays bounded") {
  auto f = [](const auto* x, auto& r) {
    r.push_back(10.0 * (x[1] - x[0] * x[0]));
    r.push_back(1.0 - x[0]);
    r.push_back(0.5 * (x[2] - x[1] * x[0]));
  };
  const Objective obj = autodiff_objective(Eigen::Vector3d::Zero(), {0, 1, 2}, f);
  SolveOptions opts;
  opts.max_radius = 0.7;
  const auto rep = minimize(obj, Eigen::Vector3d(-1.5, 2.0, 3.0), opts);
  for (std::size_t i = 1; i < rep.trace.size(); ++i) CHECK(rep.trace[i] <= rep.trace[i - 1]);
  for (const auto& it : rep.history) {
    CHECK(it.radius > 0.0);
    CHECK(it.radius <= opts.max_radius);
    CHECK(it.step_norm <= it.radius * (1.0 + 1e-12));
  }
  CHECK(rep.final_objective < 1e-12);
}

TEST_CASE("identical inputs give bit-identical reports") {
  std::mt19937_64 gen(1);
  const Objective obj = random_quadratic(gen, 8, 5);
  const auto a = minimize(obj, Eigen::VectorXd::Ones(5));
  const auto b = minimize(obj, Eigen::VectorXd::Ones(5));
  CHECK(a.x == b.x);
  CHECK(a.trace == b.trace);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("dogleg equals Gauss-Newton inside the trust region and stays on its boundary otherwise") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd J(7, 4);
    Eigen::VectorXd r(7);
    for (Eigen::Index i = 0; i < J.size(); ++i) J.data()[i] = g(gen);
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = g(gen);
    const Eigen::VectorXd gn = gauss_newton_step(J, r);
    const Eigen::VectorXd grad = J.transpose() * r;
    // Gauss-Newton step solves the normal equations.
    CHECK((J.transpose() * (J * gn + r)).norm() < 1e-9);
    CHECK((dogleg_step(J, grad, gn, 2.0 * gn.norm()) - gn).norm() < 1e-12);
    const double radius = 0.3 * gn.norm();
    const Eigen::VectorXd h = dogleg_step(J, grad, gn, radius);
    CHECK(h.norm() == doctest::Approx(radius).epsilon(1e-9));
    // The step decreases the linear model.
    CHECK((r + J * h).squaredNorm() < r.squaredNorm());
  }
}

TEST_CASE("finite-difference fallback is used without a Jacobian provider") {
  Objective obj;
  obj.dim = 2;
  obj.residuals = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(Eigen::Vector2d(x[0] * x[1] - 2.0, x[0] - 1.0));
  };
  const auto rep = minimize(obj, Eigen::Vector2d(3.0, 3.0));
  CHECK((rep.x - Eigen::Vector2d(1.0, 2.0)).norm() < 1e-6);
  Eigen::Matrix2d want;
  want << 2.0, 1.0, 1.0, 0.0;
  CHECK((jacobian(obj, Eigen::Vector2d(1.0, 2.0)) - want).norm() < 1e-6);
}

TEST_CASE("iteration budget and termination reasons are reported") {
  std::mt19937_64 gen(3);
  const Objective obj = random_quadratic(gen, 6, 3);
  SolveOptions opts;
  opts.max_iterations = 0;
  const auto none = minimize(obj, Eigen::VectorXd::Zero(3), opts);
  CHECK(none.termination == Termination::MaxIterations);
  CHECK(none.x == Eigen::VectorXd::Zero(3));
  const auto done = minimize(obj, Eigen::VectorXd::Zero(3));
  CHECK(done.termination != Termination::MaxIterations);
  CHECK(std::string(to_string(done.termination)).size() > 0);
}

TEST_CASE("full stage-one residuals have central-difference Jacobians") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(4);
  const auto cams = test_cameras(2);
  const PosePrior prior = make_default_pose_prior(m);
  for (int trial = 0; trial < 3; ++trial) {
    const ShapeParams s = random_beta(gen);
    const PoseParams truth = random_theta(m, gen, 0.3);
    std::vector<JointDetections> dets;
    std::vector<Mask> masks;
    std::vector<DistanceField> fields;
    for (const auto& c : cams) {
      dets.push_back(exact_detections(c, posed_joints(m, s, truth)));
      masks.push_back(rasterize(m, s, truth, c).mask);
      fields.push_back(signed_distance_field(masks.back()));
    }
    const Eigen::VectorXd x = pack_params(random_theta(m, gen, 0.3), random_beta(gen));
    const SilhouetteLinearization lin = linearize_silhouette(m, x, cams, masks, 2);
    FrameProblem p;
    p.model = &m;
    p.cameras = cams;
    p.detections = dets;
    p.pose_prior = &prior;
    p.lambda_theta = 1.0;
    p.lambda_beta = 0.5;
    p.silhouette = &lin;
    p.silhouette_fields = fields;
    p.silhouette_weight = 1e-3;
    const Objective obj = autodiff_objective(x, index_range(0, param_count(m)), p);
    CHECK(relative_error(jacobian(obj, x), finite_difference_jacobian(obj, x, 1e-6)) < 1e-4);
  }
}
