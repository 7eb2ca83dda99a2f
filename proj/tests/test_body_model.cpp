#include <cmath>
#include <filesystem>
#include <random>

#include <Eigen/Geometry>
#include <doctest.h>

#include "bodyfit/body_model.hpp"
#include "bodyfit/errors.hpp"
#include "bodyfit/solver.hpp"
#include "unit.hpp"

using namespace bodyfit;
using namespace bodyfit::testing;

namespace {

// Three vertices, one joint, every channel random.
BodyModel toy_triangle(std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  BodyModel m;
  m.template_vertices = Eigen::Matrix3Xd::Zero(3, 3);
  for (Eigen::Index i = 0; i < 9; ++i) m.template_vertices.data()[i] = n(gen);
  m.faces = {{0, 1, 2}};
  for (int s = 0; s < kShapeDim; ++s) {
    Eigen::Matrix3Xd b(3, 3);
    for (Eigen::Index i = 0; i < 9; ++i) b.data()[i] = n(gen);
    m.shape_blendshapes.push_back(b);
  }
  m.parents = {-1};
  m.joint_regressor = {{{0, 0.2}, {1, 0.3}, {2, 0.5}}};
  m.skinning_weights = {{{0, 1.0}}, {{0, 1.0}}, {{0, 1.0}}};
  m.joint_names = {"root"};
  m.finalize();
  return m;
}

// Root at the origin, child joint at (1, 0, 0); one vertex skinned to each.
BodyModel two_joint_chain() {
  BodyModel m;
  m.template_vertices = Eigen::Matrix3Xd(3, 3);
  m.template_vertices << 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0;
  m.faces = {{0, 1, 2}};
  m.shape_blendshapes.assign(kShapeDim, Eigen::Matrix3Xd::Zero(3, 3));
  m.parents = {-1, 0};
  m.joint_regressor = {{{0, 1.0}}, {{1, 1.0}}};
  m.skinning_weights = {{{0, 1.0}}, {{1, 1.0}}, {{1, 1.0}}};
  m.joint_names = {"root", "child"};
  m.finalize();
  return m;
}

}  // namespace

TEST_CASE("body model worked examples") { require_examples("model:"); }

TEST_CASE("different seeds give different templates") {
  const BodyModel a = make_default_model(0), b = make_default_model(1);
  REQUIRE(a.num_vertices() == b.num_vertices());
  CHECK((a.template_vertices - b.template_vertices).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("default model is valid with the standard topology") {
  const BodyModel& m = shared_model();
  CHECK_NOTHROW(m.validate());
  CHECK(m.num_joints() == 24);
  CHECK(m.num_shape() == kShapeDim);
  CHECK(m.left_right_pairs.size() > 0);
}

TEST_CASE("shaping a toy model matches the hand-expanded sum") {
  std::mt19937_64 gen(1);
  const BodyModel m = toy_triangle(gen);
  const ShapeParams s = random_beta(gen);
  const ShapedTemplate t = shape_template(m, s);
  for (int v = 0; v < 3; ++v) {
    for (int d = 0; d < 3; ++d) {
      double want = m.template_vertices(d, v);
      for (int k = 0; k < kShapeDim; ++k) want += s.beta[k] * m.shape_blendshapes[k](d, v);
      CHECK(t.vertices(d, v) == doctest::Approx(want).epsilon(1e-12));
    }
  }
  const Eigen::Vector3d joint =
      0.2 * t.vertices.col(0) + 0.3 * t.vertices.col(1) + 0.5 * t.vertices.col(2);
  CHECK((t.joints.col(0) - joint).norm() < 1e-12);
}

TEST_CASE("two-joint chain matches hand-composed rotations") {
  const BodyModel m = two_joint_chain();
  PoseParams p = PoseParams::rest(2);
  p.joint_rotations.col(1) = Eigen::Vector3d(0.0, 0.0, M_PI / 2);
  PosedBody b = forward(m, ShapeParams{}, p);
  CHECK((b.vertices.col(2) - Eigen::Vector3d(1.0, 1.0, 0.0)).norm() < 1e-12);
  CHECK((b.joints.col(1) - Eigen::Vector3d(1.0, 0.0, 0.0)).norm() < 1e-12);

  // A root rotation and translation on top compose as R0 (R1 (v - j1) + j1) + t.
  const Eigen::Vector3d w0(0.3, -0.4, 0.2), w1(-0.5, 0.1, 0.7), t(0.1, 0.2, -0.3);
  p.joint_rotations.col(0) = w0;
  p.joint_rotations.col(1) = w1;
  p.root_translation = t;
  const Eigen::Matrix3d R0 = Eigen::AngleAxisd(w0.norm(), w0.normalized()).toRotationMatrix();
  const Eigen::Matrix3d R1 = Eigen::AngleAxisd(w1.norm(), w1.normalized()).toRotationMatrix();
  const Eigen::Vector3d j1(1.0, 0.0, 0.0), v(2.0, 0.0, 0.0);
  b = forward(m, ShapeParams{}, p);
  CHECK((b.vertices.col(2) - (R0 * (R1 * (v - j1) + j1) + t)).norm() < 1e-12);
  CHECK((b.joints.col(1) - (R0 * j1 + t)).norm() < 1e-12);
}

TEST_CASE("forward kinematics is equivariant under a global rigid motion") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 5; ++trial) {
    const ShapeParams s = random_beta(gen);
    PoseParams p = random_theta(m, gen, 0.4);
    const PosedBody a = forward(m, s, p);
    const Eigen::Vector3d axis = Eigen::Vector3d::Random();
    const Eigen::Matrix3d R = Eigen::AngleAxisd(1.3, axis.normalized()).toRotationMatrix();
    // Rotating about the rest root joint keeps its position fixed.
    const Eigen::Vector3d root = shape_template(m, s).joints.col(0);
    const Eigen::Matrix3d R_root =
        R * Eigen::AngleAxisd(p.joint_rotations.col(0).norm(),
                              p.joint_rotations.col(0).normalized())
                .toRotationMatrix();
    PoseParams q = p;
    const Eigen::AngleAxisd aa(R_root);
    q.joint_rotations.col(0) = aa.angle() * aa.axis();
    q.root_translation = R * (p.root_translation + root) - root;
    const PosedBody b = forward(m, s, q);
    const Eigen::Vector3d origin = p.root_translation + root;
    const Eigen::Matrix3Xd want_j = (R * (a.joints.colwise() - origin)).colwise() + R * origin;
    const Eigen::Matrix3Xd want_v = (R * (a.vertices.colwise() - origin)).colwise() + R * origin;
    CHECK((b.joints - want_j).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((b.vertices - want_v).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("rest-pose body is affine in the shape coefficients") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(3);
  const ShapeParams a = random_beta(gen), b = random_beta(gen);
  ShapeParams sum;
  sum.beta = a.beta + b.beta;
  const PoseParams rest = PoseParams::rest(m.num_joints());
  const Eigen::Matrix3Xd d = forward(m, sum, rest).vertices - forward(m, a, rest).vertices -
                             forward(m, b, rest).vertices +
                             forward(m, ShapeParams{}, rest).vertices;
  CHECK(d.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("regressing the rest-pose vertices reproduces the joints") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(4);
  PoseParams p = PoseParams::rest(m.num_joints());
  p.root_translation = Eigen::Vector3d(0.2, -0.1, 0.5);
  const PosedBody b = forward(m, random_beta(gen), p);
  for (int j = 0; j < m.num_joints(); ++j) {
    Eigen::Vector3d r = Eigen::Vector3d::Zero();
    for (const auto& [v, w] : m.joint_regressor[j]) r += w * b.vertices.col(v);
    CHECK((r - b.joints.col(j)).norm() < 1e-9);
  }
}

TEST_CASE("joint Jacobian matches central differences") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(5);
  auto joints = [&m](const auto* x, auto& r) {
    const auto k = compute_kinematics(m, x);
    for (const auto& j : k.joints) {
      for (int d = 0; d < 3; ++d) r.push_back(j[d]);
    }
  };
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd x = pack_params(random_theta(m, gen, 0.5), random_beta(gen));
    const Objective obj = autodiff_objective(x, index_range(0, param_count(m)), joints);
    CHECK(relative_error(jacobian(obj, x), finite_difference_jacobian(obj, x, 1e-6)) < 1e-5);
  }
}

TEST_CASE("parameter packing round-trips") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(6);
  const PoseParams p = random_theta(m, gen, 0.5);
  const ShapeParams s = random_beta(gen);
  const Eigen::VectorXd x = pack_params(p, s);
  REQUIRE(x.size() == param_count(m));
  PoseParams q;
  ShapeParams t;
  unpack_params(m, x, q, t);
  CHECK(q.root_translation == p.root_translation);
  CHECK(q.joint_rotations == p.joint_rotations);
  CHECK(t.beta == s.beta);
}

TEST_CASE("model files round-trip and malformed models are rejected") {
  const auto dir = std::filesystem::temp_directory_path() / "bodyfit_model_roundtrip";
  std::filesystem::create_directories(dir);
  const BodyModel& m = shared_model();
  save_model(m, (dir / "m.json").string());
  const BodyModel back = load_model((dir / "m.json").string());
  CHECK(back.template_vertices == m.template_vertices);
  CHECK(back.parents == m.parents);
  CHECK(back.faces == m.faces);
  CHECK(back.joint_names == m.joint_names);

  BodyModel bad = m;
  bad.parents[3] = 5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = m;
  bad.shape_blendshapes.pop_back();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  std::filesystem::remove_all(dir);
}
