#include <algorithm>
#include <random>

#include <doctest.h>

#include "bodyfit/errors.hpp"
#include "bodyfit/pipeline.hpp"
#include "bodyfit/rotation.hpp"
#include "bodyfit/synth.hpp"
#include "unit.hpp"

using namespace bodyfit;
using namespace bodyfit::testing;

namespace {

FrameObservations observe(const BodyModel& m, const ShapeParams& s, const PoseParams& p,
                          std::span<const Camera> cams) {
  FrameObservations obs;
  for (const auto& c : cams) obs.detections.push_back(exact_detections(c, posed_joints(m, s, p)));
  return obs;
}

int joint_index(const BodyModel& m, const std::string& name) {
  const auto it = std::find(m.joint_names.begin(), m.joint_names.end(), name);
  REQUIRE(it != m.joint_names.end());
  return static_cast<int>(it - m.joint_names.begin());
}

// A smooth window: every joint angle follows a slow sinusoid.
std::vector<PoseParams> smooth_motion(const BodyModel& m, std::mt19937_64& gen, int frames) {
  const PoseParams base = random_theta(m, gen, 0.25);
  std::uniform_real_distribution<double> phase(0.0, 6.0);
  Eigen::MatrixXd ph(3, m.num_joints());
  for (Eigen::Index i = 0; i < ph.size(); ++i) ph.data()[i] = phase(gen);
  std::vector<PoseParams> out;
  for (int t = 0; t < frames; ++t) {
    PoseParams p = base;
    p.joint_rotations.array() += 0.1 * (0.2 * t + ph.array()).sin();
    p.root_translation.x() += 0.01 * t;
    out.push_back(p);
  }
  return out;
}

PipelineConfig small_config(const BodyModel& m) {
  PipelineConfig c = default_pipeline_config(m);
  c.silhouette = false;
  c.solve.max_iterations = 8;
  c.sigma1_anneal = {10.0};
  c.stage_two_rounds = 3;
  return c;
}

}  // namespace

TEST_CASE("pipeline worked examples") { require_examples("pipeline:"); }

TEST_CASE("median shape matches a sort-based oracle") {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<int> count(1, 12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ShapeParams> shapes(static_cast<std::size_t>(count(gen)));
    for (auto& s : shapes) s = random_beta(gen);
    const ShapeParams med = median_shape(shapes);
    for (int k = 0; k < kShapeDim; ++k) {
      std::vector<double> v;
      for (const auto& s : shapes) v.push_back(s.beta[k]);
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      const double want = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
      CHECK(med.beta[k] == doctest::Approx(want).epsilon(1e-15));
    }
  }
}

TEST_CASE("pose interpolation hits its ends and halves a shared rotation") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(2);
  const PoseParams a = random_theta(m, gen, 0.5), b = random_theta(m, gen, 0.5);
  CHECK((interpolate_pose(a, b, 0.0).joint_rotations - a.joint_rotations).norm() < 1e-12);
  CHECK((interpolate_pose(a, b, 1.0).joint_rotations - b.joint_rotations).norm() < 1e-12);
  CHECK((interpolate_pose(a, b, 0.25).root_translation -
         (0.75 * a.root_translation + 0.25 * b.root_translation))
            .norm() < 1e-15);
  PoseParams x = PoseParams::rest(m.num_joints()), y = x;
  x.joint_rotations.col(3) = Eigen::Vector3d(0.0, 0.0, 0.2);
  y.joint_rotations.col(3) = Eigen::Vector3d(0.0, 0.0, 1.0);
  CHECK((interpolate_pose(x, y, 0.5).joint_rotations.col(3) - Eigen::Vector3d(0.0, 0.0, 0.6)).norm() <
        1e-12);
}

TEST_CASE("missing frames are filled from their fitted neighbours") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(3);
  std::vector<PoseParams> poses;
  for (int t = 0; t < 7; ++t) poses.push_back(random_theta(m, gen, 0.4));
  const std::vector<bool> fitted{false, true, false, false, true, true, false};
  const std::vector<PoseParams> original = poses;
  interpolate_missing(poses, fitted);
  CHECK(poses[0].joint_rotations == original[1].joint_rotations);
  CHECK(poses[6].joint_rotations == original[5].joint_rotations);
  for (int t : {1, 4, 5}) CHECK(poses[t].joint_rotations == original[t].joint_rotations);
  const PoseParams want2 = interpolate_pose(original[1], original[4], 1.0 / 3.0);
  const PoseParams want3 = interpolate_pose(original[1], original[4], 2.0 / 3.0);
  CHECK((poses[2].joint_rotations - want2.joint_rotations).norm() < 1e-12);
  CHECK((poses[3].joint_rotations - want3.joint_rotations).norm() < 1e-12);
  CHECK((poses[2].root_translation - want2.root_translation).norm() < 1e-15);
}

TEST_CASE("an unfittable frame is interpolated and flagged") {
  const BodyModel& m = shared_model();
  SynthOptions so;
  so.seed = 4;
  so.views = 2;
  so.frames = 4;
  so.masks = false;
  auto data = synth_generate(m, so);
  for (auto& d : data.bundle.observations[2].detections) d = JointDetections::missing(m.num_joints());
  PipelineConfig cfg = small_config(m);
  cfg.stage_two = false;
  const auto fit = fit_sequence(m, data.bundle.observations, data.bundle.cameras, cfg);
  REQUIRE(fit.frames() == 4);
  CHECK_FALSE(fit.fitted[2]);
  CHECK(fit.fitted[1]);
  CHECK(fit.fitted[3]);
  const PoseParams want = interpolate_pose(fit.poses[1], fit.poses[3], 0.5);
  CHECK((fit.poses[2].joint_rotations - want.joint_rotations).norm() < 1e-12);
}

TEST_CASE("stage-two energy never increases across rounds") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(5);
  std::normal_distribution<double> noise(0.0, 3.0);
  const ShapeParams s = random_beta(gen);
  const auto cams = test_cameras(2);
  const auto truth = smooth_motion(m, gen, 8);
  std::vector<FrameObservations> obs;
  std::vector<PoseParams> init;
  for (const auto& p : truth) {
    auto o = observe(m, s, p, cams);
    for (auto& d : o.detections) {
      for (Eigen::Index i = 0; i < d.positions.size(); ++i) d.positions.data()[i] += noise(gen);
    }
    obs.push_back(o);
    PoseParams start = p;
    start.joint_rotations.array() += 0.03;
    init.push_back(start);
  }
  PipelineConfig cfg = default_pipeline_config(m);
  cfg.window = 8;
  cfg.dct_k = 4;
  cfg.stage_two_rounds = 6;
  const WindowFit w = fit_window(m, s, obs, cams, init, cfg);
  REQUIRE(w.objective_trace.size() >= 2);
  for (std::size_t i = 1; i < w.objective_trace.size(); ++i) {
    CHECK(w.objective_trace[i] <= w.objective_trace[i - 1] * (1.0 + 1e-12));
  }
}

TEST_CASE("temporal coupling repairs a left/right swap in one frame") {
  const BodyModel& m = shared_model();
  std::mt19937_64 gen(6);
  const ShapeParams s = random_beta(gen);
  const auto cams = test_cameras(2);
  const auto truth = smooth_motion(m, gen, 10);
  std::vector<FrameObservations> obs;
  for (const auto& p : truth) obs.push_back(observe(m, s, p, cams));
  const int bad = 5;
  swap_left_right(m, obs[bad].detections[1]);
  PipelineConfig cfg = default_pipeline_config(m);
  cfg.window = 10;
  cfg.dct_k = 4;
  PipelineConfig flat = cfg;
  flat.fit.lambda_t = 0.0;
  const WindowFit coupled = fit_window(m, s, obs, cams, truth, cfg);
  const WindowFit alone = fit_window(m, s, obs, cams, truth, flat);
  const Eigen::Matrix3Xd want = posed_joints(m, s, truth[bad]);
  const Eigen::Matrix3Xd a = posed_joints(m, s, coupled.poses[bad]);
  const Eigen::Matrix3Xd b = posed_joints(m, s, alone.poses[bad]);
  double err_coupled = 0.0, err_alone = 0.0;
  for (const char* name : {"left_ankle", "right_ankle", "left_knee", "right_knee"}) {
    const int j = joint_index(m, name);
    err_coupled += (a.col(j) - want.col(j)).norm();
    err_alone += (b.col(j) - want.col(j)).norm();
  }
  CHECK(err_alone > 0.0);
  CHECK(err_coupled < err_alone);
}

TEST_CASE("worker count does not change the result") {
  const BodyModel& m = shared_model();
  SynthOptions so;
  so.seed = 7;
  so.views = 2;
  so.frames = 6;
  so.noise_px = 2.0;
  so.masks = false;
  const auto data = synth_generate(m, so);
  PipelineConfig cfg = small_config(m);
  cfg.window = 3;
  cfg.dct_k = 2;
  const auto one = fit_sequence(m, data.bundle.observations, data.bundle.cameras, cfg);
  cfg.threads = 3;
  const auto three = fit_sequence(m, data.bundle.observations, data.bundle.cameras, cfg);
  REQUIRE(one.frames() == three.frames());
  CHECK(one.shape.beta == three.shape.beta);
  for (int t = 0; t < one.frames(); ++t) {
    CHECK(one.poses[t].joint_rotations == three.poses[t].joint_rotations);
    CHECK(one.poses[t].root_translation == three.poses[t].root_translation);
  }
}

TEST_CASE("configuration validation rejects bad windows") {
  PipelineConfig cfg = default_pipeline_config(shared_model());
  CHECK_NOTHROW(cfg.validate());
  PipelineConfig bad = cfg;
  bad.window = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = cfg;
  bad.dct_k = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = cfg;
  bad.threads = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = cfg;
  bad.fit.schedule.clear();
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = cfg;
  bad.sigma1_anneal = {2.0, 4.0};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
