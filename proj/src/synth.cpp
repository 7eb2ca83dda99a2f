#include "bodyfit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

namespace bodyfit {

namespace {

double uniform(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

// Portable standard normal (Box-Muller on the 53-bit uniforms above), so a
// seed produces the same bundle with any standard library.
double normal(std::mt19937_64& gen) {
  double u = uniform(gen);
  while (u <= 0.0) u = uniform(gen);
  const double v = uniform(gen);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

struct AxisMotion {
  double offset = 0.0;
  double amplitude = 0.0;
};

// Per joint and axis: centre value and swing (radians) of the synthetic
// motion. Leaf joints stay at rest; knees and elbows are hinges.
std::vector<std::array<AxisMotion, 3>> motion_table(int nj, double yaw) {
  std::vector<std::array<AxisMotion, 3>> m(nj);
  auto set = [&](int j, AxisMotion x, AxisMotion y, AxisMotion z) {
    if (j < nj) m[j] = {x, y, z};
  };
  set(0, {0.0, 0.1}, {0.0, yaw}, {0.0, 0.1});
  for (int j : {3, 6, 9}) set(j, {0.0, 0.12}, {0.0, 0.12}, {0.0, 0.12});
  set(1, {-0.2, 0.4}, {0.0, 0.15}, {0.1, 0.1});
  set(2, {-0.2, 0.4}, {0.0, 0.15}, {-0.1, 0.1});
  set(4, {0.5, 0.4}, {}, {});
  set(5, {0.5, 0.4}, {}, {});
  set(7, {0.0, 0.2}, {}, {0.0, 0.1});
  set(8, {0.0, 0.2}, {}, {0.0, 0.1});
  set(12, {0.0, 0.15}, {0.0, 0.15}, {0.0, 0.15});
  set(13, {0.0, 0.1}, {0.0, 0.1}, {0.0, 0.1});
  set(14, {0.0, 0.1}, {0.0, 0.1}, {0.0, 0.1});
  set(16, {0.0, 0.2}, {0.0, 0.3}, {-0.7, 0.4});
  set(17, {0.0, 0.2}, {0.0, 0.3}, {0.7, 0.4});
  set(18, {}, {-0.6, 0.4}, {});
  set(19, {}, {0.6, 0.4}, {});
  set(20, {0.0, 0.15}, {0.0, 0.15}, {0.0, 0.15});
  set(21, {0.0, 0.15}, {0.0, 0.15}, {0.0, 0.15});
  return m;
}

// Smooth curve in [-1, 1]: the first three cosine harmonics over the
// sequence with random weights.
struct Curve {
  std::array<double, 3> a{};
  void sample(std::mt19937_64& gen) {
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
      a[k] = (2.0 * uniform(gen) - 1.0) / (k + 1);
      total += std::abs(a[k]);
    }
    if (total > 1.0) {
      for (double& v : a) v /= total;
    }
  }
  double at(int t, int frames) const {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
      s += a[k] * std::cos(std::numbers::pi * (k + 1) * (t + 0.5) / frames);
    }
    return s;
  }
};

Mask morph(const Mask& mask, int radius, bool dilate) {
  if (radius <= 0) return mask;
  Mask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      bool any = false;
      bool all = true;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > radius * radius) continue;
          const int xx = x + dx;
          const int yy = y + dy;
          const bool on = xx >= 0 && yy >= 0 && xx < mask.width && yy < mask.height && mask.at(xx, yy);
          any = any || on;
          all = all && on;
        }
      }
      out.set(x, y, dilate ? any : all);
    }
  }
  return out;
}

}  // namespace

std::vector<Camera> ring_cameras(const SynthOptions& o) {
  std::vector<Camera> cams;
  for (int v = 0; v < o.views; ++v) {
    const double a = v * std::numbers::pi / 2.0;
    const Eigen::Vector3d eye(o.camera_distance * std::sin(a), o.camera_height,
                              o.camera_distance * std::cos(a));
    cams.push_back(Camera::look_at(eye, Eigen::Vector3d(0.0, -0.1, 0.0), Eigen::Vector3d::UnitY(),
                                   o.focal, o.width, o.height));
  }
  return cams;
}

void swap_left_right(const BodyModel& model, JointDetections& dets) {
  for (const auto& [l, r] : model.left_right_pairs) {
    dets.positions.col(l).swap(dets.positions.col(r));
    std::swap(dets.confidence[l], dets.confidence[r]);
  }
}

SynthResult synth_generate(const BodyModel& model, const SynthOptions& o) {
  if (o.views < 1 || o.frames < 1) throw InvalidArgument("synth needs at least one view and frame");
  if (o.noise_px < 0.0 || o.swap_rate < 0.0 || o.swap_rate > 1.0 || o.mask_noise < 0) {
    throw InvalidArgument("synth noise parameters out of range");
  }
  std::mt19937_64 gen(o.seed);
  const int nj = model.num_joints();
  const int T = o.frames;

  SynthResult out;
  Truth& truth = out.truth;
  truth.shape.beta.resize(model.num_shape());
  for (int s = 0; s < model.num_shape(); ++s) truth.shape.beta[s] = o.shape_std * normal(gen);

  const auto table = motion_table(nj, o.yaw_amplitude);
  std::vector<std::array<Curve, 3>> curves(nj);
  for (auto& c : curves) {
    for (auto& axis : c) axis.sample(gen);
  }
  std::array<Curve, 3> drift;
  for (auto& c : drift) c.sample(gen);

  for (int t = 0; t < T; ++t) {
    PoseParams pose = PoseParams::rest(nj);
    for (int j = 0; j < nj; ++j) {
      for (int d = 0; d < 3; ++d) {
        const double swing = table[j][d].amplitude * (j == 0 && d == 1 ? 1.0 : o.motion_scale);
        pose.joint_rotations(d, j) = table[j][d].offset + swing * curves[j][d].at(t, T);
      }
    }
    for (int d = 0; d < 3; ++d) {
      pose.root_translation[d] = o.translation_amplitude[d] * drift[d].at(t, T);
    }
    truth.poses.push_back(pose);
    truth.joints.push_back(posed_joints(model, truth.shape, pose));
  }
  truth.rest_vertices = shape_template(model, truth.shape).vertices;

  SequenceBundle& b = out.bundle;
  b.views = o.views;
  b.frames = T;
  b.joints = nj;
  b.frame_rate = 30.0;
  b.image_width = o.width;
  b.image_height = o.height;
  b.cameras = ring_cameras(o);
  b.observations.assign(T, FrameObservations{});
  truth.swapped.assign(T, std::vector<int>(o.views, 0));

  // Random draws happen in a fixed order whatever the options, so changing
  // e.g. the noise level keeps the same motion and swap pattern.
  for (int t = 0; t < T; ++t) {
    const PosedBody body = forward(model, truth.shape, truth.poses[t]);
    for (int v = 0; v < o.views; ++v) {
      const Camera& cam = b.cameras[v];
      JointDetections d = JointDetections::missing(nj);
      for (int j = 0; j < nj; ++j) {
        const double nx = normal(gen);
        const double ny = normal(gen);
        const Eigen::Vector3d xc = cam.rotation * body.joints.col(j) + cam.translation;
        if (xc.z() <= kMinDepth) continue;
        d.positions.col(j) = project(cam, body.joints.col(j)) + o.noise_px * Eigen::Vector2d(nx, ny);
        d.confidence[j] = 1.0;
      }
      const double u_swap = uniform(gen);
      const bool eligible =
          o.swap_views.empty() ||
          std::find(o.swap_views.begin(), o.swap_views.end(), v) != o.swap_views.end();
      if (eligible && u_swap < o.swap_rate) {
        swap_left_right(model, d);
        truth.swapped[t][v] = 1;
      }
      b.observations[t].detections.push_back(std::move(d));

      const double u_radius = uniform(gen);
      const double u_kind = uniform(gen);
      if (o.masks) {
        Mask m = rasterize(model, truth.shape, truth.poses[t], cam).mask;
        if (o.mask_noise > 0) {
          const int radius = static_cast<int>(std::floor(u_radius * (o.mask_noise + 1)));
          m = morph(m, std::min(radius, o.mask_noise), u_kind < 0.5);
        }
        b.observations[t].masks.push_back(std::move(m));
      }
    }
  }
  return out;
}

void write_synth(const SynthResult& synth, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "masks", ec);
  if (ec) throw IoError("cannot create " + (root / "masks").string() + ": " + ec.message());
  save_detections((root / "detections.json").string(), synth.bundle);
  save_cameras((root / "cameras.json").string(), synth.bundle.cameras);
  for (int t = 0; t < synth.bundle.frames; ++t) {
    for (std::size_t v = 0; v < synth.bundle.observations[t].masks.size(); ++v) {
      write_pgm((root / "masks" / mask_filename(static_cast<int>(v), t)).string(),
                synth.bundle.observations[t].masks[v]);
    }
  }
  save_truth((root / "truth.json").string(), synth.truth);
}

// ---------------------------------------------------------------------------
// Evaluation

Eigen::Matrix3Xd procrustes_align(const Eigen::Matrix3Xd& X, const Eigen::Matrix3Xd& Y) {
  if (X.cols() != Y.cols() || X.cols() == 0) {
    throw InvalidArgument("Procrustes alignment needs two equally sized nonempty point sets");
  }
  const Eigen::Matrix4d T = Eigen::umeyama(X, Y, true);
  return (T.topLeftCorner<3, 3>() * X).colwise() + T.topRightCorner<3, 1>();
}

double mean_joint_error_mm(const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("joint sets differ in size");
  return 1000.0 * (a - b).colwise().norm().mean();
}

double vertex_error_mm(const BodyModel& model, const ShapeParams& a, const ShapeParams& b) {
  const Eigen::Matrix3Xd va = shape_template(model, a).vertices;
  const Eigen::Matrix3Xd vb = shape_template(model, b).vertices;
  return 1000.0 * (va - vb).colwise().norm().mean();
}

EvalReport evaluate(const BodyModel& model, const FitRecord& fit, const Truth& truth,
                    const EvalOptions& options) {
  const std::size_t n = fit.joints.size();
  if (n != truth.joints.size()) {
    throw InvalidArgument("fit has " + std::to_string(n) + " frames but truth has " +
                          std::to_string(truth.joints.size()));
  }
  if (n == 0) throw InvalidArgument("nothing to evaluate");
  EvalReport r;
  for (std::size_t t = 0; t < n; ++t) {
    const Eigen::Matrix3Xd& est = fit.joints[t];
    const Eigen::Matrix3Xd& gt = truth.joints[t];
    r.per_frame_mm.push_back(mean_joint_error_mm(est, gt));
    r.sum_squared_error += (est - gt).squaredNorm();
    if (options.procrustes) {
      const Eigen::Matrix3Xd aligned = procrustes_align(est, gt);
      r.per_frame_procrustes_mm.push_back(mean_joint_error_mm(aligned, gt));
      r.sum_squared_procrustes_error += (aligned - gt).squaredNorm();
    }
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  r.mean_mm = mean(r.per_frame_mm);
  std::vector<double> sorted = r.per_frame_mm;
  std::sort(sorted.begin(), sorted.end());
  r.median_mm = sorted.size() % 2 == 1
                    ? sorted[sorted.size() / 2]
                    : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
  if (options.procrustes) r.mean_procrustes_mm = mean(r.per_frame_procrustes_mm);
  if (options.vertex_error) r.vertex_error_mm = vertex_error_mm(model, fit.shape, truth.shape);
  return r;
}

}  // namespace bodyfit
