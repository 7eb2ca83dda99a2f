#include "bodyfit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Geometry>

#include "bodyfit/log.hpp"

namespace bodyfit {

void PipelineConfig::validate() const {
  fit.validate();
  if (fit.schedule.empty()) throw InvalidArgument("stage-one schedule must not be empty");
  if (window < 1) throw InvalidArgument("window length must be positive");
  if (dct_k < 1) throw InvalidArgument("DCT component count must be positive");
  if (threads < 1) throw InvalidArgument("thread count must be positive");
  if (silhouette_rounds < 0 || silhouette_iterations < 1 || stage_two_rounds < 0) {
    throw InvalidArgument("iteration budgets must be positive");
  }
  double previous = std::numeric_limits<double>::infinity();
  for (double m : sigma1_anneal) {
    if (!(m >= 1.0) || m > previous) {
      throw InvalidArgument("sigma1 annealing multipliers must be >= 1 and nonincreasing");
    }
    previous = m;
  }
}

PipelineConfig default_pipeline_config(const BodyModel& model) {
  PipelineConfig config;
  config.fit.pose_prior = make_default_pose_prior(model);
  return config;
}

double FrameProblem::value(const Eigen::VectorXd& params) const {
  std::vector<double> out;
  (*this)(params.data(), out);
  double total = 0.0;
  for (double r : out) total += r * r;
  return total;
}

namespace {

struct RayHit {
  bool ok = false;
  Eigen::Vector3d point;
};

// Midpoint of the shortest segment between two rays.
RayHit ray_midpoint(const Eigen::Vector3d& c1, const Eigen::Vector3d& d1, const Eigen::Vector3d& c2,
                    const Eigen::Vector3d& d2) {
  const Eigen::Vector3d w = c1 - c2;
  const double b = d1.dot(d2);
  const double denom = 1.0 - b * b;
  if (denom < 1e-8) return {};
  const double d = d1.dot(w);
  const double e = d2.dot(w);
  const double s = (b * e - d) / denom;
  const double t = (e - b * d) / denom;
  if (s <= 0.0 || t <= 0.0) return {};
  return {true, 0.5 * ((c1 + s * d1) + (c2 + t * d2))};
}

// Root translation that puts the centroid of the root-rotated rest joints
// `subset` at `centroid`.
Eigen::Vector3d translation_for(const Eigen::Matrix3Xd& rest, const std::vector<int>& subset,
                                const Eigen::Matrix3d& rotation, const Eigen::Vector3d& centroid) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int j : subset) mean += rotation * (rest.col(j) - rest.col(0));
  mean /= static_cast<double>(subset.size());
  return centroid - mean - rest.col(0);
}

PoseParams pose_from(const BodyModel& model, const Eigen::Matrix3d& rotation,
                     const Eigen::Vector3d& translation) {
  PoseParams pose = PoseParams::rest(model.num_joints());
  pose.joint_rotations.col(0) = log_rotation(rotation);
  pose.root_translation = translation;
  return pose;
}

std::vector<PoseParams> monocular_candidates(const BodyModel& model, const Camera& cam,
                                             const JointDetections& dets,
                                             const std::vector<int>& torso) {
  std::vector<int> used;
  for (int j : torso) {
    if (dets.confidence[j] > 0.0) used.push_back(j);
  }
  if (used.empty()) {
    for (int j = 0; j < dets.num_joints(); ++j) {
      if (dets.confidence[j] > 0.0) used.push_back(j);
    }
  }
  const Eigen::Matrix3Xd& rest = model.template_joints;
  Eigen::Vector2d mean2 = Eigen::Vector2d::Zero();
  for (int j : used) mean2 += dets.positions.col(j);
  mean2 /= static_cast<double>(used.size());
  double spread2 = 0.0;
  for (int j : used) spread2 += (dets.positions.col(j) - mean2).squaredNorm();
  spread2 = std::sqrt(spread2 / used.size());

  std::vector<PoseParams> out;
  for (const Eigen::Vector3d& diag : {Eigen::Vector3d(1, -1, -1), Eigen::Vector3d(-1, -1, 1)}) {
    const Eigen::Matrix3d body_to_cam = diag.asDiagonal();
    const Eigen::Matrix3d rotation = cam.rotation.transpose() * body_to_cam;
    Eigen::Vector2d mean3 = Eigen::Vector2d::Zero();
    for (int j : used) mean3 += (body_to_cam * (rest.col(j) - rest.col(0))).head<2>();
    mean3 /= static_cast<double>(used.size());
    double spread3 = 0.0;
    for (int j : used) {
      spread3 += ((body_to_cam * (rest.col(j) - rest.col(0))).head<2>() - mean3).squaredNorm();
    }
    spread3 = std::sqrt(spread3 / used.size());
    const double f = 0.5 * (cam.focal.x() + cam.focal.y());
    const double depth = spread2 > 1e-9 && spread3 > 1e-9 ? f * spread3 / spread2 : 3.0;
    const Eigen::Vector3d centroid_cam((mean2.x() - cam.principal_point.x()) / cam.focal.x() * depth,
                                       (mean2.y() - cam.principal_point.y()) / cam.focal.y() * depth,
                                       depth);
    const Eigen::Vector3d centroid = cam.rotation.transpose() * (centroid_cam - cam.translation);
    out.push_back(pose_from(model, rotation, translation_for(rest, used, rotation, centroid)));
  }
  return out;
}

}  // namespace

std::vector<PoseParams> initial_poses(const BodyModel& model, std::span<const Camera> cameras,
                                      std::span<const JointDetections> detections) {
  const std::vector<int> torso = torso_joints(model);
  const Eigen::Matrix3Xd& rest = model.template_joints;

  std::vector<int> hit_joints;
  std::vector<Eigen::Vector3d> hits;
  for (int j : torso) {
    int best = -1;
    int second = -1;
    for (int v = 0; v < static_cast<int>(cameras.size()); ++v) {
      const double w = detections[v].confidence[j];
      if (w <= 0.0) continue;
      if (best < 0 || w > detections[best].confidence[j]) {
        second = best;
        best = v;
      } else if (second < 0 || w > detections[second].confidence[j]) {
        second = v;
      }
    }
    if (second < 0) continue;
    const RayHit hit = ray_midpoint(
        cameras[best].center(), back_project_direction(cameras[best], detections[best].positions.col(j)),
        cameras[second].center(),
        back_project_direction(cameras[second], detections[second].positions.col(j)));
    if (!hit.ok) continue;
    hit_joints.push_back(j);
    hits.push_back(hit.point);
  }

  if (hit_joints.size() >= 3) {
    Eigen::Matrix3Xd src(3, hit_joints.size());
    Eigen::Matrix3Xd dst(3, hit_joints.size());
    for (std::size_t i = 0; i < hit_joints.size(); ++i) {
      src.col(i) = rest.col(hit_joints[i]) - rest.col(0);
      dst.col(i) = hits[i];
    }
    const Eigen::Matrix4d T = Eigen::umeyama(src, dst, false);
    const Eigen::Matrix3d rotation = T.topLeftCorner<3, 3>();
    Eigen::Vector3d centroid = dst.rowwise().mean();
    return {pose_from(model, rotation, translation_for(rest, hit_joints, rotation, centroid))};
  }
  if (!hit_joints.empty()) {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& h : hits) centroid += h;
    centroid /= static_cast<double>(hits.size());
    return {pose_from(model, Eigen::Matrix3d::Identity(),
                      translation_for(rest, hit_joints, Eigen::Matrix3d::Identity(), centroid))};
  }

  // Single usable view: take the one with the most confident joint mass.
  int view = 0;
  double mass = -1.0;
  for (int v = 0; v < static_cast<int>(cameras.size()); ++v) {
    const double m = detections[v].confidence.sum();
    if (m > mass) {
      mass = m;
      view = v;
    }
  }
  return monocular_candidates(model, cameras[view], detections[view], torso);
}

namespace {

FitConfig final_weights(const FitConfig& fit) {
  FitConfig out = fit;
  out.lambda_theta = fit.schedule.back().first;
  out.lambda_beta = fit.schedule.back().second;
  return out;
}

FrameProblem joints_problem(const BodyModel& model, const FrameObservations& obs,
                            std::span<const Camera> cameras, const FitConfig& fit) {
  FrameProblem p;
  p.model = &model;
  p.cameras = cameras;
  p.detections = obs.detections;
  p.sigma1 = fit.sigma1;
  p.pose_prior = &fit.pose_prior;
  p.sigma2 = fit.sigma2;
  return p;
}

SolveReport solve(const FrameProblem& problem, Eigen::VectorXd& params,
                  const std::vector<int>& free, const SolveOptions& opts) {
  Objective obj = autodiff_objective(params, free, problem);
  Eigen::VectorXd x0(static_cast<Eigen::Index>(free.size()));
  for (std::size_t k = 0; k < free.size(); ++k) x0[k] = params[free[k]];
  SolveReport report = minimize(obj, x0, opts);
  for (std::size_t k = 0; k < free.size(); ++k) params[free[k]] = report.x[k];
  return report;
}

bool any_mask(const FrameObservations& obs) {
  return std::any_of(obs.masks.begin(), obs.masks.end(), [](const Mask& m) { return !m.empty(); });
}

void check_frame(const BodyModel& model, const FrameObservations& obs,
                 std::span<const Camera> cameras) {
  if (obs.detections.size() != cameras.size()) {
    throw InvalidArgument("frame has " + std::to_string(obs.detections.size()) +
                          " detection views but " + std::to_string(cameras.size()) + " cameras");
  }
  if (!obs.masks.empty() && obs.masks.size() != cameras.size()) {
    throw InvalidArgument("frame mask count does not match camera count");
  }
  for (const auto& d : obs.detections) {
    if (d.num_joints() != model.num_joints() || d.positions.cols() != model.num_joints()) {
      throw InvalidArgument("detections have " + std::to_string(d.num_joints()) +
                            " joints, model has " + std::to_string(model.num_joints()));
    }
  }
}

double frame_energy(const BodyModel& model, const Eigen::VectorXd& params,
                    const FrameObservations& obs, std::span<const Camera> cameras,
                    const FitConfig& weights, bool with_silhouette) {
  PoseParams pose;
  ShapeParams shape;
  unpack_params(model, params, pose, shape);
  if (with_silhouette) {
    return stage_one_objective(model, shape, pose, cameras, obs.detections, obs.masks, weights);
  }
  return multiview_term(model, shape, pose, cameras, obs.detections, weights);
}

// Reflects joint j's global orientation through the camera's image plane:
// tilts towards the camera become tilts away from it, in-plane roll is kept.
// The subtree below j follows rigidly.
Eigen::VectorXd mirrored_joint(const BodyModel& model, const Eigen::VectorXd& params,
                               const Camera& cam, int j) {
  const int nj = model.num_joints();
  std::vector<Eigen::Matrix3d> global(static_cast<std::size_t>(nj));
  for (int k = 0; k < nj; ++k) {
    const Eigen::Matrix3d local = rodrigues(Eigen::Vector3d(params.segment<3>(3 + 3 * k)));
    global[k] = model.parents[k] < 0 ? local : Eigen::Matrix3d(global[model.parents[k]] * local);
  }
  const Eigen::Matrix3d M = Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal();
  const Eigen::Matrix3d& C = cam.rotation;
  const Eigen::Matrix3d flipped = C.transpose() * M * C * global[j] * C.transpose() * M * C;
  const int parent = model.parents[j];
  const Eigen::Matrix3d local = parent < 0 ? flipped : Eigen::Matrix3d(global[parent].transpose() * flipped);
  Eigen::VectorXd out = params;
  out.segment<3>(3 + 3 * j) = log_rotation(local);
  return out;
}

// Joints with more than one child: their children form rigid point sets.
std::vector<int> branching_joints(const BodyModel& model) {
  std::vector<int> children(static_cast<std::size_t>(model.num_joints()), 0);
  for (int p : model.parents) {
    if (p >= 0) ++children[p];
  }
  std::vector<int> out;
  for (int j = 0; j < model.num_joints(); ++j) {
    if (children[j] > 1) out.push_back(j);
  }
  return out;
}

}  // namespace

FrameFit fit_frame(const BodyModel& model, const FrameObservations& obs,
                   std::span<const Camera> cameras, const PipelineConfig& config,
                   const FrameFit* init) {
  check_frame(model, obs, cameras);
  if (std::none_of(obs.detections.begin(), obs.detections.end(),
                   [](const JointDetections& d) { return d.any_confident(); })) {
    throw UnfittableFrame("no view has a confident joint detection");
  }
  const FitConfig& fit = config.fit;
  const int np = param_count(model);

  std::vector<PoseParams> candidates;
  ShapeParams shape0;
  if (init) {
    candidates.push_back(init->pose);
    shape0 = init->shape;
  } else {
    candidates = initial_poses(model, cameras, obs.detections);
  }

  FrameFit result;

  // Pass 1: global placement from torso joints.
  const double wide = fit.sigma1 * (config.sigma1_anneal.empty() ? 1.0 : config.sigma1_anneal[0]);
  FrameProblem placement = joints_problem(model, obs, cameras, fit);
  placement.sigma1 = wide;
  placement.pose_prior = nullptr;
  placement.joint_subset = torso_joints(model);
  bool torso_seen = false;
  for (const auto& d : obs.detections) {
    for (int j : placement.joint_subset) torso_seen = torso_seen || d.confidence[j] > 0.0;
  }
  if (!torso_seen) placement.joint_subset.clear();
  const std::vector<int> global = index_range(0, 6);
  Eigen::VectorXd params;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& candidate : candidates) {
    Eigen::VectorXd x = pack_params(candidate, shape0);
    SolveReport report = solve(placement, x, global, config.solve);
    if (report.final_objective < best) {
      best = report.final_objective;
      params = x;
      if (result.passes.empty()) {
        result.passes.push_back(report);
      } else {
        result.passes[0] = report;
      }
    }
  }

  // Pass 2: all parameters on all joints, annealing the prior weights, then
  // narrowing the robust kernel gradually so that the final basin is found
  // from the wide-kernel solution.
  const std::vector<int> all = index_range(0, np);
  FrameProblem joints = joints_problem(model, obs, cameras, fit);
  auto refine = [&](Eigen::VectorXd& x, std::vector<SolveReport>& passes) {
    joints.sigma1 = wide;
    for (const auto& [lt, lb] : fit.schedule) {
      joints.lambda_theta = lt;
      joints.lambda_beta = lb;
      passes.push_back(solve(joints, x, all, config.solve));
    }
    for (std::size_t i = 1; i <= config.sigma1_anneal.size(); ++i) {
      const double m = i < config.sigma1_anneal.size() ? config.sigma1_anneal[i] : 1.0;
      if (i == config.sigma1_anneal.size() && config.sigma1_anneal.back() == 1.0) break;
      joints.sigma1 = fit.sigma1 * m;
      passes.push_back(solve(joints, x, all, config.solve));
    }
    joints.sigma1 = fit.sigma1;
    return joints.value(x);
  };
  double refined = refine(params, result.passes);
  if (cameras.size() == 1 && !init) {
    // One view leaves the tilt of each rigid branch point towards or away
    // from the camera ambiguous; try each one mirrored through the image
    // plane and keep whatever fits better.
    for (int j : branching_joints(model)) {
      Eigen::VectorXd x = mirrored_joint(model, params, cameras[0], j);
      std::vector<SolveReport> passes;
      const double e = refine(x, passes);
      if (e < refined) {
        refined = e;
        params = x;
        result.passes.resize(1);
        result.passes.insert(result.passes.end(), passes.begin(), passes.end());
      }
    }
  }

  // Pass 3: add silhouettes, re-linearizing the surrogate between rounds and
  // keeping the best state under the rasterized energy.
  const FitConfig weights = final_weights(fit);
  const bool use_silhouette =
      config.silhouette && fit.silhouette_weight > 0.0 && any_mask(obs) && config.silhouette_rounds > 0;
  double energy = frame_energy(model, params, obs, cameras, weights, use_silhouette);
  if (use_silhouette) {
    std::vector<DistanceField> fields;
    for (const auto& m : obs.masks) fields.push_back(signed_distance_field(m));
    FrameProblem sil = joints;
    sil.silhouette_fields = fields;
    sil.silhouette_weight = fit.silhouette_weight;
    SolveOptions opts = config.solve;
    opts.max_iterations = config.silhouette_iterations;
    Eigen::VectorXd x = params;
    for (int round = 0; round < config.silhouette_rounds; ++round) {
      const SilhouetteLinearization lin =
          linearize_silhouette(model, x, cameras, obs.masks, fit.silhouette_stride);
      sil.silhouette = &lin;
      SolveReport report = solve(sil, x, all, opts);
      result.passes.push_back(report);
      const double e = frame_energy(model, x, obs, cameras, weights, true);
      if (e <= energy) {
        energy = e;
        params = x;
      }
    }
  }

  unpack_params(model, params, result.pose, result.shape);
  result.objective = energy;
  return result;
}

ShapeParams median_shape(std::span<const ShapeParams> shapes) {
  if (shapes.empty()) throw InvalidArgument("median shape needs at least one frame");
  const Eigen::Index ns = shapes.front().beta.size();
  ShapeParams out;
  out.beta.resize(ns);
  std::vector<double> values(shapes.size());
  for (Eigen::Index s = 0; s < ns; ++s) {
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      if (shapes[i].beta.size() != ns) throw InvalidArgument("shape vectors differ in length");
      values[i] = shapes[i].beta[s];
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    out.beta[s] = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  }
  return out;
}

std::vector<std::pair<int, int>> window_ranges(int frames, int window) {
  if (window < 1) throw InvalidArgument("window length must be positive");
  std::vector<std::pair<int, int>> out;
  for (int start = 0; start < frames; start += window) {
    out.emplace_back(start, std::min(frames, start + window));
  }
  return out;
}

namespace {

// Frame problem of the windowed refit, without the temporal part.
FrameProblem window_frame_problem(const BodyModel& model, const FrameObservations& obs,
                                  std::span<const Camera> cameras, const FitConfig& weights) {
  FrameProblem p = joints_problem(model, obs, cameras, weights);
  p.lambda_theta = weights.lambda_theta;
  p.lambda_beta = 0.0;  // shape is fixed
  return p;
}

}  // namespace

WindowFit fit_window(const BodyModel& model, const ShapeParams& shape,
                     std::span<const FrameObservations> window, std::span<const Camera> cameras,
                     std::span<const PoseParams> init, const PipelineConfig& config) {
  const int n = static_cast<int>(window.size());
  if (n < 1) throw InvalidArgument("window must contain at least one frame");
  if (init.size() != window.size()) {
    throw InvalidArgument("window has " + std::to_string(n) + " frames but " +
                          std::to_string(init.size()) + " initial poses");
  }
  for (const auto& obs : window) check_frame(model, obs, cameras);
  const FitConfig weights = final_weights(config.fit);
  const DctBasis basis = dct_basis(n, std::min(config.dct_k, n));
  const int nj = model.num_joints();
  const std::vector<int> pose_vars = index_range(0, 3 + 3 * nj);

  WindowFit out;
  out.poses.assign(init.begin(), init.end());

  const bool temporal = weights.lambda_t > 0.0;
  auto data_energy = [&](const std::vector<PoseParams>& poses) {
    std::vector<double> parts(static_cast<std::size_t>(n));
    parallel_for(n, config.threads, [&](int t) {
      const FrameProblem p = window_frame_problem(model, window[t], cameras, weights);
      parts[t] = p.value(pack_params(poses[t], shape));
    });
    double total = 0.0;
    for (double v : parts) total += v;
    return total;
  };

  double temporal_energy = 0.0;
  if (temporal) {
    const TrajectoryMatrix traj = assemble_trajectories(model, shape, out.poses);
    temporal_energy =
        fit_coefficients(traj, basis, weights.sigma2, weights.lambda_t_axis, out.coefficients);
  }
  double energy = data_energy(out.poses) + weights.lambda_t * temporal_energy;
  out.objective_trace.push_back(energy);

  const bool silhouettes = config.stage2_silhouette && weights.silhouette_weight > 0.0;
  for (int round = 0; round < config.stage_two_rounds; ++round) {
    const Eigen::MatrixXd recon =
        temporal ? Eigen::MatrixXd(basis.B * out.coefficients.c) : Eigen::MatrixXd();
    std::vector<PoseParams> next(out.poses);
    parallel_for(n, config.threads, [&](int t) {
      FrameProblem p = window_frame_problem(model, window[t], cameras, weights);
      Eigen::Matrix3Xd targets;
      if (temporal) {
        targets = Eigen::Map<const Eigen::Matrix3Xd>(recon.row(t).eval().data(), 3, nj);
        p.temporal_targets = &targets;
        p.lambda_t = weights.lambda_t;
        p.lambda_t_axis = weights.lambda_t_axis;
      }
      Eigen::VectorXd params = pack_params(out.poses[t], shape);
      std::vector<DistanceField> fields;
      SilhouetteLinearization lin;
      if (silhouettes && any_mask(window[t])) {
        for (const auto& m : window[t].masks) fields.push_back(signed_distance_field(m));
        lin = linearize_silhouette(model, params, cameras, window[t].masks,
                                   weights.silhouette_stride);
        p.silhouette = &lin;
        p.silhouette_fields = fields;
        p.silhouette_weight = weights.silhouette_weight;
      }
      solve(p, params, pose_vars, config.solve);
      ShapeParams unused;
      unpack_params(model, params, next[t], unused);
    });

    double new_temporal = 0.0;
    DctCoefficients coeffs;
    if (temporal) {
      const TrajectoryMatrix traj = assemble_trajectories(model, shape, next);
      new_temporal = fit_coefficients(traj, basis, weights.sigma2, weights.lambda_t_axis, coeffs,
                                      &out.coefficients);
    }
    const double new_energy = data_energy(next) + weights.lambda_t * new_temporal;
    ++out.rounds;
    if (!(new_energy <= energy)) break;  // silhouette re-linearization can overshoot
    const double decrease = energy - new_energy;
    out.poses = std::move(next);
    out.coefficients = std::move(coeffs);
    energy = new_energy;
    out.objective_trace.push_back(energy);
    if (decrease <= config.stage_two_rtol * std::max(energy + decrease, 1e-300)) break;
  }
  return out;
}

PoseParams interpolate_pose(const PoseParams& a, const PoseParams& b, double t) {
  PoseParams out = a;
  out.root_translation = (1.0 - t) * a.root_translation + t * b.root_translation;
  for (Eigen::Index j = 0; j < a.joint_rotations.cols(); ++j) {
    const Eigen::Vector3d wa = a.joint_rotations.col(j);
    const Eigen::Vector3d wb = b.joint_rotations.col(j);
    const Eigen::Quaterniond qa(rodrigues(wa));
    const Eigen::Quaterniond qb(rodrigues(wb));
    out.joint_rotations.col(j) = log_rotation(qa.slerp(t, qb).toRotationMatrix());
  }
  return out;
}

void interpolate_missing(std::vector<PoseParams>& poses, const std::vector<bool>& fitted) {
  const int n = static_cast<int>(poses.size());
  std::vector<int> known;
  for (int t = 0; t < n; ++t) {
    if (fitted[t]) known.push_back(t);
  }
  if (known.empty()) return;
  for (int t = 0; t < n; ++t) {
    if (fitted[t]) continue;
    const auto next = std::lower_bound(known.begin(), known.end(), t);
    if (next == known.begin()) {
      poses[t] = poses[*next];
    } else if (next == known.end()) {
      poses[t] = poses[known.back()];
    } else {
      const int a = *(next - 1);
      const int b = *next;
      poses[t] = interpolate_pose(poses[a], poses[b], static_cast<double>(t - a) / (b - a));
    }
  }
}

SequenceFit fit_sequence(const BodyModel& model, std::span<const FrameObservations> frames,
                         std::span<const Camera> cameras, const PipelineConfig& config) {
  config.validate();
  if (frames.empty()) throw InvalidArgument("sequence has no frames");
  if (cameras.empty()) throw InvalidArgument("sequence has no cameras");
  for (const auto& cam : cameras) cam.validate();
  const int n = static_cast<int>(frames.size());

  SequenceFit out;
  out.provenance.views = static_cast<int>(cameras.size());
  out.provenance.silhouette = config.silhouette;
  out.provenance.stage_two = config.stage_two;
  out.provenance.stage2_silhouette = config.stage2_silhouette;
  out.provenance.monocular = config.monocular;
  out.provenance.window = config.window;
  out.provenance.dct_k = config.dct_k;

  // Stage one: frames in order, each starting from the previous solution.
  out.stage_one_poses.assign(n, PoseParams::rest(model.num_joints()));
  out.frame_shapes.assign(n, ShapeParams{});
  out.frame_objectives.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.fitted.assign(n, false);
  std::optional<FrameFit> previous;
  std::vector<ShapeParams> fitted_shapes;
  for (int t = 0; t < n; ++t) {
    try {
      FrameFit f = fit_frame(model, frames[t], cameras, config, previous ? &*previous : nullptr);
      out.stage_one_poses[t] = f.pose;
      out.frame_shapes[t] = f.shape;
      out.frame_objectives[t] = f.objective;
      out.fitted[t] = true;
      fitted_shapes.push_back(f.shape);
      previous = std::move(f);
    } catch (const UnfittableFrame& e) {
      log_warning("frame " + std::to_string(t) + " is unfittable (" + e.what() +
                  "); its pose will be interpolated");
    }
  }
  if (fitted_shapes.empty()) throw SequenceFailure("no frame of the sequence could be fitted");

  out.shape = median_shape(fitted_shapes);
  interpolate_missing(out.stage_one_poses, out.fitted);
  for (int t = 0; t < n; ++t) {
    if (!out.fitted[t]) out.frame_shapes[t] = out.shape;
  }
  out.poses = out.stage_one_poses;

  // Stage two: independent windows at the median shape.
  if (config.stage_two) {
    const auto ranges = window_ranges(n, config.window);
    out.windows.resize(ranges.size());
    for (std::size_t w = 0; w < ranges.size(); ++w) {
      const auto [a, b] = ranges[w];
      out.windows[w] = fit_window(
          model, out.shape, frames.subspan(a, b - a), cameras,
          std::span<const PoseParams>(out.stage_one_poses).subspan(a, b - a), config);
      std::copy(out.windows[w].poses.begin(), out.windows[w].poses.end(), out.poses.begin() + a);
    }
  }
  return out;
}

SequenceFit fit_monocular(const BodyModel& model, std::span<const FrameObservations> frames,
                          const std::optional<Camera>& camera, int image_width, int image_height,
                          const PipelineConfig& config) {
  for (const auto& f : frames) {
    if (f.detections.size() != 1) throw InvalidArgument("monocular fitting needs exactly one view");
  }
  const Camera cam = camera ? *camera : Camera::default_for_image(image_width, image_height);
  PipelineConfig cfg = config;
  cfg.monocular = true;
  SequenceFit out = fit_sequence(model, frames, std::span<const Camera>(&cam, 1), cfg);
  out.provenance.camera_source = camera ? "file" : "default";
  return out;
}

}  // namespace bodyfit
