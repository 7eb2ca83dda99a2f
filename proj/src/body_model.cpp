#include "bodyfit/body_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>
#include <json.hpp>

namespace bodyfit {

using nlohmann::json;

namespace {

// SMPL-style 24-joint topology.
const std::vector<std::string> kJointNames = {
    "pelvis",     "left_hip",       "right_hip",      "spine1",      "left_knee",
    "right_knee", "spine2",         "left_ankle",     "right_ankle", "spine3",
    "left_foot",  "right_foot",     "neck",           "left_collar", "right_collar",
    "head",       "left_shoulder",  "right_shoulder", "left_elbow",  "right_elbow",
    "left_wrist", "right_wrist",    "left_hand",      "right_hand"};

const std::vector<int> kParents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
                                   9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};

// Rest joint layout, pelvis at the origin, +x = subject's left, +y up,
// +z forward. Arms in a T-pose.
const std::vector<Eigen::Vector3d> kRestJoints = {
    {0.00, 0.00, 0.00},   {0.09, -0.08, 0.00},  {-0.09, -0.08, 0.00}, {0.00, 0.11, -0.01},
    {0.10, -0.48, 0.01},  {-0.10, -0.48, 0.01}, {0.00, 0.24, 0.00},   {0.10, -0.88, -0.03},
    {-0.10, -0.88, -0.03}, {0.00, 0.32, 0.01},  {0.11, -0.94, 0.10},  {-0.11, -0.94, 0.10},
    {0.00, 0.50, -0.01},  {0.07, 0.42, 0.00},   {-0.07, 0.42, 0.00},  {0.00, 0.62, 0.03},
    {0.18, 0.45, -0.01},  {-0.18, 0.45, -0.01}, {0.44, 0.45, -0.02},  {-0.44, 0.45, -0.02},
    {0.69, 0.45, -0.01},  {-0.69, 0.45, -0.01}, {0.77, 0.45, -0.01},  {-0.77, 0.45, -0.01}};

// Capsule radius of the bone ending at each joint (index = child joint).
const std::vector<double> kBoneRadius = {0.11, 0.07, 0.07, 0.11, 0.075, 0.075,
                                         0.12, 0.05, 0.05, 0.12, 0.04,  0.04,
                                         0.06, 0.05, 0.05, 0.05, 0.05,  0.05,
                                         0.045, 0.045, 0.035, 0.035, 0.03, 0.03};

enum class Region { kTorso, kLeg, kArm, kHead };

Region region_of_joint(int j) {
  switch (j) {
    case 1: case 2: case 4: case 5: case 7: case 8: case 10: case 11:
      return Region::kLeg;
    case 16: case 17: case 18: case 19: case 20: case 21: case 22: case 23:
      return Region::kArm;
    case 15:
      return Region::kHead;
    default:
      return Region::kTorso;
  }
}

struct Segment {
  Eigen::Vector3d a, b;
  double radius;
  int owner;       // joint whose transform drives the segment
  int end_joint;   // joint at `b`, or -1 for a leaf extension
  Region region;
};

// Uniform double in [0, 1) from the top 53 bits; platform independent.
double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

double segment_distance(const Eigen::Vector3d& x, const Eigen::Vector3d& a,
                        const Eigen::Vector3d& b, Eigen::Vector3d* closest = nullptr) {
  const Eigen::Vector3d ab = b - a;
  const double t = std::clamp((x - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  const Eigen::Vector3d c = a + t * ab;
  if (closest) *closest = c;
  return (x - c).norm();
}

}  // namespace

Eigen::Vector3d log_rotation(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

BodyModel make_default_model(std::uint64_t seed, const ModelOptions& options) {
  if (options.rings < 2 || options.segments < 3) {
    throw InvalidArgument("model options need rings >= 2 and segments >= 3");
  }
  std::mt19937_64 gen(seed);
  const int nj = static_cast<int>(kParents.size());

  // Seeded proportions: bone lengths +-5%, radii +-10%.
  std::vector<Eigen::Vector3d> joints(nj);
  std::vector<double> radius(nj);
  for (int j = 0; j < nj; ++j) {
    const double length_scale = 1.0 + 0.1 * (unit_uniform(gen) - 0.5);
    radius[j] = kBoneRadius[j] * (1.0 + 0.2 * (unit_uniform(gen) - 0.5));
    if (kParents[j] < 0) {
      joints[j] = kRestJoints[j];
    } else {
      joints[j] = joints[kParents[j]] + length_scale * (kRestJoints[j] - kRestJoints[kParents[j]]);
    }
  }

  std::vector<Segment> segments;
  for (int j = 1; j < nj; ++j) {
    const int p = kParents[j];
    segments.push_back({joints[p], joints[j], radius[j], p, j,
                        j == 3 || j == 13 || j == 14 || j == 12 ? Region::kTorso
                                                                 : region_of_joint(p == 0 ? j : p)});
  }
  // Leaf extensions: toes, top of head, finger tips.
  auto extend = [&](int j, const Eigen::Vector3d& offset, double r, Region region) {
    segments.push_back({joints[j], joints[j] + offset, r, j, -1, region});
  };
  extend(10, {0.0, 0.0, 0.06}, 0.035, Region::kLeg);
  extend(11, {0.0, 0.0, 0.06}, 0.035, Region::kLeg);
  extend(15, {0.0, 0.11, 0.0}, 0.09 * (radius[15] / kBoneRadius[15]), Region::kHead);
  extend(22, {0.07, 0.0, 0.0}, 0.03, Region::kArm);
  extend(23, {-0.07, 0.0, 0.0}, 0.03, Region::kArm);
  // Neck segment belongs to the head region for head-size deformation.
  for (auto& s : segments) {
    if (s.end_joint == 15) s.region = Region::kHead;
  }

  BodyModel model;
  model.parents = kParents;
  model.joint_names = kJointNames;
  model.left_right_pairs = {{1, 2},   {4, 5},   {7, 8},   {10, 11}, {13, 14},
                            {16, 17}, {18, 19}, {20, 21}, {22, 23}};

  const int rings = options.rings;
  const int seg = options.segments;
  const int per_capsule = rings * seg + 2;
  const int nv = static_cast<int>(segments.size()) * per_capsule;
  model.template_vertices.resize(3, nv);
  std::vector<int> vertex_segment(nv);
  std::vector<int> end_ring_start(nj, -1);  // first vertex of the ring centred on joint j
  int root_ring_start = -1;

  for (std::size_t si = 0; si < segments.size(); ++si) {
    const Segment& s = segments[si];
    const int base = static_cast<int>(si) * per_capsule;
    const Eigen::Vector3d axis = (s.b - s.a).normalized();
    Eigen::Index minor;
    axis.cwiseAbs().minCoeff(&minor);
    const Eigen::Vector3d e1 = axis.cross(Eigen::Vector3d::Unit(minor)).normalized();
    const Eigen::Vector3d e2 = axis.cross(e1);
    for (int k = 0; k < rings; ++k) {
      const double t = static_cast<double>(k) / (rings - 1);
      const Eigen::Vector3d centre = s.a + t * (s.b - s.a);
      for (int q = 0; q < seg; ++q) {
        const double phi = 2.0 * std::numbers::pi * q / seg;
        model.template_vertices.col(base + k * seg + q) =
            centre + s.radius * (std::cos(phi) * e1 + std::sin(phi) * e2);
      }
    }
    const int apex_a = base + rings * seg;
    const int apex_b = apex_a + 1;
    model.template_vertices.col(apex_a) = s.a - s.radius * axis;
    model.template_vertices.col(apex_b) = s.b + s.radius * axis;
    for (int q = 0; q < per_capsule; ++q) vertex_segment[base + q] = static_cast<int>(si);

    for (int k = 0; k + 1 < rings; ++k) {
      for (int q = 0; q < seg; ++q) {
        const int i0 = base + k * seg + q;
        const int i1 = base + k * seg + (q + 1) % seg;
        const int j0 = i0 + seg;
        const int j1 = i1 + seg;
        model.faces.push_back({i0, i1, j0});
        model.faces.push_back({i1, j1, j0});
      }
    }
    for (int q = 0; q < seg; ++q) {
      const int i0 = base + q;
      const int i1 = base + (q + 1) % seg;
      model.faces.push_back({apex_a, i1, i0});
      const int k0 = base + (rings - 1) * seg + q;
      const int k1 = base + (rings - 1) * seg + (q + 1) % seg;
      model.faces.push_back({apex_b, k0, k1});
    }
    if (s.end_joint >= 0) end_ring_start[s.end_joint] = base + (rings - 1) * seg;
    if (s.owner == 0 && s.end_joint == 3) root_ring_start = base;
  }
  end_ring_start[0] = root_ring_start;

  // Joint regressor: uniform average of the ring centred on each joint.
  model.joint_regressor.resize(nj);
  for (int j = 0; j < nj; ++j) {
    for (int q = 0; q < seg; ++q) {
      model.joint_regressor[j].emplace_back(end_ring_start[j] + q, 1.0 / seg);
    }
  }

  // Skinning: Gaussian falloff of the distance to each joint's capsules,
  // four strongest influences kept.
  constexpr double kFalloff = 0.02;
  model.skinning_weights.resize(nv);
  for (int v = 0; v < nv; ++v) {
    const Eigen::Vector3d x = model.template_vertices.col(v);
    std::vector<double> dist(nj, std::numeric_limits<double>::infinity());
    for (const Segment& s : segments) {
      const double d = std::max(0.0, segment_distance(x, s.a, s.b) - s.radius);
      dist[s.owner] = std::min(dist[s.owner], d);
    }
    // Own capsule always dominates at the surface.
    dist[segments[vertex_segment[v]].owner] = 0.0;
    std::vector<std::pair<double, int>> w;
    for (int j = 0; j < nj; ++j) {
      if (!std::isfinite(dist[j])) continue;
      const double weight = std::exp(-dist[j] * dist[j] / (2.0 * kFalloff * kFalloff));
      if (weight > 1e-3) w.emplace_back(weight, j);
    }
    std::sort(w.begin(), w.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (w.size() > 4) w.resize(4);
    double total = 0.0;
    for (const auto& [weight, j] : w) total += weight;
    SparseRow row;
    for (const auto& [weight, j] : w) row.emplace_back(j, weight / total);
    std::sort(row.begin(), row.end());
    model.skinning_weights[v] = std::move(row);
  }

  // Identity blendshapes (meters per unit coefficient).
  model.shape_blendshapes.assign(kShapeDim, Eigen::Matrix3Xd::Zero(3, nv));
  auto& bs = model.shape_blendshapes;
  const double hip_y = 0.5 * (joints[1].y() + joints[2].y());
  const Eigen::Vector3d neck = joints[12];
  for (int v = 0; v < nv; ++v) {
    const Segment& s = segments[vertex_segment[v]];
    const Eigen::Vector3d x = model.template_vertices.col(v);
    Eigen::Vector3d closest;
    segment_distance(x, s.a, s.b, &closest);
    const Eigen::Vector3d radial = x - closest;
    const double side = (s.a + s.b).x() >= 0.0 ? 1.0 : -1.0;

    bs[0].col(v) = 0.05 * (x - joints[0]);       // overall size (height)
    bs[1].col(v) = 0.12 * radial;                // girth
    if (s.region == Region::kLeg && s.owner != 0) {
      bs[2].col(v) = Eigen::Vector3d(0.0, 0.06 * (x.y() - hip_y), 0.0);  // leg length
    }
    if (s.region == Region::kArm) {
      const Eigen::Vector3d shoulder = joints[side > 0.0 ? 16 : 17];
      bs[3].col(v) = Eigen::Vector3d(0.08 * (x.x() - shoulder.x()), 0.0, 0.0);  // arm length
    }
    if (s.region == Region::kArm || (s.owner == 13 || s.owner == 14)) {
      bs[4].col(v) = Eigen::Vector3d(0.03 * side, 0.0, 0.0);  // shoulder width
    }
    if (s.region == Region::kLeg) {
      bs[5].col(v) = Eigen::Vector3d(0.025 * side, 0.0, 0.0);  // hip width
    }
    if (s.region != Region::kLeg && !(s.owner == 0)) {
      bs[6].col(v) = Eigen::Vector3d(0.0, 0.07 * std::max(0.0, x.y()), 0.0);  // torso length
    }
    if (s.region == Region::kTorso) bs[7].col(v) = 0.15 * radial;  // torso girth
    if (s.region == Region::kArm || s.region == Region::kLeg) {
      bs[8].col(v) = 0.15 * radial;  // limb girth
    }
    if (s.region == Region::kHead) bs[9].col(v) = 0.10 * (x - neck);  // head size
  }

  model.finalize();
  model.validate();
  return model;
}

void BodyModel::finalize() {
  const int nj = num_joints();
  const int nv = num_vertices();
  auto regress = [&](const Eigen::Matrix3Xd& verts) {
    Eigen::Matrix3Xd out = Eigen::Matrix3Xd::Zero(3, nj);
    for (int j = 0; j < nj; ++j) {
      for (const auto& [v, w] : joint_regressor[j]) out.col(j) += w * verts.col(v);
    }
    return out;
  };
  template_joints = regress(template_vertices);
  joint_blendshapes.clear();
  for (const auto& b : shape_blendshapes) joint_blendshapes.push_back(regress(b));

  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
    for (int e = 0; e < 3; ++e) {
      int a = faces[f][e], b = faces[f][(e + 1) % 3];
      if (a > b) std::swap(a, b);
      edge_faces[{a, b}].push_back(f);
    }
  }
  edges.clear();
  for (const auto& [key, fs] : edge_faces) {
    if (fs.size() == 2) edges.push_back({key.first, key.second, fs[0], fs[1]});
  }
  (void)nv;
}

void BodyModel::validate() const {
  const int nj = num_joints();
  const int nv = num_vertices();
  if (nj == 0 || nv == 0) throw ValidationError("body model is empty");
  if (num_shape() != kShapeDim) {
    throw ValidationError("body model must have exactly " + std::to_string(kShapeDim) +
                          " shape channels");
  }
  int roots = 0;
  for (int j = 0; j < nj; ++j) {
    const int p = parents[j];
    if (p < 0) {
      ++roots;
    } else if (p >= j) {
      // Parents precede children, which also rules out cycles.
      throw ValidationError("kinematic tree must list parents before children");
    }
  }
  if (roots != 1) throw ValidationError("kinematic tree must have exactly one root");
  for (const auto& b : shape_blendshapes) {
    if (b.cols() != nv) throw ValidationError("blendshape vertex count mismatch");
  }
  auto check_rows = [](const std::vector<SparseRow>& rows, int cols, const char* what) {
    for (const auto& row : rows) {
      double sum = 0.0;
      for (const auto& [c, w] : row) {
        if (c < 0 || c >= cols || w < 0.0 || !std::isfinite(w)) {
          throw ValidationError(std::string(what) + " entry out of range");
        }
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw ValidationError(std::string(what) + " row does not sum to 1");
      }
    }
  };
  if (static_cast<int>(joint_regressor.size()) != nj) {
    throw ValidationError("joint regressor must have one row per joint");
  }
  if (static_cast<int>(skinning_weights.size()) != nv) {
    throw ValidationError("skinning weights must have one row per vertex");
  }
  check_rows(joint_regressor, nv, "joint regressor");
  check_rows(skinning_weights, nj, "skinning weight");
  for (const auto& f : faces) {
    for (int i : f) {
      if (i < 0 || i >= nv) throw ValidationError("face index out of range");
    }
  }
}

ShapedTemplate shape_template(const BodyModel& model, const ShapeParams& shape) {
  if (shape.beta.size() != model.num_shape()) {
    throw InvalidArgument("shape vector must have " + std::to_string(model.num_shape()) +
                          " entries, got " + std::to_string(shape.beta.size()));
  }
  ShapedTemplate out;
  out.vertices = model.template_vertices;
  for (int s = 0; s < model.num_shape(); ++s) {
    out.vertices += shape.beta[s] * model.shape_blendshapes[s];
  }
  out.joints = Eigen::Matrix3Xd::Zero(3, model.num_joints());
  for (int j = 0; j < model.num_joints(); ++j) {
    for (const auto& [v, w] : model.joint_regressor[j]) out.joints.col(j) += w * out.vertices.col(v);
  }
  return out;
}

namespace {

void check_pose(const BodyModel& model, const PoseParams& pose) {
  if (pose.joint_rotations.cols() != model.num_joints()) {
    throw InvalidArgument("pose must have one rotation per joint");
  }
}

}  // namespace

PosedBody forward(const BodyModel& model, const ShapeParams& shape, const PoseParams& pose) {
  const ShapedTemplate shaped = shape_template(model, shape);
  check_pose(model, pose);
  const Eigen::VectorXd x = pack_params(pose, shape);
  const Kinematics<double> k = compute_kinematics(model, x.data());

  const int nj = model.num_joints();
  PosedBody out;
  out.joints.resize(3, nj);
  for (int j = 0; j < nj; ++j) out.joints.col(j) = to_eigen(k.joints[j]);

  // Per-joint affine transforms A_j(x) = R_j (x - rest_j) + joint_j.
  std::vector<Eigen::Matrix3d> rot(nj);
  std::vector<Eigen::Vector3d> offset(nj);
  for (int j = 0; j < nj; ++j) {
    const auto& r = k.rotations[j];
    rot[j] << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
    offset[j] = to_eigen(k.joints[j]) - rot[j] * to_eigen(k.rest[j]);
  }
  out.vertices.resize(3, model.num_vertices());
  for (int v = 0; v < model.num_vertices(); ++v) {
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    const Eigen::Vector3d x0 = shaped.vertices.col(v);
    for (const auto& [j, w] : model.skinning_weights[v]) p += w * (rot[j] * x0 + offset[j]);
    out.vertices.col(v) = p;
  }
  return out;
}

Eigen::Matrix3Xd posed_joints(const BodyModel& model, const ShapeParams& shape,
                              const PoseParams& pose) {
  if (shape.beta.size() != model.num_shape()) throw InvalidArgument("shape dimension mismatch");
  check_pose(model, pose);
  const Eigen::VectorXd x = pack_params(pose, shape);
  const Kinematics<double> k = compute_kinematics(model, x.data());
  Eigen::Matrix3Xd out(3, model.num_joints());
  for (int j = 0; j < model.num_joints(); ++j) out.col(j) = to_eigen(k.joints[j]);
  return out;
}

std::vector<int> torso_joints(const BodyModel& model) {
  std::vector<int> out;
  const std::vector<std::string> names = {"pelvis",   "left_hip",     "right_hip",
                                          "spine1",   "spine2",       "spine3",
                                          "neck",     "left_collar",  "right_collar",
                                          "left_shoulder", "right_shoulder"};
  for (int j = 0; j < model.num_joints(); ++j) {
    if (j < static_cast<int>(model.joint_names.size()) &&
        std::find(names.begin(), names.end(), model.joint_names[j]) != names.end()) {
      out.push_back(j);
    }
  }
  if (out.empty()) {
    for (int j = 0; j < model.num_joints(); ++j) out.push_back(j);
  }
  return out;
}

int param_count(const BodyModel& model) { return 3 + 3 * model.num_joints() + model.num_shape(); }

Eigen::VectorXd pack_params(const PoseParams& pose, const ShapeParams& shape) {
  const Eigen::Index nj = pose.joint_rotations.cols();
  Eigen::VectorXd x(3 + 3 * nj + shape.beta.size());
  x.head<3>() = pose.root_translation;
  x.segment(3, 3 * nj) = Eigen::Map<const Eigen::VectorXd>(pose.joint_rotations.data(), 3 * nj);
  x.tail(shape.beta.size()) = shape.beta;
  return x;
}

void unpack_params(const BodyModel& model, const Eigen::VectorXd& x, PoseParams& pose,
                   ShapeParams& shape) {
  const int nj = model.num_joints();
  if (x.size() != param_count(model)) throw InvalidArgument("parameter vector size mismatch");
  pose.root_translation = x.head<3>();
  pose.joint_rotations = Eigen::Map<const Eigen::Matrix3Xd>(x.data() + 3, 3, nj);
  shape.beta = x.tail(model.num_shape());
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::vector<double> flatten(const Eigen::Matrix3Xd& m) {
  // Row-major over (vertex, coordinate).
  std::vector<double> out;
  out.reserve(m.size());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (int r = 0; r < 3; ++r) out.push_back(m(r, c));
  }
  return out;
}

Eigen::Matrix3Xd unflatten(const std::vector<double>& v, int cols, const std::string& what) {
  if (static_cast<int>(v.size()) != 3 * cols) throw ParseError(what + ": wrong element count");
  Eigen::Matrix3Xd m(3, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < 3; ++r) m(r, c) = v[3 * c + r];
  }
  return m;
}

}  // namespace

void save_model(const BodyModel& model, const std::string& path) {
  const int nv = model.num_vertices();
  const int ns = model.num_shape();
  json j;
  j["format"] = "bodyfit-model";
  j["version"] = 1;
  j["V"] = nv;
  j["J"] = model.num_joints();
  j["S"] = ns;
  j["F"] = model.faces.size();
  j["template_vertices"] = flatten(model.template_vertices);
  std::vector<int> faces;
  for (const auto& f : model.faces) faces.insert(faces.end(), f.begin(), f.end());
  j["faces"] = faces;
  // Row-major V x 3 x S.
  std::vector<double> blend;
  blend.reserve(static_cast<std::size_t>(nv) * 3 * ns);
  for (int v = 0; v < nv; ++v) {
    for (int r = 0; r < 3; ++r) {
      for (int s = 0; s < ns; ++s) blend.push_back(model.shape_blendshapes[s](r, v));
    }
  }
  j["shape_blendshapes"] = blend;
  j["parents"] = model.parents;
  j["joint_names"] = model.joint_names;
  json pairs = json::array();
  for (const auto& [l, r] : model.left_right_pairs) pairs.push_back({l, r});
  j["left_right_pairs"] = pairs;
  auto rows_to_json = [](const std::vector<SparseRow>& rows) {
    json out = json::array();
    for (const auto& row : rows) {
      json jr = json::array();
      for (const auto& [c, w] : row) jr.push_back({c, w});
      out.push_back(jr);
    }
    return out;
  };
  j["joint_regressor"] = rows_to_json(model.joint_regressor);
  j["skinning_weights"] = rows_to_json(model.skinning_weights);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file " + path);
  out << j.dump() << '\n';
  if (!out) throw IoError("failed writing model file " + path);
}

BodyModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "bodyfit-model") {
      throw ParseError(path + ": not a bodyfit model");
    }
    const int nv = j.at("V").get<int>();
    const int nj = j.at("J").get<int>();
    const int ns = j.at("S").get<int>();
    BodyModel m;
    m.template_vertices =
        unflatten(j.at("template_vertices").get<std::vector<double>>(), nv, "template_vertices");
    const auto faces = j.at("faces").get<std::vector<int>>();
    if (faces.size() % 3 != 0) throw ParseError(path + ": faces not a multiple of 3");
    for (std::size_t i = 0; i < faces.size(); i += 3) {
      m.faces.push_back({faces[i], faces[i + 1], faces[i + 2]});
    }
    const auto blend = j.at("shape_blendshapes").get<std::vector<double>>();
    if (blend.size() != static_cast<std::size_t>(nv) * 3 * ns) {
      throw ParseError(path + ": shape_blendshapes has wrong element count");
    }
    m.shape_blendshapes.assign(ns, Eigen::Matrix3Xd(3, nv));
    std::size_t idx = 0;
    for (int v = 0; v < nv; ++v) {
      for (int r = 0; r < 3; ++r) {
        for (int s = 0; s < ns; ++s) m.shape_blendshapes[s](r, v) = blend[idx++];
      }
    }
    m.parents = j.at("parents").get<std::vector<int>>();
    if (static_cast<int>(m.parents.size()) != nj) throw ParseError(path + ": parents length != J");
    m.joint_names = j.value("joint_names", std::vector<std::string>{});
    for (const auto& p : j.value("left_right_pairs", json::array())) {
      m.left_right_pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    }
    auto rows_from_json = [](const json& rows) {
      std::vector<SparseRow> out;
      for (const auto& row : rows) {
        SparseRow r;
        for (const auto& e : row) r.emplace_back(e.at(0).get<int>(), e.at(1).get<double>());
        out.push_back(std::move(r));
      }
      return out;
    };
    m.joint_regressor = rows_from_json(j.at("joint_regressor"));
    m.skinning_weights = rows_from_json(j.at("skinning_weights"));
    m.finalize();
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_obj(const std::string& path, const Eigen::Matrix3Xd& vertices,
               const std::vector<std::array<int, 3>>& faces) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh " + path);
  out.precision(9);
  for (Eigen::Index v = 0; v < vertices.cols(); ++v) {
    out << "v " << vertices(0, v) << ' ' << vertices(1, v) << ' ' << vertices(2, v) << '\n';
  }
  for (const auto& f : faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  if (!out) throw IoError("failed writing mesh " + path);
}

}  // namespace bodyfit
