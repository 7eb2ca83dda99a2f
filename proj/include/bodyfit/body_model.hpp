#pragma once

// Parametric articulated body: identity blendshapes on a template mesh, a
// kinematic tree posed with axis-angle rotations, linear blend skinning and
// a sparse joint regressor.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bodyfit/errors.hpp"
#include "bodyfit/rotation.hpp"

namespace bodyfit {

inline constexpr int kShapeDim = 10;

/// One nonzero of a sparse row: (column index, weight).
using SparseRow = std::vector<std::pair<int, double>>;

struct BodyModel {
  Eigen::Matrix3Xd template_vertices;            ///< 3 x V, meters
  std::vector<std::array<int, 3>> faces;         ///< outward-oriented triangles
  std::vector<Eigen::Matrix3Xd> shape_blendshapes;  ///< S channels of 3 x V
  std::vector<int> parents;                      ///< -1 for the root
  std::vector<SparseRow> joint_regressor;        ///< J rows over vertices
  std::vector<SparseRow> skinning_weights;       ///< V rows over joints
  std::vector<std::string> joint_names;
  std::vector<std::pair<int, int>> left_right_pairs;

  // Derived by finalize(): regressor applied to the template and blendshapes.
  Eigen::Matrix3Xd template_joints;
  std::vector<Eigen::Matrix3Xd> joint_blendshapes;
  /// Interior edges with their two adjacent faces (v0, v1, f0, f1).
  std::vector<std::array<int, 4>> edges;

  int num_vertices() const { return static_cast<int>(template_vertices.cols()); }
  int num_joints() const { return static_cast<int>(parents.size()); }
  int num_shape() const { return static_cast<int>(shape_blendshapes.size()); }

  /// Checks every structural invariant; throws ValidationError.
  void validate() const;
  /// Recomputes the derived members. Call after editing the raw fields.
  void finalize();
};

struct ShapeParams {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(kShapeDim);
};

struct PoseParams {
  Eigen::Vector3d root_translation = Eigen::Vector3d::Zero();
  /// 3 x J axis-angle rotations; column 0 is the root orientation.
  Eigen::Matrix3Xd joint_rotations;

  static PoseParams rest(int num_joints) {
    PoseParams p;
    p.joint_rotations = Eigen::Matrix3Xd::Zero(3, num_joints);
    return p;
  }
};

struct PosedBody {
  Eigen::Matrix3Xd vertices;
  Eigen::Matrix3Xd joints;
};

struct ModelOptions {
  int rings = 4;     ///< rings per limb capsule (>= 2)
  int segments = 10;  ///< vertices per ring (>= 3)
};

/// Procedural 24-joint humanoid. Deterministic in (seed, options).
BodyModel make_default_model(std::uint64_t seed = 0, const ModelOptions& options = {});

struct ShapedTemplate {
  Eigen::Matrix3Xd vertices;
  Eigen::Matrix3Xd joints;
};

ShapedTemplate shape_template(const BodyModel& model, const ShapeParams& shape);

PosedBody forward(const BodyModel& model, const ShapeParams& shape, const PoseParams& pose);

/// Joint positions only (cheaper than forward()).
Eigen::Matrix3Xd posed_joints(const BodyModel& model, const ShapeParams& shape,
                              const PoseParams& pose);

/// Torso joints used for coarse placement (pelvis, hips, spine, neck,
/// collars, shoulders) of the default topology.
std::vector<int> torso_joints(const BodyModel& model);

// Flat parameter layout shared by the fitting code:
// [root_translation (3), joint_rotations (3J, column-major), beta (S)].
int param_count(const BodyModel& model);
Eigen::VectorXd pack_params(const PoseParams& pose, const ShapeParams& shape);
void unpack_params(const BodyModel& model, const Eigen::VectorXd& x, PoseParams& pose,
                   ShapeParams& shape);

// Serialization (JSON text, layout documented in README) and OBJ export.
void save_model(const BodyModel& model, const std::string& path);
BodyModel load_model(const std::string& path);
void write_obj(const std::string& path, const Eigen::Matrix3Xd& vertices,
               const std::vector<std::array<int, 3>>& faces);

// ---------------------------------------------------------------------------
// Scalar-generic kinematics used by the energies and their Jacobians.

template <class T>
struct Kinematics {
  std::vector<Mat3<T>> rotations;  ///< global rotation per joint
  std::vector<Vec3<T>> rest;       ///< shaped rest joints
  std::vector<Vec3<T>> joints;     ///< posed joints (root translation applied)
};

/// `params` follows the flat layout above and must hold param_count() values.
template <class T>
Kinematics<T> compute_kinematics(const BodyModel& model, const T* params) {
  const int nj = model.num_joints();
  const int ns = model.num_shape();
  const T* translation = params;
  const T* rot = params + 3;
  const T* beta = params + 3 + 3 * nj;

  Kinematics<T> k;
  k.rotations.resize(nj);
  k.rest.resize(nj);
  k.joints.resize(nj);
  for (int j = 0; j < nj; ++j) {
    Vec3<T> p = lift<T>(model.template_joints.col(j));
    for (int s = 0; s < ns; ++s) {
      const auto& bs = model.joint_blendshapes[s];
      p[0] += beta[s] * bs(0, j);
      p[1] += beta[s] * bs(1, j);
      p[2] += beta[s] * bs(2, j);
    }
    k.rest[j] = p;
  }
  for (int j = 0; j < nj; ++j) {
    const Mat3<T> local = rodrigues(rot[3 * j], rot[3 * j + 1], rot[3 * j + 2]);
    const int parent = model.parents[j];
    if (parent < 0) {
      k.rotations[j] = local;
      k.joints[j] = {k.rest[j][0] + translation[0], k.rest[j][1] + translation[1],
                     k.rest[j][2] + translation[2]};
    } else {
      k.rotations[j] = mul(k.rotations[parent], local);
      k.joints[j] = k.joints[parent] + mul(k.rotations[parent], k.rest[j] - k.rest[parent]);
    }
  }
  return k;
}

/// Posed position of one vertex by linear blend skinning.
template <class T>
Vec3<T> skin_vertex(const BodyModel& model, const Kinematics<T>& k, const T* params, int v) {
  const int ns = model.num_shape();
  const T* beta = params + 3 + 3 * model.num_joints();
  Vec3<T> shaped = lift<T>(model.template_vertices.col(v));
  for (int s = 0; s < ns; ++s) {
    const auto& bs = model.shape_blendshapes[s];
    shaped[0] += beta[s] * bs(0, v);
    shaped[1] += beta[s] * bs(1, v);
    shaped[2] += beta[s] * bs(2, v);
  }
  Vec3<T> out{T(0.0), T(0.0), T(0.0)};
  for (const auto& [j, w] : model.skinning_weights[v]) {
    const Vec3<T> local = mul(k.rotations[j], shaped - k.rest[j]) + k.joints[j];
    out = out + scale(w, local);
  }
  return out;
}

}  // namespace bodyfit
