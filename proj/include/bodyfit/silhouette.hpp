#pragma once

// Silhouette data term: rasterization of the posed mesh, exact Euclidean
// distance transforms and the bidirectional model/observation mismatch.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bodyfit/body_model.hpp"
#include "bodyfit/camera.hpp"
#include "bodyfit/energy.hpp"

namespace bodyfit {

/// Distances are capped here so gross segmentation failures have bounded
/// influence.
inline constexpr double kMaxSilhouetteDistance = 64.0;

/// Binary image; pixel (x, y) has its centre at integer coordinates (x, y).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  ///< row-major, nonzero = foreground

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool on = true) {
    data[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0;
  }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  bool operator==(const Mask&) const = default;
};

struct DistanceField {
  int width = 0;
  int height = 0;
  std::vector<double> values;  ///< pixels; +inf everywhere when `empty_source`
  bool empty_source = false;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct RenderedSilhouette {
  Mask mask;
  std::vector<Eigen::Vector2i> pixels;  ///< foreground pixels, row-major order
  bool off_screen = false;              ///< no foreground pixel at all
};

/// Rasterizes triangles given projected vertex positions; vertices flagged
/// invalid (behind the camera) drop their triangles.
RenderedSilhouette rasterize_projected(const Eigen::Matrix2Xd& projected,
                                       const std::vector<std::uint8_t>& valid,
                                       const std::vector<std::array<int, 3>>& faces, int width,
                                       int height);

RenderedSilhouette rasterize(const BodyModel& model, const ShapeParams& shape,
                             const PoseParams& pose, const Camera& cam);

/// Exact Euclidean distance transform (separable lower-envelope algorithm),
/// values capped at `max_distance`.
DistanceField distance_transform(const Mask& mask,
                                 double max_distance = kMaxSilhouetteDistance);

/// Signed field for the differentiable surrogate: distance to the pixel
/// boundary, positive outside the mask and negative inside, so that the zero
/// level sits halfway between foreground and background pixel centres.
DistanceField signed_distance_field(const Mask& mask, double max_distance = kMaxSilhouetteDistance);

/// sum over strided rendered pixels of l(x, observed)^2 plus sum over strided
/// observed pixels of l(x, rendered).
double silhouette_term(const RenderedSilhouette& rendered, const Mask& observed,
                       const DistanceField& observed_field,
                       const DistanceField& rendered_field, int stride);

/// E_1 = E_M + silhouette_weight * sum_v E_S. Views whose observed mask is
/// empty skip their silhouette term. `masks` may be empty (no silhouettes).
double stage_one_objective(const BodyModel& model, const ShapeParams& shape,
                           const PoseParams& pose, std::span<const Camera> cameras,
                           std::span<const JointDetections> dets, std::span<const Mask> masks,
                           const FitConfig& config);

// ---------------------------------------------------------------------------
// Differentiable surrogate used by the solver. The rendered-side term is
// evaluated on silhouette-rim vertices against the interpolated signed
// observed field; the observed-side term pairs each observed pixel outside
// the rendered mask with its nearest projected rim vertex. Rim sets and
// pairings are frozen by linearize_silhouette().

struct SilhouetteViewLinearization {
  bool active = false;
  std::vector<int> rim_vertices;
  std::vector<Eigen::Vector2d> outside_pixels;
  std::vector<int> matched_vertex;  ///< model vertex index per outside pixel
};

struct SilhouetteLinearization {
  std::vector<SilhouetteViewLinearization> views;
  std::vector<int> vertices;  ///< union of all rim vertices, sorted
};

/// Vertices on the silhouette rim: endpoints of edges whose two faces have
/// opposite image-space orientation.
std::vector<int> rim_vertices(const BodyModel& model, const Eigen::Matrix3Xd& posed_vertices,
                              const Camera& cam);

SilhouetteLinearization linearize_silhouette(const BodyModel& model, const Eigen::VectorXd& params,
                                             std::span<const Camera> cameras,
                                             std::span<const Mask> masks, int stride);

/// Catmull-Rom interpolation of a field: continuously differentiable, so
/// the surrogate has a well-defined Jacobian across pixel boundaries. Points
/// outside the image take the value at the nearest border sample.
template <class T>
T interpolate_field(const DistanceField& field, const T& px, const T& py) {
  auto axis = [](const T& p, int size, int& i0, std::array<T, 4>& w) {
    const double pv = value_of(p);
    T t;
    if (pv <= 0.0 || size == 1) {
      i0 = 0;
      t = T(0.0);
    } else if (pv >= size - 1) {
      i0 = size - 1;
      t = T(0.0);
    } else {
      i0 = static_cast<int>(std::floor(pv));
      t = p - static_cast<double>(i0);
    }
    const T t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-1.0 * t3 + 2.0 * t2 - t);
    w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
    w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
  };
  int x0, y0;
  std::array<T, 4> wx, wy;
  axis(px, field.width, x0, wx);
  axis(py, field.height, y0, wy);
  auto val = [&](int x, int y) {
    x = std::clamp(x, 0, field.width - 1);
    y = std::clamp(y, 0, field.height - 1);
    const double v = field.at(x, y);
    return std::isfinite(v) ? v : kMaxSilhouetteDistance;
  };
  T out(0.0);
  for (int j = 0; j < 4; ++j) {
    T row(0.0);
    for (int i = 0; i < 4; ++i) row = row + wx[i] * val(x0 - 1 + i, y0 - 1 + j);
    out = out + wy[j] * row;
  }
  return out;
}

/// Smooth lower bound: floor + tau * log(1 + exp((d - floor) / tau)).
template <class T>
T soft_floor(const T& d, double floor, double tau) {
  const double z = (value_of(d) - floor) / tau;
  if (z > 30.0) return d;
  const double value = floor + tau * std::log1p(std::exp(z));
  if constexpr (is_dual<T>::value) {
    return apply(d, value, 1.0 / (1.0 + std::exp(-z)));
  } else {
    return value;
  }
}

/// Residuals whose squared norm is weight * (surrogate E_S summed over views).
/// `observed_fields` are signed_distance_field() of the observed masks.
template <class T>
void append_silhouette_residuals(const BodyModel& model, const Kinematics<T>& k, const T* params,
                                 std::span<const Camera> cameras,
                                 std::span<const DistanceField> observed_fields,
                                 const SilhouetteLinearization& lin, double weight,
                                 std::vector<T>& out) {
  using std::sqrt;
  const double sw = std::sqrt(weight);
  std::vector<Vec3<T>> posed(lin.vertices.size());
  for (std::size_t i = 0; i < lin.vertices.size(); ++i) {
    posed[i] = skin_vertex(model, k, params, lin.vertices[i]);
  }
  auto lookup = [&](int vertex) -> const Vec3<T>& {
    const auto it = std::lower_bound(lin.vertices.begin(), lin.vertices.end(), vertex);
    return posed[static_cast<std::size_t>(it - lin.vertices.begin())];
  };
  constexpr double kEps2 = 1e-6;
  constexpr double kRimInsideClamp = 1.0;
  constexpr double kRimClampWidth = 0.2;
  for (std::size_t v = 0; v < lin.views.size(); ++v) {
    const auto& view = lin.views[v];
    if (!view.active) continue;
    for (int vertex : view.rim_vertices) {
      const auto pix = project_point(cameras[v], lookup(vertex));
      if (!pix) {
        out.emplace_back(sw * kMaxSilhouetteDistance);
        continue;
      }
      // Interior occluding contours lie inside the observed mask and cost
      // nothing in the rasterized term; clamping keeps them from being
      // pushed outward while boundary rims still see the signed distance.
      const T d = interpolate_field(observed_fields[v], (*pix)[0], (*pix)[1]);
      out.push_back(sw * soft_floor(d, -kRimInsideClamp, kRimClampWidth));
    }
    for (std::size_t i = 0; i < view.outside_pixels.size(); ++i) {
      const auto pix = project_point(cameras[v], lookup(view.matched_vertex[i]));
      if (!pix) {
        out.emplace_back(sw * std::sqrt(kMaxSilhouetteDistance));
        out.emplace_back(0.0);
        continue;
      }
      const T dx = view.outside_pixels[i].x() - (*pix)[0];
      const T dy = view.outside_pixels[i].y() - (*pix)[1];
      // |r|^2 = |d|^2 / sqrt(|d|^2 + eps^2) ~ |d|  (L1 distance)
      const T s = sw / sqrt(sqrt(dx * dx + dy * dy + kEps2));
      out.push_back(dx * s);
      out.push_back(dy * s);
    }
  }
}

}  // namespace bodyfit
