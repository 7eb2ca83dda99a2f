#include "bodyfit/silhouette.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>

#include "bodyfit/log.hpp"

namespace bodyfit {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

RenderedSilhouette rasterize_projected(const Eigen::Matrix2Xd& projected,
                                       const std::vector<std::uint8_t>& valid,
                                       const std::vector<std::array<int, 3>>& faces, int width,
                                       int height) {
  RenderedSilhouette out;
  out.mask = Mask(width, height);
  for (const auto& f : faces) {
    if (!valid[f[0]] || !valid[f[1]] || !valid[f[2]]) continue;
    const Eigen::Vector2d a = projected.col(f[0]);
    const Eigen::Vector2d b = projected.col(f[1]);
    const Eigen::Vector2d c = projected.col(f[2]);
    const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (area == 0.0 || !std::isfinite(area)) continue;
    const double sign = area > 0.0 ? 1.0 : -1.0;
    const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({a.x(), b.x(), c.x()}))));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(std::max({a.x(), b.x(), c.x()}))));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({a.y(), b.y(), c.y()}))));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(std::max({a.y(), b.y(), c.y()}))));
    auto edge = [sign](const Eigen::Vector2d& p, const Eigen::Vector2d& q, double x, double y) {
      return sign * ((q.x() - p.x()) * (y - p.y()) - (q.y() - p.y()) * (x - p.x()));
    };
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (edge(a, b, x, y) >= 0.0 && edge(b, c, x, y) >= 0.0 && edge(c, a, x, y) >= 0.0) {
          out.mask.set(x, y);
        }
      }
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (out.mask.at(x, y)) out.pixels.emplace_back(x, y);
    }
  }
  out.off_screen = out.pixels.empty();
  return out;
}

namespace {

void project_vertices(const Camera& cam, const Eigen::Matrix3Xd& vertices, Eigen::Matrix2Xd& projected,
                      std::vector<std::uint8_t>& valid) {
  const Eigen::Index nv = vertices.cols();
  projected.resize(2, nv);
  valid.assign(static_cast<std::size_t>(nv), 0);
  for (Eigen::Index v = 0; v < nv; ++v) {
    const Eigen::Vector3d xc = cam.rotation * vertices.col(v) + cam.translation;
    if (xc.z() > kMinDepth) {
      projected.col(v) = cam.focal.cwiseProduct(xc.head<2>() / xc.z()) + cam.principal_point;
      valid[v] = 1;
    } else {
      projected.col(v).setZero();
    }
  }
}

// Squared 1D distance transform of a sampled function (lower envelope of
// parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates the whole line.
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), inf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace

RenderedSilhouette rasterize(const BodyModel& model, const ShapeParams& shape,
                             const PoseParams& pose, const Camera& cam) {
  const PosedBody body = forward(model, shape, pose);
  Eigen::Matrix2Xd projected;
  std::vector<std::uint8_t> valid;
  project_vertices(cam, body.vertices, projected, valid);
  return rasterize_projected(projected, valid, model.faces, cam.width, cam.height);
}

DistanceField distance_transform(const Mask& mask, double max_distance) {
  const int w = mask.width;
  const int h = mask.height;
  DistanceField field;
  field.width = w;
  field.height = h;
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (mask.empty()) {
    field.values.assign(static_cast<std::size_t>(w) * h, inf);
    field.empty_source = true;
    return field;
  }
  std::vector<double> sq(static_cast<std::size_t>(w) * h);
  const int n = std::max(w, h);
  std::vector<double> f, d;
  std::vector<int> v(n + 1);
  std::vector<double> z(n + 2);

  f.resize(h);
  d.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = mask.at(x, y) ? 0.0 : inf;
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) sq[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  f.resize(w);
  d.resize(w);
  field.values.resize(sq.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = sq[static_cast<std::size_t>(y) * w + x];
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) {
      field.values[static_cast<std::size_t>(y) * w + x] = std::min(std::sqrt(d[x]), max_distance);
    }
  }
  return field;
}

DistanceField signed_distance_field(const Mask& mask, double max_distance) {
  DistanceField out = distance_transform(mask, max_distance);
  if (out.empty_source) return out;
  Mask inverse(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.data.size(); ++i) inverse.data[i] = mask.data[i] ? 0 : 1;
  const DistanceField inside = distance_transform(inverse, max_distance);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (mask.data[i]) {
      // A full mask has no background: treat it as deep inside.
      out.values[i] = inside.empty_source ? -max_distance : 0.5 - inside.values[i];
    } else {
      out.values[i] -= 0.5;
    }
  }
  return out;
}

namespace {

double capped(double v) { return std::isfinite(v) ? v : kMaxSilhouetteDistance; }

}  // namespace

double silhouette_term(const RenderedSilhouette& rendered, const Mask& observed,
                       const DistanceField& observed_field,
                       const DistanceField& rendered_field, int stride) {
  const int w = observed.width;
  const int h = observed.height;
  if (stride < 1) throw InvalidArgument("silhouette stride must be positive");
  if (rendered.mask.width != w || rendered.mask.height != h || observed_field.width != w ||
      observed_field.height != h || rendered_field.width != w || rendered_field.height != h) {
    throw InvalidArgument("silhouette term inputs have mismatched dimensions");
  }
  double total = 0.0;
  for (int y = 0; y < h; y += stride) {
    for (int x = 0; x < w; x += stride) {
      if (rendered.mask.at(x, y)) {
        const double l = capped(observed_field.at(x, y));
        total += l * l;
      }
      if (observed.at(x, y)) total += capped(rendered_field.at(x, y));
    }
  }
  return total;
}

double stage_one_objective(const BodyModel& model, const ShapeParams& shape,
                           const PoseParams& pose, std::span<const Camera> cameras,
                           std::span<const JointDetections> dets, std::span<const Mask> masks,
                           const FitConfig& config) {
  double total = multiview_term(model, shape, pose, cameras, dets, config);
  if (masks.empty() || config.silhouette_weight == 0.0) return total;
  if (masks.size() != cameras.size()) {
    throw InvalidArgument("mask view count does not match camera count");
  }
  const PosedBody body = forward(model, shape, pose);
  double sil = 0.0;
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    const Mask& observed = masks[v];
    if (observed.width != cameras[v].width || observed.height != cameras[v].height) {
      throw InvalidArgument("mask size does not match camera image size in view " +
                            std::to_string(v));
    }
    if (observed.empty()) {
      log_warning("empty observed silhouette in view " + std::to_string(v) + "; term skipped");
      continue;
    }
    Eigen::Matrix2Xd projected;
    std::vector<std::uint8_t> valid;
    project_vertices(cameras[v], body.vertices, projected, valid);
    const RenderedSilhouette rendered =
        rasterize_projected(projected, valid, model.faces, cameras[v].width, cameras[v].height);
    sil += silhouette_term(rendered, observed, distance_transform(observed),
                           distance_transform(rendered.mask), config.silhouette_stride);
  }
  return total + config.silhouette_weight * sil;
}

std::vector<int> rim_vertices(const BodyModel& model, const Eigen::Matrix3Xd& posed_vertices,
                              const Camera& cam) {
  Eigen::Matrix2Xd projected;
  std::vector<std::uint8_t> valid;
  project_vertices(cam, posed_vertices, projected, valid);
  std::vector<signed char> orient(model.faces.size(), 0);
  for (std::size_t f = 0; f < model.faces.size(); ++f) {
    const auto& tri = model.faces[f];
    if (!valid[tri[0]] || !valid[tri[1]] || !valid[tri[2]]) continue;
    const Eigen::Vector2d ab = projected.col(tri[1]) - projected.col(tri[0]);
    const Eigen::Vector2d ac = projected.col(tri[2]) - projected.col(tri[0]);
    const double area = ab.x() * ac.y() - ab.y() * ac.x();
    orient[f] = area > 0.0 ? 1 : (area < 0.0 ? -1 : 0);
  }
  std::vector<std::uint8_t> is_rim(static_cast<std::size_t>(posed_vertices.cols()), 0);
  for (const auto& e : model.edges) {
    const int a = orient[e[2]];
    const int b = orient[e[3]];
    if (a != 0 && b != 0 && a != b) {
      is_rim[e[0]] = 1;
      is_rim[e[1]] = 1;
    }
  }
  std::vector<int> out;
  for (std::size_t v = 0; v < is_rim.size(); ++v) {
    if (is_rim[v]) out.push_back(static_cast<int>(v));
  }
  return out;
}

SilhouetteLinearization linearize_silhouette(const BodyModel& model, const Eigen::VectorXd& params,
                                             std::span<const Camera> cameras,
                                             std::span<const Mask> masks, int stride) {
  PoseParams pose;
  ShapeParams shape;
  unpack_params(model, params, pose, shape);
  const PosedBody body = forward(model, shape, pose);

  SilhouetteLinearization lin;
  lin.views.resize(cameras.size());
  std::vector<std::uint8_t> used(static_cast<std::size_t>(model.num_vertices()), 0);
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    auto& view = lin.views[v];
    if (v >= masks.size() || masks[v].empty()) continue;
    view.active = true;
    view.rim_vertices = rim_vertices(model, body.vertices, cameras[v]);

    Eigen::Matrix2Xd projected;
    std::vector<std::uint8_t> valid;
    project_vertices(cameras[v], body.vertices, projected, valid);
    const RenderedSilhouette rendered =
        rasterize_projected(projected, valid, model.faces, cameras[v].width, cameras[v].height);

    std::vector<int> candidates;
    for (int r : view.rim_vertices) {
      if (valid[r]) candidates.push_back(r);
    }
    const Mask& observed = masks[v];
    for (int y = 0; y < observed.height; y += stride) {
      for (int x = 0; x < observed.width; x += stride) {
        if (!observed.at(x, y) || rendered.mask.at(x, y) || candidates.empty()) continue;
        const Eigen::Vector2d p(x, y);
        int best = candidates.front();
        double best_d = std::numeric_limits<double>::infinity();
        for (int c : candidates) {
          const double d = (projected.col(c) - p).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        view.outside_pixels.push_back(p);
        view.matched_vertex.push_back(best);
      }
    }
    for (int r : view.rim_vertices) used[r] = 1;
  }
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (used[i]) lin.vertices.push_back(static_cast<int>(i));
  }
  return lin;
}

}  // namespace bodyfit
