#include <cstdio>
#include <filesystem>
#include <random>

#include <unistd.h>

#include <Eigen/Geometry>
#include <doctest.h>
#include <png.h>

#include "bodyfit/errors.hpp"
#include "bodyfit/io.hpp"
#include "bodyfit/synth.hpp"
#include "unit.hpp"

using namespace bodyfit;
using namespace bodyfit::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("bodyfit_io_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_gray_png(const std::string& path, int w, int h, const std::vector<std::uint8_t>& pixels) {
  FILE* f = std::fopen(path.c_str(), "wb");
  REQUIRE(f);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * w));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

Eigen::Matrix3Xd random_points(std::mt19937_64& gen, int n) {
  std::normal_distribution<double> g(0.0, 0.3);
  Eigen::Matrix3Xd X(3, n);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(gen);
  return X;
}

}  // namespace

TEST_CASE("io worked examples") { require_examples("io:"); }
TEST_CASE("synth worked examples") { require_examples("synth:"); }
TEST_CASE("eval worked examples") { require_examples("eval:"); }

TEST_CASE("Procrustes alignment agrees with an SVD solution and never increases the error") {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Matrix3Xd X = random_points(gen, 24);
    Eigen::Matrix3Xd Y = random_points(gen, 24);
    if (trial % 2) {
      // Y a noisy similarity image of X.
      const Eigen::Vector3d axis = random_points(gen, 1).col(0).normalized();
      const Eigen::Matrix3d R = Eigen::AngleAxisd(0.4 * trial, axis).toRotationMatrix();
      Y = (1.3 * R * X).colwise() + Eigen::Vector3d(0.1, -0.2, 0.4);
      for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] += noise(gen);
    }
    const Eigen::Matrix3Xd aligned = procrustes_align(X, Y);
    CHECK((aligned - svd_procrustes(X, Y)).norm() < 1e-8);
    CHECK((aligned - Y).norm() <= (X - Y).norm() + 1e-12);
  }
}

TEST_CASE("cameras round-trip through their document") {
  TempDir dir("cameras");
  SynthOptions so;
  so.views = 3;
  std::vector<Camera> cams = ring_cameras(so);
  cams[1].focal = {812.5, 790.25};
  cams[2].principal_point = {251.125, 247.0};
  const std::string path = (dir.path / "cameras.json").string();
  save_cameras(path, cams);
  const auto back = load_cameras(path);
  REQUIRE(back.size() == cams.size());
  for (std::size_t v = 0; v < cams.size(); ++v) {
    CHECK((back[v].rotation - cams[v].rotation).norm() < 1e-12);
    CHECK((back[v].translation - cams[v].translation).norm() < 1e-12);
    CHECK(back[v].focal == cams[v].focal);
    CHECK(back[v].principal_point == cams[v].principal_point);
    CHECK(back[v].width == cams[v].width);
    CHECK(back[v].height == cams[v].height);
  }
}

TEST_CASE("pose prior sidecar round-trips") {
  TempDir dir("prior");
  PosePrior p = make_default_pose_prior(shared_model());
  std::mt19937_64 gen(2);
  std::normal_distribution<double> g(0.0, 0.1);
  for (Eigen::Index i = 0; i < p.mean.size(); ++i) p.mean[i] = g(gen);
  const std::string path = (dir.path / "prior.json").string();
  save_pose_prior(path, p);
  const PosePrior back = load_pose_prior(path);
  CHECK((back.mean - p.mean).norm() < 1e-12);
  CHECK((back.precision - p.precision).norm() < 1e-12);
}

TEST_CASE("ground truth round-trips") {
  TempDir dir("truth");
  const BodyModel& m = shared_model();
  SynthOptions so;
  so.seed = 3;
  so.views = 2;
  so.frames = 3;
  so.swap_rate = 0.5;
  so.masks = false;
  const Truth t = synth_generate(m, so).truth;
  const std::string path = (dir.path / "truth.json").string();
  save_truth(path, t);
  const Truth back = load_truth(path);
  CHECK((back.shape.beta - t.shape.beta).norm() < 1e-12);
  REQUIRE(back.poses.size() == t.poses.size());
  for (std::size_t f = 0; f < t.poses.size(); ++f) {
    CHECK((pack_params(back.poses[f], back.shape) - pack_params(t.poses[f], t.shape)).norm() < 1e-12);
    CHECK((back.joints[f] - t.joints[f]).norm() < 1e-12);
  }
  CHECK((back.rest_vertices - t.rest_vertices).norm() < 1e-12);
  CHECK(back.swapped == t.swapped);
}

TEST_CASE("masks round-trip through PGM and are read from PNG") {
  TempDir dir("masks");
  const Mask m = random_mask(37, 23, 0.4, 4);
  const std::string pgm = (dir.path / mask_filename(0, 3)).string();
  write_pgm(pgm, m);
  CHECK(read_pgm(pgm) == m);
  CHECK(read_mask(pgm) == m);

  std::vector<std::uint8_t> gray(m.data.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = m.data[i] ? 200 : 100;
  const std::string png = (dir.path / "mask.png").string();
  write_gray_png(png, m.width, m.height, gray);
  CHECK(read_png(png) == m);
  CHECK(read_mask(png) == m);
}

TEST_CASE("mask files are named by view and frame") {
  CHECK(mask_filename(0, 12) == "view0_frame12.pgm");
}

TEST_CASE("evaluating a fit against itself scores zero") {
  const BodyModel& m = shared_model();
  SynthOptions so;
  so.seed = 5;
  so.views = 1;
  so.frames = 4;
  so.masks = false;
  const Truth t = synth_generate(m, so).truth;
  FitRecord rec;
  rec.shape = t.shape;
  rec.poses = t.poses;
  rec.joints = t.joints;
  const EvalReport r = evaluate(m, rec, t, {true, true});
  CHECK(r.mean_mm == 0.0);
  CHECK(r.median_mm == 0.0);
  CHECK(r.mean_procrustes_mm < 1e-9);
  CHECK(r.vertex_error_mm == 0.0);
  CHECK(r.per_frame_mm.size() == 4);
}

TEST_CASE("mean joint error is the mean Euclidean distance in millimetres") {
  Eigen::Matrix3Xd a = Eigen::Matrix3Xd::Zero(3, 2), b = a;
  b(0, 0) = 0.003;
  b(1, 1) = 0.004;
  b(2, 1) = 0.003;
  CHECK(mean_joint_error_mm(a, b) == doctest::Approx(4.0).epsilon(1e-12));
}
