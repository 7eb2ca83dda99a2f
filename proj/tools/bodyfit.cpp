// Command-line front end: fit, synth, eval.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bodyfit/io.hpp"
#include "bodyfit/pipeline.hpp"
#include "bodyfit/synth.hpp"

using namespace bodyfit;

namespace {

void print_error(const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
}

BodyModel load_or_make_model(const std::string& path, std::uint64_t seed) {
  return path.empty() ? make_default_model(seed) : load_model(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view body shape and pose fitting"};
  app.require_subcommand(1);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit the body model to a sequence");
  BundlePaths paths;
  std::string out_dir;
  std::string model_path;
  std::string prior_path;
  std::string trace_path;
  int views = 0;
  int threads = 1;
  std::uint64_t seed = 0;
  bool no_silhouette = false;
  bool stage2_silhouette = false;
  bool monocular = false;
  bool no_stage_two = false;
  bool obj = false;
  std::optional<double> sigma1, sigma2, lambda_t, lambda_t_depth, silhouette_weight;
  int window = 30;
  int dct_k = 10;
  fit->add_option("--detections", paths.detections, "Detections document")->required();
  fit->add_option("--cameras", paths.cameras, "Cameras document (optional with --monocular)");
  fit->add_option("--masks", paths.masks, "Directory of view{v}_frame{t}.pgm masks");
  fit->add_option("--out", out_dir, "Output directory")->required();
  fit->add_option("--views", views, "Use only the first N views");
  fit->add_option("--window", window, "Stage-two window length")->check(CLI::PositiveNumber);
  fit->add_option("--dct-k", dct_k, "DCT components per window")->check(CLI::PositiveNumber);
  fit->add_flag("--no-silhouette", no_silhouette, "Skip the silhouette pass");
  fit->add_flag("--stage2-silhouette", stage2_silhouette, "Keep silhouettes in stage two");
  fit->add_flag("--no-stage-two", no_stage_two, "Stop after the per-frame stage");
  fit->add_flag("--monocular", monocular, "Single-view mode (view 0)");
  fit->add_option("--sigma1", sigma1, "Joint robustness constant (pixels)");
  fit->add_option("--sigma2", sigma2, "Trajectory robustness constant (meters)");
  fit->add_option("--lambda-t", lambda_t, "Temporal weight");
  fit->add_option("--lambda-t-depth", lambda_t_depth,
                  "Temporal weight multiplier on the world depth axis (z)");
  fit->add_option("--silhouette-weight", silhouette_weight, "Silhouette term weight");
  fit->add_option("--seed", seed, "Seed of the procedural body model (when --model is absent)");
  fit->add_option("--model", model_path, "Body model document");
  fit->add_option("--prior", prior_path, "Pose prior document");
  fit->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  fit->add_option("--trace", trace_path, "Write the solver trace of the first frame's last pass");
  fit->add_flag("--obj", obj, "Also write per-frame OBJ meshes");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence with ground truth");
  SynthOptions so;
  std::string synth_out;
  std::uint64_t synth_model_seed = 0;
  std::string synth_model_path;
  synth->add_option("--seed", so.seed, "Random seed");
  synth->add_option("--views", so.views, "Number of views")->check(CLI::PositiveNumber);
  synth->add_option("--frames", so.frames, "Number of frames")->check(CLI::PositiveNumber);
  synth->add_option("--noise-px", so.noise_px, "Detection noise std (pixels)");
  synth->add_option("--swap-rate", so.swap_rate, "Fraction of (frame, view) cells with swapped labels");
  synth->add_option("--swap-views", so.swap_views, "Views eligible for swaps (default all)");
  synth->add_option("--mask-noise", so.mask_noise, "Max mask dilation/erosion radius (pixels)");
  synth->add_option("--model-seed", synth_model_seed, "Seed of the procedural body model");
  synth->add_option("--model", synth_model_path, "Body model document");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Compare a fit with ground truth");
  std::string fit_path;
  std::string truth_path;
  bool procrustes = false;
  bool vertex = false;
  std::uint64_t eval_model_seed = 0;
  std::string eval_model_path;
  eval->add_option("--fit", fit_path, "poses.json from fit")->required();
  eval->add_option("--truth", truth_path, "truth.json from synth")->required();
  eval->add_flag("--procrustes", procrustes, "Also report per-frame similarity-aligned error");
  eval->add_flag("--vertex-error", vertex, "Also report the rest-pose vertex error of the shape");
  eval->add_option("--model-seed", eval_model_seed, "Seed of the procedural body model");
  eval->add_option("--model", eval_model_path, "Body model document");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*fit) {
      const BodyModel model = load_or_make_model(model_path, seed);
      PipelineConfig config = default_pipeline_config(model);
      if (!prior_path.empty()) config.fit.pose_prior = load_pose_prior(prior_path);
      if (sigma1) config.fit.sigma1 = *sigma1;
      if (sigma2) config.fit.sigma2 = *sigma2;
      if (lambda_t) config.fit.lambda_t = *lambda_t;
      if (lambda_t_depth) config.fit.lambda_t_axis.z() = *lambda_t_depth;
      if (silhouette_weight) config.fit.silhouette_weight = *silhouette_weight;
      config.window = window;
      config.dct_k = dct_k;
      config.silhouette = !no_silhouette && !paths.masks.empty();
      config.stage2_silhouette = stage2_silhouette;
      config.stage_two = !no_stage_two;
      config.threads = threads;
      config.solve.trace_path = trace_path;

      SequenceBundle bundle = load_bundle(paths, model.num_joints());
      int use_views = monocular ? 1 : (views > 0 ? std::min(views, bundle.views) : bundle.views);
      if (views > bundle.views) {
        throw ValidationError("--views " + std::to_string(views) + " exceeds the " +
                              std::to_string(bundle.views) + " views in the detections");
      }
      for (auto& obs : bundle.observations) {
        obs.detections.resize(use_views);
        if (!obs.masks.empty()) obs.masks.resize(use_views);
      }
      if (!bundle.cameras.empty()) bundle.cameras.resize(use_views);

      SequenceFit result;
      if (monocular) {
        std::optional<Camera> cam;
        if (!bundle.cameras.empty()) cam = bundle.cameras[0];
        if (!cam && bundle.image_width <= 0) {
          throw ValidationError("monocular mode without cameras needs image_size in the detections or masks");
        }
        result = fit_monocular(model, bundle.observations, cam, bundle.image_width,
                               bundle.image_height, config);
      } else {
        if (bundle.cameras.empty()) throw ValidationError("--cameras is required unless --monocular");
        result = fit_sequence(model, bundle.observations, bundle.cameras, config);
      }
      write_results(model, result, config, out_dir, WriteOptions{obj});
      std::cout << "wrote " << out_dir << "/poses.json (" << result.frames() << " frames)\n";
    } else if (*synth) {
      const BodyModel model = load_or_make_model(synth_model_path, synth_model_seed);
      const SynthResult data = synth_generate(model, so);
      write_synth(data, synth_out);
      std::cout << "wrote synthetic sequence to " << synth_out << '\n';
    } else if (*eval) {
      const BodyModel model = load_or_make_model(eval_model_path, eval_model_seed);
      const FitRecord record = load_results(fit_path);
      const Truth truth = load_truth(truth_path);
      const EvalReport r = evaluate(model, record, truth, EvalOptions{procrustes, vertex});
      nlohmann::ordered_json j;
      j["frames"] = r.per_frame_mm.size();
      j["mean_joint_error_mm"] = r.mean_mm;
      j["median_joint_error_mm"] = r.median_mm;
      j["per_frame_mm"] = r.per_frame_mm;
      if (procrustes) {
        j["mean_procrustes_error_mm"] = r.mean_procrustes_mm;
        j["per_frame_procrustes_mm"] = r.per_frame_procrustes_mm;
      }
      if (vertex) j["vertex_error_mm"] = r.vertex_error_mm;
      std::cout << j.dump(1) << '\n';
    }
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
