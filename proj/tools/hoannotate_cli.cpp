// Command-line front end; exercises the engine exclusively through the
// shared-library C interface.
#include "hoannotate.h"

#include "CLI11.hpp"

#include <cstdio>
#include <string>

namespace {

int report(hoa_status status) {
  if (status != HOA_OK) {
    std::fprintf(stderr, "error: %s\n", hoa_last_error());
  }
  return static_cast<int>(status);
}

struct CommonArgs {
  std::string sequence;
  std::string config;
  std::string out;
  std::string gt;
  long long seed = 0;
  int downscale = 4;
  bool overlays = false;

  hoa_options options() const {
    hoa_options opts;
    hoa_options_init(&opts);
    opts.seed = seed;
    opts.downscale = downscale;
    opts.config_file = config.empty() ? nullptr : config.c_str();
    opts.gt_dir = gt.empty() ? nullptr : gt.c_str();
    opts.write_overlays = overlays ? 1 : 0;
    return opts;
  }
};

void addCommonFlags(CLI::App* cmd, CommonArgs* args, bool with_sequence = true) {
  if (with_sequence) {
    cmd->add_option("--sequence", args->sequence, "Sequence directory")->required();
  }
  cmd->add_option("--config", args->config, "key=value config file");
  cmd->add_option("--out", args->out, "Output directory")->required();
  cmd->add_option("--seed", args->seed, "Random seed");
  cmd->add_option("--downscale", args->downscale,
                  "Observation downscale during optimization");
  cmd->add_option("--gt", args->gt, "Ground-truth directory for metrics");
  cmd->add_flag("--overlays", args->overlays, "Write silhouette overlay images");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markerless hand+object 3D pose annotation"};
  app.require_subcommand(1);

  CommonArgs multi_args, single_args, shape_args, synth_args;

  auto* multi = app.add_subcommand("annotate-multi",
                                   "Annotate a multi-camera RGB-D sequence");
  addCommonFlags(multi, &multi_args);

  auto* single = app.add_subcommand("annotate-single",
                                    "Annotate a single-camera rigid-grasp sequence");
  addCommonFlags(single, &single_args);

  auto* shape = app.add_subcommand("calibrate-shape",
                                   "Estimate hand shape from a hand-only sequence");
  addCommonFlags(shape, &shape_args);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence");
  addCommonFlags(synth, &synth_args, false);

  std::string fit_keypoints, fit_calib, fit_model, fit_out_pose, fit_out_shape,
      fit_config;
  auto* fit = app.add_subcommand("fit-hand",
                                 "Fit hand pose+shape to single-image keypoints");
  fit->add_option("--keypoints", fit_keypoints,
                  "CSV: 21 rows u,v,conf then 20 rows dx,dy,dz")
      ->required();
  fit->add_option("--calib", fit_calib, "Calibration file (camera 0 is used)")
      ->required();
  fit->add_option("--model", fit_model, "Hand model file")->required();
  fit->add_option("--out", fit_out_pose, "Output pose CSV (51 floats)")->required();
  fit->add_option("--out-shape", fit_out_shape, "Output shape CSV (10 floats)");
  fit->add_option("--config", fit_config, "key=value config file");

  long long grad_seed = 0;
  auto* grad = app.add_subcommand("check-grad",
                                  "Finite-difference gradient verification");
  grad->add_option("--seed", grad_seed, "Random seed");

  std::string eval_result, eval_gt, eval_sequence;
  auto* eval = app.add_subcommand("eval", "Metrics of a result vs ground truth");
  eval->add_option("--result", eval_result, "Result directory")->required();
  eval->add_option("--gt", eval_gt, "Ground-truth directory")->required();
  eval->add_option("--sequence", eval_sequence, "Sequence directory (for models)")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (multi->parsed()) {
    const hoa_options opts = multi_args.options();
    return report(hoa_annotate_multi(multi_args.sequence.c_str(),
                                     multi_args.out.c_str(), &opts));
  }
  if (single->parsed()) {
    const hoa_options opts = single_args.options();
    return report(hoa_annotate_single(single_args.sequence.c_str(),
                                      single_args.out.c_str(), &opts));
  }
  if (shape->parsed()) {
    const hoa_options opts = shape_args.options();
    return report(hoa_calibrate_shape(shape_args.sequence.c_str(),
                                      shape_args.out.c_str(), &opts));
  }
  if (synth->parsed()) {
    const hoa_options opts = synth_args.options();
    return report(hoa_synth(synth_args.out.c_str(), &opts));
  }
  if (fit->parsed()) {
    hoa_options opts;
    hoa_options_init(&opts);
    opts.config_file = fit_config.empty() ? nullptr : fit_config.c_str();
    return report(hoa_fit_hand(fit_keypoints.c_str(), fit_calib.c_str(),
                               fit_model.c_str(), fit_out_pose.c_str(),
                               fit_out_shape.empty() ? nullptr : fit_out_shape.c_str(),
                               &opts));
  }
  if (grad->parsed()) {
    return report(hoa_check_grad(grad_seed, 1));
  }
  if (eval->parsed()) {
    return report(hoa_eval(eval_result.c_str(), eval_gt.c_str(),
                           eval_sequence.c_str()));
  }
  return 0;
}
