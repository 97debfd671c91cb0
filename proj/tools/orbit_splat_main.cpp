/******************************************************************************
 * Copyright 2026 The orbit-splat Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "osplat/pipeline.hpp"

using namespace osplat;

int main(int argc, char** argv) {
  CLI::App app{
      "orbit-splat: fits an animatable 3D Gaussian body model to a calibrated "
      "orbital image sequence"};
  app.require_subcommand(1);

  std::string config_path;
  PipelineConfig cfg = default_config();

  // shared overrides (flags win over config-file values)
  std::string frames_dir, output_dir, body_asset, poses_file, gt_dir;
  int epochs = -1, batch_size = -1, gauss_count = -1, uv_res = -1,
      resolution = -1;
  double learning_rate = -1, radius = -1, elevation = -1e9, fov = -1;
  long long seed = -1, sample_seed = -1;
  std::string lpips_mode;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--frames-dir", frames_dir, "input frames directory");
    sub->add_option("--output-dir", output_dir, "output directory");
    sub->add_option("--body", body_asset, "body asset (.body)");
    sub->add_option("--poses", poses_file, "per-frame pose file");
    sub->add_option("--epochs", epochs, "training epochs");
    sub->add_option("--batch-size", batch_size, "frames per step");
    sub->add_option("--learning-rate", learning_rate, "network learning rate");
    sub->add_option("--seed", seed, "training seed");
    sub->add_option("--sample-seed", sample_seed, "surface sampling seed");
    sub->add_option("--gaussians", gauss_count, "number of gaussians");
    sub->add_option("--uv-res", uv_res, "UV map resolution");
    sub->add_option("--resolution", resolution, "render resolution");
    sub->add_option("--radius", radius, "orbit radius");
    sub->add_option("--elevation", elevation, "orbit elevation (degrees)");
    sub->add_option("--fov", fov, "vertical field of view (degrees)");
    sub->add_option("--lpips-mode", lpips_mode, "pyramid | file | none");
    sub->add_option("--gt-dir", gt_dir, "ground-truth views directory");
  };

  auto* c_augment = app.add_subcommand("augment",
                                       "super-resolve and interpolate frames");
  auto* c_fit = app.add_subcommand("fit", "optimize the gaussian body model");
  auto* c_render = app.add_subcommand("render", "render views of a checkpoint");
  auto* c_eval = app.add_subcommand("eval", "score a checkpoint against GT");
  auto* c_export = app.add_subcommand("export", "write the gaussians as PLY");

  RenderRequest render_req;
  std::string checkpoint, out_ply;
  int export_frame = -1;
  for (auto* sub : {c_augment, c_fit, c_render, c_eval, c_export})
    add_common(sub);
  c_render->add_option("--checkpoint", checkpoint, "checkpoint file")
      ->required();
  c_render->add_option("--orbit", render_req.orbit_frames,
                       "render a full turntable with this many frames");
  c_render->add_option("--azimuth", render_req.azimuths,
                       "azimuths (degrees) to render");
  c_render->add_option("--frame", render_req.frame_index,
                       "reproduce a training frame index");
  c_render->add_flag("--raw", render_req.raw,
                     "also write lossless float dumps (.raw)");
  c_eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  c_export->add_option("--checkpoint", checkpoint, "checkpoint file")
      ->required();
  c_export->add_option("--out", out_ply, "output PLY path")->required();
  c_export->add_option("--frame", export_frame,
                       "pose the export as this training frame");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    if (!frames_dir.empty()) cfg.paths.frames_dir = frames_dir;
    if (!output_dir.empty()) cfg.paths.output_dir = output_dir;
    if (!body_asset.empty()) cfg.paths.body_asset = body_asset;
    if (!poses_file.empty()) cfg.paths.poses_file = poses_file;
    if (!gt_dir.empty()) cfg.eval.gt_dir = gt_dir;
    if (epochs >= 0) cfg.train.epochs = epochs;
    if (batch_size >= 0) cfg.train.batch_size = batch_size;
    if (learning_rate >= 0) cfg.train.learning_rate = learning_rate;
    if (seed >= 0) cfg.train.seed = std::uint64_t(seed);
    if (sample_seed >= 0) cfg.sample_seed = std::uint64_t(sample_seed);
    if (gauss_count >= 0) cfg.gaussians.count = gauss_count;
    if (uv_res >= 0) cfg.gaussians.uv_resolution = uv_res;
    if (resolution >= 0) cfg.render.resolution = resolution;
    if (radius >= 0) cfg.orbit.radius = radius;
    if (elevation > -1e8) cfg.orbit.elevation = elevation;
    if (fov >= 0) cfg.orbit.fov = fov;
    if (!lpips_mode.empty()) cfg.lpips.mode = lpips_mode;

    if (c_augment->parsed()) {
      cmd_augment(cfg);
    } else if (c_fit->parsed()) {
      cmd_fit(cfg);
    } else if (c_render->parsed()) {
      render_req.checkpoint = checkpoint;
      cmd_render(cfg, render_req);
    } else if (c_eval->parsed()) {
      cmd_eval(cfg, checkpoint);
    } else if (c_export->parsed()) {
      cmd_export(cfg, checkpoint, out_ply, export_frame);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
