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
#include <json.hpp>

#include <fstream>

#include "osplat/pipeline.hpp"

namespace osplat {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where,
                const std::vector<std::string>& allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ValidationError("config: unknown key '" + key + "' in " + where);
  }
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

PipelineConfig default_config() { return {}; }

PipelineConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config: parse error in " + path + ": " + e.what());
  }

  PipelineConfig cfg;
  try {
    check_keys(j, "root",
               {"paths", "orbit", "augment", "gaussians", "lpips", "train",
                "render", "eval", "beta", "sample_seed"});
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      check_keys(p, "paths", {"frames_dir", "body_asset", "poses_file",
                              "output_dir"});
      maybe(p, "frames_dir", cfg.paths.frames_dir);
      maybe(p, "body_asset", cfg.paths.body_asset);
      maybe(p, "poses_file", cfg.paths.poses_file);
      maybe(p, "output_dir", cfg.paths.output_dir);
    }
    if (j.contains("orbit")) {
      const auto& o = j.at("orbit");
      check_keys(o, "orbit", {"n_frames", "elevation", "radius", "fov"});
      maybe(o, "n_frames", cfg.orbit.n_frames);
      maybe(o, "elevation", cfg.orbit.elevation);
      maybe(o, "radius", cfg.orbit.radius);
      maybe(o, "fov", cfg.orbit.fov);
    }
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      check_keys(a, "augment",
                 {"sr_factor", "target_size", "flow_levels", "flow_iterations",
                  "flow_sweeps", "flow_smoothness"});
      maybe(a, "sr_factor", cfg.augment.sr_factor);
      maybe(a, "target_size", cfg.augment.target_size);
      maybe(a, "flow_levels", cfg.augment.flow_levels);
      maybe(a, "flow_iterations", cfg.augment.flow_iterations);
      maybe(a, "flow_sweeps", cfg.augment.flow_sweeps);
      maybe(a, "flow_smoothness", cfg.augment.flow_smoothness);
    }
    if (j.contains("gaussians")) {
      const auto& g = j.at("gaussians");
      check_keys(g, "gaussians",
                 {"count", "uv_resolution", "feature_channels", "hidden_widths"});
      maybe(g, "count", cfg.gaussians.count);
      maybe(g, "uv_resolution", cfg.gaussians.uv_resolution);
      maybe(g, "feature_channels", cfg.gaussians.feature_channels);
      maybe(g, "hidden_widths", cfg.gaussians.hidden_widths);
    }
    if (j.contains("lpips")) {
      const auto& l = j.at("lpips");
      check_keys(l, "lpips", {"mode", "weight_file", "levels", "channels",
                              "seed"});
      maybe(l, "mode", cfg.lpips.mode);
      maybe(l, "weight_file", cfg.lpips.weight_file);
      maybe(l, "levels", cfg.lpips.levels);
      maybe(l, "channels", cfg.lpips.channels);
      maybe(l, "seed", cfg.lpips.seed);
      require(cfg.lpips.mode == "pyramid" || cfg.lpips.mode == "file" ||
                  cfg.lpips.mode == "none",
              "config: lpips.mode must be pyramid, file, or none");
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      check_keys(t, "train",
                 {"epochs", "batch_size", "learning_rate",
                  "motion_learning_rate", "seed", "checkpoint_interval",
                  "motion_refine_start", "weights"});
      maybe(t, "epochs", cfg.train.epochs);
      maybe(t, "batch_size", cfg.train.batch_size);
      maybe(t, "learning_rate", cfg.train.learning_rate);
      maybe(t, "motion_learning_rate", cfg.train.motion_learning_rate);
      maybe(t, "seed", cfg.train.seed);
      maybe(t, "checkpoint_interval", cfg.train.checkpoint_interval);
      maybe(t, "motion_refine_start", cfg.train.motion_refine_start);
      if (t.contains("weights")) {
        const auto& w = t.at("weights");
        check_keys(w, "train.weights",
                   {"rgb", "ssim", "lpips", "offset", "scale", "feature"});
        maybe(w, "rgb", cfg.train.weights.rgb);
        maybe(w, "ssim", cfg.train.weights.ssim);
        maybe(w, "lpips", cfg.train.weights.lpips);
        maybe(w, "offset", cfg.train.weights.offset);
        maybe(w, "scale", cfg.train.weights.scale);
        maybe(w, "feature", cfg.train.weights.feature);
      }
    }
    if (j.contains("render")) {
      const auto& r = j.at("render");
      check_keys(r, "render", {"resolution", "background"});
      maybe(r, "resolution", cfg.render.resolution);
      maybe(r, "background", cfg.render.background);
      require(cfg.render.background.size() == 3,
              "config: render.background needs 3 components");
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      check_keys(e, "eval", {"views", "gt_dir"});
      maybe(e, "views", cfg.eval.views);
      maybe(e, "gt_dir", cfg.eval.gt_dir);
    }
    if (j.contains("beta")) {
      const auto& b = j.at("beta");
      if (!b.empty() && b.front().is_array()) {
        // several per-frame estimates: average them
        std::vector<std::vector<double>> all =
            b.get<std::vector<std::vector<double>>>();
        cfg.beta.assign(all.front().size(), 0.0);
        for (const auto& row : all) {
          require(row.size() == cfg.beta.size(),
                  "config: beta rows differ in length");
          for (std::size_t i = 0; i < row.size(); ++i) cfg.beta[i] += row[i];
        }
        for (auto& v : cfg.beta) v /= double(all.size());
      } else {
        cfg.beta = b.get<std::vector<double>>();
      }
    }
    maybe(j, "sample_seed", cfg.sample_seed);
  } catch (const json::exception& e) {
    throw ValidationError("config: bad value in " + path + ": " + e.what());
  }
  return cfg;
}

std::string config_to_json(const PipelineConfig& c) {
  json j;
  j["paths"] = {{"frames_dir", c.paths.frames_dir},
                {"body_asset", c.paths.body_asset},
                {"poses_file", c.paths.poses_file},
                {"output_dir", c.paths.output_dir}};
  j["orbit"] = {{"n_frames", c.orbit.n_frames},
                {"elevation", c.orbit.elevation},
                {"radius", c.orbit.radius},
                {"fov", c.orbit.fov}};
  j["augment"] = {{"sr_factor", c.augment.sr_factor},
                  {"target_size", c.augment.target_size},
                  {"flow_levels", c.augment.flow_levels},
                  {"flow_iterations", c.augment.flow_iterations},
                  {"flow_sweeps", c.augment.flow_sweeps},
                  {"flow_smoothness", c.augment.flow_smoothness}};
  j["gaussians"] = {{"count", c.gaussians.count},
                    {"uv_resolution", c.gaussians.uv_resolution},
                    {"feature_channels", c.gaussians.feature_channels},
                    {"hidden_widths", c.gaussians.hidden_widths}};
  j["lpips"] = {{"mode", c.lpips.mode},
                {"weight_file", c.lpips.weight_file},
                {"levels", c.lpips.levels},
                {"channels", c.lpips.channels},
                {"seed", c.lpips.seed}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"motion_learning_rate", c.train.motion_learning_rate},
                {"seed", c.train.seed},
                {"checkpoint_interval", c.train.checkpoint_interval},
                {"motion_refine_start", c.train.motion_refine_start},
                {"weights",
                 {{"rgb", c.train.weights.rgb},
                  {"ssim", c.train.weights.ssim},
                  {"lpips", c.train.weights.lpips},
                  {"offset", c.train.weights.offset},
                  {"scale", c.train.weights.scale},
                  {"feature", c.train.weights.feature}}}};
  j["render"] = {{"resolution", c.render.resolution},
                 {"background", c.render.background}};
  j["eval"] = {{"views", c.eval.views}, {"gt_dir", c.eval.gt_dir}};
  j["beta"] = c.beta;
  j["sample_seed"] = c.sample_seed;
  return j.dump();
}

}  // namespace osplat
