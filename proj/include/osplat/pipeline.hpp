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
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "osplat/checkpoint.hpp"
#include "osplat/trainer.hpp"

namespace osplat {

// Resolved configuration of the whole pipeline. Loaded from a JSON file and
// overridable by CLI flags; see the README for the schema.
struct PipelineConfig {
  struct Paths {
    std::string frames_dir;
    std::string body_asset;
    std::string poses_file;
    std::string output_dir;
  } paths;

  struct Orbit {
    int n_frames = 21;
    double elevation = 0.0;
    double radius = 2.7;
    double fov = 33.8;
  } orbit;

  struct Augment {
    int sr_factor = 4;
    int target_size = 1080;
    int flow_levels = 4;
    int flow_iterations = 10;
    int flow_sweeps = 30;
    double flow_smoothness = 0.1;
  } augment;

  struct Gaussians {
    int count = 4096;
    int uv_resolution = 128;
    int feature_channels = 32;
    std::vector<int> hidden_widths{128, 128};
  } gaussians;

  struct Lpips {
    std::string mode = "pyramid";  // pyramid | file | none
    std::string weight_file;
    int levels = 3;
    int channels = 8;
    std::uint64_t seed = 7;
  } lpips;

  TrainConfig train;

  struct Render {
    int resolution = 256;
    std::vector<double> background{1.0, 1.0, 1.0};
  } render;

  struct Eval {
    std::vector<std::string> views{"front", "back", "left", "right"};
    std::string gt_dir;
  } eval;

  std::vector<double> beta;  // shape coefficients (empty = zeros)

  std::uint64_t sample_seed = 4242;
};

// Parses the JSON config file; unknown keys are rejected.
PipelineConfig load_config(const std::string& path);
PipelineConfig default_config();
std::string config_to_json(const PipelineConfig& cfg);

// Exclusive lock on an output directory for the lifetime of the object.
class OutputLock {
 public:
  explicit OutputLock(const std::string& output_dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string path_;
};

// One entry of the augment manifest.
struct AugmentEntry {
  int index = 0;
  bool source = false;
  int src_a = 0, src_b = 0;
  double t = 0.0;  // interpolation time for non-source entries
};

std::vector<AugmentEntry> load_augment_manifest(const std::string& path);

// Subcommands. Each validates its full configuration before touching the
// filesystem and reports failures via the exception hierarchy in common.hpp
// (ValidationError -> exit 2, NumericError -> 3, IoError -> 4).
void cmd_augment(const PipelineConfig& config);
void cmd_fit(const PipelineConfig& config);

struct RenderRequest {
  std::vector<double> azimuths;   // explicit azimuth list, or
  int orbit_frames = 0;           // a full turntable when > 0
  int frame_index = -1;           // a training frame (uses its corrections)
  bool raw = false;               // also dump lossless float images
  std::string checkpoint;
};
void cmd_render(const PipelineConfig& config, const RenderRequest& request);

struct EvalResult {
  std::map<std::string, double> psnr, ssim, lpips;  // keyed by view + "mean"
  bool has_lpips = false;
};
EvalResult cmd_eval(const PipelineConfig& config, const std::string& checkpoint);

void cmd_export(const PipelineConfig& config, const std::string& checkpoint,
                const std::string& out_ply, int frame_index = -1);

// Extended-attribute PLY used by cmd_export (position, color, opacity,
// scales, quaternion per point, float32 little-endian).
void save_gaussian_ply(const GaussianSet& gaussians, const std::string& path);
GaussianSet load_gaussian_ply(const std::string& path);

// Scene assembly shared by fit/render/eval (body, sampling, decoder inputs).
SceneT<float> build_model_scene(const PipelineConfig& config, int sample_count,
                                std::uint64_t sample_seed);

// Frame file helpers (zero-padded PNG sequences).
std::vector<std::string> list_frame_files(const std::string& dir);
std::string frame_filename(int index);

}  // namespace osplat
