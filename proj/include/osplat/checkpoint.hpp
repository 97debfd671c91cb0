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

#include <string>
#include <vector>

#include "osplat/trainer.hpp"

namespace osplat {

// Versioned binary container: "OSPLATCKPT" magic, little-endian fields, a
// dimension header, then the feature tensor, decoder weights, per-frame
// motion corrections, both Adam moment sets, and the step counter. All
// float32 payloads; byte-identical for identical training runs.
struct CheckpointMeta {
  std::uint32_t version = 1;
  int uv_width = 0, uv_height = 0, feature_channels = 0;
  std::vector<int> net_widths;  // including input and output
  int joint_count = 0;
  int frame_count = 0;
  int sample_count = 0;
  std::uint64_t sample_seed = 0;
  double base_scale = 0.0;
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const TrainState& state);

std::pair<CheckpointMeta, TrainState> load_checkpoint(const std::string& path);

}  // namespace osplat
