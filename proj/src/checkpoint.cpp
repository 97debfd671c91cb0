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
#include "osplat/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace osplat {

namespace {

constexpr char kMagic[10] = {'O', 'S', 'P', 'L', 'A', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ofstream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

void put_floats(std::ofstream& os, const float* data, std::size_t n) {
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(data), std::streamsize(n * 4));
}

std::uint32_t get_u32(std::ifstream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::ifstream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

double get_f64(std::ifstream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void get_floats(std::ifstream& is, float* data, std::size_t n) {
  is.read(reinterpret_cast<char*>(data), std::streamsize(n * 4));
}

void write_params(std::ofstream& os, TrainParams<float>& p) {
  p.for_each_span([&](float* data, std::size_t n, bool) {
    put_floats(os, data, n);
  });
}

void read_params(std::ifstream& is, TrainParams<float>& p) {
  p.for_each_span([&](float* data, std::size_t n, bool) {
    get_floats(is, data, n);
  });
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const TrainState& state) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("save_checkpoint: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, kVersion);
  put_u32(os, std::uint32_t(meta.uv_width));
  put_u32(os, std::uint32_t(meta.uv_height));
  put_u32(os, std::uint32_t(meta.feature_channels));
  put_u32(os, std::uint32_t(meta.net_widths.size()));
  for (const int w : meta.net_widths) put_u32(os, std::uint32_t(w));
  put_u32(os, std::uint32_t(meta.joint_count));
  put_u32(os, std::uint32_t(meta.frame_count));
  put_u32(os, std::uint32_t(meta.sample_count));
  put_u64(os, meta.sample_seed);
  put_f64(os, meta.base_scale);
  put_u64(os, std::uint64_t(state.step));

  auto& mutable_state = const_cast<TrainState&>(state);
  write_params(os, mutable_state.params);
  write_params(os, mutable_state.moment1);
  write_params(os, mutable_state.moment2);
  if (!os) throw IoError("save_checkpoint: write failed for " + path);
}

std::pair<CheckpointMeta, TrainState> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_checkpoint: cannot open " + path);
  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(kMagic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("load_checkpoint: not a checkpoint file: " + path);

  CheckpointMeta meta;
  meta.version = get_u32(is);
  if (meta.version != kVersion)
    throw IoError("load_checkpoint: version mismatch in " + path +
                  ": expected " + std::to_string(kVersion) + ", found " +
                  std::to_string(meta.version));
  meta.uv_width = int(get_u32(is));
  meta.uv_height = int(get_u32(is));
  meta.feature_channels = int(get_u32(is));
  const auto n_widths = get_u32(is);
  require(n_widths >= 2 && n_widths < 64, "load_checkpoint: bad width count");
  meta.net_widths.resize(n_widths);
  for (auto& w : meta.net_widths) w = int(get_u32(is));
  meta.joint_count = int(get_u32(is));
  meta.frame_count = int(get_u32(is));
  meta.sample_count = int(get_u32(is));
  meta.sample_seed = get_u64(is);
  meta.base_scale = get_f64(is);

  TrainState state;
  state.step = long(get_u64(is));
  state.params.features = FeatureTensorT<float>(meta.uv_width, meta.uv_height,
                                                meta.feature_channels);
  state.params.net = DecoderNetT<float>::zeros(meta.net_widths);
  state.params.delta_theta =
      MatX<float>::Zero(meta.frame_count, meta.joint_count * 3);
  state.params.delta_translation = MatX<float>::Zero(meta.frame_count, 3);
  state.moment1 = TrainParams<float>::zeros_like(state.params);
  state.moment2 = TrainParams<float>::zeros_like(state.params);
  read_params(is, state.params);
  read_params(is, state.moment1);
  read_params(is, state.moment2);
  if (!is) throw IoError("load_checkpoint: truncated file " + path);
  return {meta, state};
}

}  // namespace osplat
