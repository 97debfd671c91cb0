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

#include <cstdint>
#include <vector>

#include "osplat/body.hpp"
#include "osplat/common.hpp"

namespace osplat {

// Learnable per-UV-pixel appearance code, concatenated with the position map
// and decoded into Gaussian parameters.
template <class T>
struct FeatureTensorT {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<T> values;  // H x W x C

  FeatureTensorT() = default;
  FeatureTensorT(int w, int h, int c)
      : width(w), height(h), channels(c),
        values(std::size_t(w) * h * c, T(0)) {}

  T& at(int y, int x, int c) {
    return values[(std::size_t(y) * width + x) * channels + c];
  }
  const T& at(int y, int x, int c) const {
    return values[(std::size_t(y) * width + x) * channels + c];
  }
};

template <class T>
FeatureTensorT<T> init_feature_tensor(int width, int height, int channels,
                                      std::uint64_t seed) {
  require(width > 0 && height > 0 && channels > 0,
          "init_feature_tensor: dimensions must be positive");
  FeatureTensorT<T> t(width, height, channels);
  Rng rng(seed);
  for (auto& v : t.values) v = T(0.01 * rng.normal());
  return t;
}

// Per-pixel MLP mapping cat(feature, position) -> 7 Gaussian parameters
// (offset 3, color 3, scale 1). Tanh hidden activations, linear output.
template <class T>
struct DecoderNetT {
  std::vector<MatX<T>> weights;  // per layer, out x in
  std::vector<VecX<T>> biases;

  int layer_count() const { return int(weights.size()); }
  int input_width() const { return int(weights.front().cols()); }
  int output_width() const { return int(weights.back().rows()); }

  static DecoderNetT zeros(const std::vector<int>& widths);
  static DecoderNetT glorot(const std::vector<int>& widths, std::uint64_t seed);

  template <class U>
  DecoderNetT<U> cast() const {
    DecoderNetT<U> o;
    for (const auto& w : weights) o.weights.push_back(w.template cast<U>());
    for (const auto& b : biases) o.biases.push_back(b.template cast<U>());
    return o;
  }
};

// Raw decoder outputs, one row per valid UV pixel (in sample order).
template <class T>
struct DecodedParamsT {
  MatX<T> offsets;     // N x 3
  MatX<T> colors_raw;  // N x 3, pre-sigmoid
  VecX<T> scales_raw;  // N, pre-exp

  int count() const { return int(offsets.rows()); }
};

// Activations recorded by decode for the backward pass.
template <class T>
struct DecodeContext {
  std::vector<MatX<T>> layer_inputs;  // input to each layer, N x width
};

template <class T>
DecodedParamsT<T> decode(const FeatureTensorT<T>& features,
                         const UVPositionMap& posmap,
                         const DecoderNetT<T>& net,
                         DecodeContext<T>* ctx = nullptr);

template <class T>
struct DecodeGrads {
  FeatureTensorT<T> d_features;
  std::vector<MatX<T>> d_weights;
  std::vector<VecX<T>> d_biases;
};

template <class T>
DecodeGrads<T> decode_backward(const FeatureTensorT<T>& features,
                               const UVPositionMap& posmap,
                               const DecoderNetT<T>& net,
                               const DecodeContext<T>& ctx,
                               const DecodedParamsT<T>& grad_out);

// ---------------------------------------------------------------------------

// The renderable Gaussian collection. Quaternions are stored (w, x, y, z).
template <class T>
struct GaussianSetT {
  MatX<T> centers;    // N x 3
  MatX<T> colors;     // N x 3, in [0,1]
  VecX<T> opacities;  // N, in [0,1]
  MatX<T> scales;     // N x 3, strictly positive
  MatX<T> rotations;  // N x 4 unit quaternions

  int count() const { return int(centers.rows()); }
  void validate() const;

  template <class U>
  GaussianSetT<U> cast() const {
    GaussianSetT<U> o;
    o.centers = centers.template cast<U>();
    o.colors = colors.template cast<U>();
    o.opacities = opacities.template cast<U>();
    o.scales = scales.template cast<U>();
    o.rotations = rotations.template cast<U>();
    return o;
  }
};

using GaussianSet = GaussianSetT<float>;

// Canonical-space assembly: centers = surface + offset, colors = sigmoid,
// scales = base_scale * exp(raw) replicated isotropically, opacity 1,
// identity rotation.
template <class T>
GaussianSetT<T> assemble(const MatX<T>& surface_positions,
                         const DecodedParamsT<T>& decoded, T base_scale);

template <class T>
DecodedParamsT<T> assemble_backward(const GaussianSetT<T>& assembled,
                                    const DecodedParamsT<T>& decoded,
                                    T base_scale, const MatX<T>& d_centers,
                                    const MatX<T>& d_colors,
                                    const MatX<T>& d_scales);

// ---------------------------------------------------------------------------

// Articulation of a canonical set into motion space: centers are skinned by
// LBS, rotations composed with the weight-blended joint rotation.
template <class T>
struct ReposeContext {
  MatX<T> theta;  // refined pose actually applied
  Vec3<T> translation = Vec3<T>::Zero();
};

template <class T>
GaussianSetT<T> repose(const GaussianSetT<T>& canonical, const MatX<T>& weights,
                       const MatX<T>& rest_joints,
                       const std::vector<int>& parents,
                       const std::vector<int>& topo_order,
                       const BodyStateT<T>& state,
                       ReposeContext<T>* ctx = nullptr);

template <class T>
struct ReposeGrads {
  MatX<T> d_centers;  // canonical-space center gradients
  MatX<T> d_delta_theta;
  Vec3<T> d_delta_translation = Vec3<T>::Zero();
};

// Backpropagates motion-space center gradients to canonical centers and the
// motion corrections. Color/scale/opacity gradients pass through unchanged;
// the rotation-blend path carries no image gradient for the isotropic splats
// this pipeline produces and is not differentiated.
template <class T>
ReposeGrads<T> repose_backward(const GaussianSetT<T>& canonical,
                               const MatX<T>& weights,
                               const MatX<T>& rest_joints,
                               const std::vector<int>& parents,
                               const std::vector<int>& topo_order,
                               const ReposeContext<T>& ctx,
                               const MatX<T>& d_motion_centers);

// Mean nearest-neighbor distance among N points (grid accelerated).
double mean_nn_distance(const MatX<double>& points);

// Quaternion helpers, (w, x, y, z) convention.
template <class T>
Vec4<T> quat_from_mat3(const Mat3<T>& m);

template <class T>
Vec4<T> quat_mul(const Vec4<T>& a, const Vec4<T>& b) {
  return Vec4<T>(
      a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
      a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
      a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
      a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

}  // namespace osplat
