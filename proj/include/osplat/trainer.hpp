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

#include <functional>
#include <vector>

#include "osplat/augment.hpp"
#include "osplat/body.hpp"
#include "osplat/gaussians.hpp"
#include "osplat/losses.hpp"
#include "osplat/renderer.hpp"

namespace osplat {

struct TrainConfig {
  int epochs = 1000;
  int batch_size = 2;
  double learning_rate = 3e-3;         // feature tensor + decoder
  double motion_learning_rate = 1e-4;  // pose/translation corrections
  LossWeights weights;
  std::uint64_t seed = 0;
  int checkpoint_interval = 0;    // steps between checkpoints, 0 = final only
  int motion_refine_start = 0;    // first step at which corrections update
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool record_grads = false;      // keep last step's raw gradients

  void validate() const {
    require(epochs >= 1 && batch_size >= 1, "train config: bad counts");
    require(learning_rate > 0 && motion_learning_rate > 0,
            "train config: rates must be positive");
  }
};

// Every trainable tensor of the model. The motion corrections are stored per
// frame, one row each.
template <class T>
struct TrainParams {
  FeatureTensorT<T> features;
  DecoderNetT<T> net;
  MatX<T> delta_theta;        // F x (J*3)
  MatX<T> delta_translation;  // F x 3

  static TrainParams zeros_like(const TrainParams& p) {
    TrainParams z;
    z.features = FeatureTensorT<T>(p.features.width, p.features.height,
                                   p.features.channels);
    std::vector<int> widths{p.net.input_width()};
    for (const auto& w : p.net.weights) widths.push_back(int(w.rows()));
    z.net = DecoderNetT<T>::zeros(widths);
    z.delta_theta = MatX<T>::Zero(p.delta_theta.rows(), p.delta_theta.cols());
    z.delta_translation =
        MatX<T>::Zero(p.delta_translation.rows(), p.delta_translation.cols());
    return z;
  }

  // spans in a fixed order: features, each layer's weights/biases, then the
  // motion corrections (flagged)
  template <class Fn>
  void for_each_span(Fn&& fn) {
    fn(features.values.data(), features.values.size(), false);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      fn(net.weights[l].data(), std::size_t(net.weights[l].size()), false);
      fn(net.biases[l].data(), std::size_t(net.biases[l].size()), false);
    }
    fn(delta_theta.data(), std::size_t(delta_theta.size()), true);
    fn(delta_translation.data(), std::size_t(delta_translation.size()), true);
  }
};

template <class T>
struct TrainStateT {
  TrainParams<T> params;
  TrainParams<T> moment1, moment2;
  long step = 0;
  std::vector<LossBreakdown<T>> history;
  TrainParams<T> last_grads;  // populated when config.record_grads
};

using TrainState = TrainStateT<float>;

// Immutable description of the fitting problem.
template <class T>
struct SceneT {
  // body + sampling
  TemplateBody body;
  std::vector<int> topo;
  SurfaceSamples samples;
  UVPositionMap posmap;            // canonical position map (m)
  MatX<T> sample_positions;        // canonical T(beta) surface, N x 3
  MatX<T> sample_weights;          // N x J
  MatX<T> rest_joints;             // J(beta), J x 3
  T base_scale = T(0);

  // per-frame data
  std::vector<ImageT<T>> frames;       // ground truth
  std::vector<CameraPose> cameras;
  std::vector<BodyStateT<T>> states;   // base pose/translation per frame

  RasterizeConfig<T> raster;
  const FeatureExtractorT<T>* lpips_extractor = nullptr;  // null disables

  int frame_count() const { return int(frames.size()); }
  void validate() const {
    require(!frames.empty(), "scene: no frames");
    require(frames.size() == cameras.size() && frames.size() == states.size(),
            "scene: frames/cameras/states count mismatch");
    require(posmap.valid_count == samples.count(),
            "scene: position map does not cover the samples");
  }
};

// theta_hat = theta + delta_theta, t_hat = t + delta_t (the motion
// refinement applied before reposing).
template <class T>
std::pair<MatX<T>, Vec3<T>> refine_motion(const BodyStateT<T>& state) {
  return {state.refined_theta(), state.refined_translation()};
}

// Fresh state: seeded feature tensor, Glorot decoder, zero corrections.
template <class T>
TrainStateT<T> init_train_state(const SceneT<T>& scene, int feature_channels,
                                const std::vector<int>& hidden_widths,
                                std::uint64_t seed);

// One optimization step over a batch of frame indices: forward (decode ->
// assemble -> repose -> rasterize), the full objective, reverse-mode
// gradients, and one Adam update. Throws NumericError with a term dump if
// the loss goes non-finite.
template <class T>
LossBreakdown<T> train_step(TrainStateT<T>& state, const SceneT<T>& scene,
                            const std::vector<int>& batch,
                            const TrainConfig& config);

// Runs epochs x ceil(n/batch) steps with a seeded shuffle per epoch.
// on_checkpoint fires every checkpoint_interval steps (if set) and after the
// final step.
template <class T>
void fit(TrainStateT<T>& state, const SceneT<T>& scene,
         const TrainConfig& config,
         const std::function<void(const TrainStateT<T>&)>& on_checkpoint = {});

// Renders one frame of the scene with the given parameters (the forward
// path of train_step, shared with the render/eval commands).
template <class T>
ImageT<T> render_frame(const TrainParams<T>& params, const SceneT<T>& scene,
                       int frame_index);

// The canonical-space gaussians for the current parameters.
template <class T>
GaussianSetT<T> canonical_gaussians(const TrainParams<T>& params,
                                    const SceneT<T>& scene);

template <class T>
BodyStateT<T> frame_state(const TrainParams<T>& params, const SceneT<T>& scene,
                          int frame_index);

}  // namespace osplat
