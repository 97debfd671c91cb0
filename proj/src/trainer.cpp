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
#include "osplat/trainer.hpp"

#include <cmath>
#include <sstream>

namespace osplat {

template <class T>
TrainStateT<T> init_train_state(const SceneT<T>& scene, int feature_channels,
                                const std::vector<int>& hidden_widths,
                                std::uint64_t seed) {
  scene.validate();
  TrainStateT<T> state;
  state.params.features =
      init_feature_tensor<T>(scene.posmap.width, scene.posmap.height,
                             feature_channels, split_seed(seed, 1));
  std::vector<int> widths{feature_channels + 3};
  for (const int w : hidden_widths) widths.push_back(w);
  widths.push_back(7);
  state.params.net = DecoderNetT<T>::glorot(widths, split_seed(seed, 2));
  const int J = scene.body.joint_count();
  state.params.delta_theta = MatX<T>::Zero(scene.frame_count(), J * 3);
  state.params.delta_translation = MatX<T>::Zero(scene.frame_count(), 3);
  state.moment1 = TrainParams<T>::zeros_like(state.params);
  state.moment2 = TrainParams<T>::zeros_like(state.params);
  return state;
}

template <class T>
BodyStateT<T> frame_state(const TrainParams<T>& params, const SceneT<T>& scene,
                          int frame_index) {
  BodyStateT<T> s = scene.states[frame_index];
  const int J = scene.body.joint_count();
  s.delta_theta = MatX<T>::Zero(J, 3);
  for (int j = 0; j < J; ++j)
    for (int c = 0; c < 3; ++c)
      s.delta_theta(j, c) = params.delta_theta(frame_index, j * 3 + c);
  s.delta_translation =
      params.delta_translation.row(frame_index).transpose();
  return s;
}

template <class T>
GaussianSetT<T> canonical_gaussians(const TrainParams<T>& params,
                                    const SceneT<T>& scene) {
  const auto decoded = decode<T>(params.features, scene.posmap, params.net);
  return assemble<T>(scene.sample_positions, decoded, scene.base_scale);
}

template <class T>
ImageT<T> render_frame(const TrainParams<T>& params, const SceneT<T>& scene,
                       int frame_index) {
  const auto canonical = canonical_gaussians(params, scene);
  const auto posed = repose<T>(canonical, scene.sample_weights,
                               scene.rest_joints, scene.body.parents,
                               scene.topo, frame_state(params, scene, frame_index));
  return rasterize<T>(posed, scene.cameras[frame_index], scene.raster).image;
}

namespace {

template <class T>
void adam_span(T* p, const T* g, T* m, T* v, std::size_t n, double lr,
               long step, const TrainConfig& cfg) {
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, double(step));
  const double bc2 = 1.0 - std::pow(b2, double(step));
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = double(g[i]);
    const double mi = b1 * double(m[i]) + (1.0 - b1) * gi;
    const double vi = b2 * double(v[i]) + (1.0 - b2) * gi * gi;
    m[i] = T(mi);
    v[i] = T(vi);
    p[i] = T(double(p[i]) -
             lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.adam_epsilon));
  }
}

}  // namespace

template <class T>
LossBreakdown<T> train_step(TrainStateT<T>& state, const SceneT<T>& scene,
                            const std::vector<int>& batch,
                            const TrainConfig& config) {
  config.validate();
  require(!batch.empty(), "train_step: empty batch");
  for (const int f : batch)
    require(f >= 0 && f < scene.frame_count(), "train_step: bad frame index");

  TrainParams<T>& params = state.params;
  const int n_gauss = scene.samples.count();
  const T inv_batch = T(1) / T(batch.size());

  DecodeContext<T> ctx;
  const auto decoded = decode<T>(params.features, scene.posmap, params.net, &ctx);
  const auto canonical =
      assemble<T>(scene.sample_positions, decoded, scene.base_scale);

  const T term_offset = reg_offset<T>(decoded.offsets);
  const T term_scale = reg_scale<T>(decoded.scales_raw);
  const T term_feature = reg_feature<T>(params.features);

  // accumulated gradients
  MatX<T> d_centers = MatX<T>::Zero(n_gauss, 3);
  MatX<T> d_colors = MatX<T>::Zero(n_gauss, 3);
  MatX<T> d_scales = MatX<T>::Zero(n_gauss, 3);
  TrainParams<T> grads = TrainParams<T>::zeros_like(params);

  const NullExtractor<T> null_ext;
  const FeatureExtractorT<T>& ext =
      scene.lpips_extractor ? *scene.lpips_extractor : null_ext;

  T rgb_mean = T(0), ssim_mean = T(0), lpips_mean = T(0);
  RasterizeConfig<T> raster = scene.raster;
  raster.record = true;

  for (const int f : batch) {
    const BodyStateT<T> body_state = frame_state(params, scene, f);
    ReposeContext<T> rctx;
    const auto posed =
        repose<T>(canonical, scene.sample_weights, scene.rest_joints,
                  scene.body.parents, scene.topo, body_state, &rctx);
    const auto fwd = rasterize<T>(posed, scene.cameras[f], raster);
    const ImageT<T>& truth = scene.frames[f];

    // zero-weighted terms are skipped entirely (they would otherwise
    // constrain toy image sizes and waste work)
    const bool use_ssim = config.weights.ssim != 0.0;
    const bool use_lpips = config.weights.lpips != 0.0 && ext.levels() > 0;
    const T rgb = l1_rgb<T>(fwd.image, truth);
    // rounding can push ssim of near-identical images a hair past 1
    const T ssim_term =
        use_ssim ? std::max(T(0), T(1) - ssim<T>(fwd.image, truth)) : T(0);
    ImageT<T> lpips_grad;
    const T lpips_term =
        use_lpips ? lpips_with_grad<T>(fwd.image, truth, ext, &lpips_grad)
                  : T(0);
    rgb_mean += rgb * inv_batch;
    ssim_mean += ssim_term * inv_batch;
    lpips_mean += lpips_term * inv_batch;

    // d(batch photometric loss) / d(rendered image)
    ImageT<T> d_image = l1_rgb_backward<T>(fwd.image, truth);
    const T w_rgb = T(config.weights.rgb) * inv_batch;
    const T w_ssim = T(config.weights.ssim) * inv_batch;
    const T w_lpips = T(config.weights.lpips) * inv_batch;
    for (auto& v : d_image.data) v *= w_rgb;
    if (use_ssim) {
      const ImageT<T> d_ssim = ssim_backward<T>(fwd.image, truth);
      for (std::size_t i = 0; i < d_image.data.size(); ++i)
        d_image.data[i] -= w_ssim * d_ssim.data[i];
    }
    if (use_lpips) {
      for (std::size_t i = 0; i < d_image.data.size(); ++i)
        d_image.data[i] += w_lpips * lpips_grad.data[i];
    }

    const auto g = rasterize_backward<T>(fwd, posed, scene.cameras[f], raster,
                                         d_image);
    const auto r = repose_backward<T>(canonical, scene.sample_weights,
                                      scene.rest_joints, scene.body.parents,
                                      scene.topo, rctx, g.d_centers);
    d_centers += r.d_centers;
    d_colors += g.d_colors;
    d_scales += g.d_scales;
    for (int j = 0; j < scene.body.joint_count(); ++j)
      for (int c = 0; c < 3; ++c)
        grads.delta_theta(f, j * 3 + c) += r.d_delta_theta(j, c);
    grads.delta_translation.row(f) += r.d_delta_translation.transpose();
  }

  // regularizer gradients (shared by every frame, so applied once)
  auto d_decoded = assemble_backward<T>(canonical, decoded, scene.base_scale,
                                        d_centers, d_colors, d_scales);
  const T w_off = T(config.weights.offset) * T(2) / T(n_gauss);
  const T w_scl = T(config.weights.scale) * T(2) / T(n_gauss);
  d_decoded.offsets += w_off * decoded.offsets;
  d_decoded.scales_raw += w_scl * decoded.scales_raw;

  auto dec_grads =
      decode_backward<T>(params.features, scene.posmap, params.net, ctx,
                         d_decoded);
  const T w_feat =
      T(config.weights.feature) * T(2) / T(params.features.values.size());
  for (std::size_t i = 0; i < params.features.values.size(); ++i)
    dec_grads.d_features.values[i] += w_feat * params.features.values[i];

  grads.features = std::move(dec_grads.d_features);
  grads.net.weights = std::move(dec_grads.d_weights);
  grads.net.biases = std::move(dec_grads.d_biases);

  const bool finite =
      std::isfinite(double(rgb_mean)) && std::isfinite(double(ssim_mean)) &&
      std::isfinite(double(lpips_mean)) && std::isfinite(double(term_offset)) &&
      std::isfinite(double(term_scale)) && std::isfinite(double(term_feature));
  if (!finite) {
    std::ostringstream os;
    os << "train_step: non-finite loss at step " << state.step
       << ": rgb=" << rgb_mean << " ssim=" << ssim_mean
       << " lpips=" << lpips_mean << " offset=" << term_offset
       << " scale=" << term_scale << " feature=" << term_feature;
    throw NumericError(os.str());
  }
  const auto breakdown =
      total_loss<T>(rgb_mean, ssim_mean, lpips_mean, term_offset, term_scale,
                    term_feature, config.weights);

  // Adam update, fixed span order
  state.step += 1;
  const bool motion_on = state.step > config.motion_refine_start;
  struct Span {
    T* g;
    std::size_t n;
  };
  std::vector<Span> grad_spans;
  grads.for_each_span([&](T* g, std::size_t n, bool) {
    grad_spans.push_back({g, n});
  });
  std::vector<T*> m_spans, v_spans;
  state.moment1.for_each_span([&](T* m, std::size_t, bool) {
    m_spans.push_back(m);
  });
  state.moment2.for_each_span([&](T* v, std::size_t, bool) {
    v_spans.push_back(v);
  });
  std::size_t idx = 0;
  params.for_each_span([&](T* p, std::size_t n, bool is_motion) {
    require(n == grad_spans[idx].n, "train_step: span mismatch");
    if (!is_motion || motion_on) {
      const double lr =
          is_motion ? config.motion_learning_rate : config.learning_rate;
      adam_span(p, grad_spans[idx].g, m_spans[idx], v_spans[idx], n, lr,
                state.step, config);
    }
    ++idx;
  });

  if (config.record_grads) state.last_grads = std::move(grads);
  state.history.push_back(breakdown);
  return breakdown;
}

template <class T>
void fit(TrainStateT<T>& state, const SceneT<T>& scene,
         const TrainConfig& config,
         const std::function<void(const TrainStateT<T>&)>& on_checkpoint) {
  config.validate();
  scene.validate();
  const int n = scene.frame_count();
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(split_seed(config.seed, 1000 + std::uint64_t(epoch)));
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[std::size_t(rng.below(i + 1))]);
    for (int start = 0; start < n; start += config.batch_size) {
      const int end = std::min(n, start + config.batch_size);
      const std::vector<int> batch(order.begin() + start, order.begin() + end);
      train_step(state, scene, batch, config);
      if (config.checkpoint_interval > 0 && on_checkpoint &&
          state.step % config.checkpoint_interval == 0)
        on_checkpoint(state);
    }
  }
  if (on_checkpoint) on_checkpoint(state);
}

#define OSPLAT_INSTANTIATE(T)                                                  \
  template struct TrainParams<T>;                                              \
  template TrainStateT<T> init_train_state(const SceneT<T>&, int,              \
                                           const std::vector<int>&,            \
                                           std::uint64_t);                     \
  template BodyStateT<T> frame_state(const TrainParams<T>&, const SceneT<T>&,  \
                                     int);                                     \
  template GaussianSetT<T> canonical_gaussians(const TrainParams<T>&,          \
                                               const SceneT<T>&);              \
  template ImageT<T> render_frame(const TrainParams<T>&, const SceneT<T>&,     \
                                  int);                                        \
  template LossBreakdown<T> train_step(TrainStateT<T>&, const SceneT<T>&,      \
                                       const std::vector<int>&,                \
                                       const TrainConfig&);                    \
  template void fit(TrainStateT<T>&, const SceneT<T>&, const TrainConfig&,     \
                    const std::function<void(const TrainStateT<T>&)>&);

OSPLAT_INSTANTIATE(float)
OSPLAT_INSTANTIATE(double)
#undef OSPLAT_INSTANTIATE

}  // namespace osplat
