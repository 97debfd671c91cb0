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

#include <memory>
#include <string>
#include <vector>

#include "osplat/gaussians.hpp"
#include "osplat/image.hpp"

namespace osplat {

// ---------------------------------------------------------------------------
// Photometric terms

// Mean absolute difference over all pixels and channels.
template <class T>
T l1_rgb(const ImageT<T>& x, const ImageT<T>& y);

// Subgradient with respect to x (0 at the kink).
template <class T>
ImageT<T> l1_rgb_backward(const ImageT<T>& x, const ImageT<T>& y);

// Mean local SSIM index over fully interior 11x11 Gaussian windows
// (sigma 1.5, c1 = 0.01^2, c2 = 0.03^2 on unit range), averaged over the
// three channels. Both images must be at least 11 pixels on each side.
template <class T>
T ssim(const ImageT<T>& x, const ImageT<T>& y);

template <class T>
T ssim_loss(const ImageT<T>& x, const ImageT<T>& y) {
  return T(1) - ssim(x, y);
}

// d ssim / d x (the loss gradient is its negation).
template <class T>
ImageT<T> ssim_backward(const ImageT<T>& x, const ImageT<T>& y);

// ---------------------------------------------------------------------------
// Perceptual term over a pluggable feature extractor

template <class T>
struct FeatureMap {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<T> data;  // h x w x c

  T& at(int y, int x, int c) {
    return data[(std::size_t(y) * width + x) * channels + c];
  }
  const T& at(int y, int x, int c) const {
    return data[(std::size_t(y) * width + x) * channels + c];
  }
};

template <class T>
class FeatureExtractorT {
 public:
  virtual ~FeatureExtractorT() = default;
  virtual int levels() const = 0;
  // per-channel weights w_l of each level
  virtual const VecX<T>& layer_weights(int level) const = 0;
  virtual std::vector<FeatureMap<T>> features(const ImageT<T>& img) const = 0;
  // accumulate dL/dimg for per-level feature gradients
  virtual void features_backward(const ImageT<T>& img,
                                 const std::vector<FeatureMap<T>>& d_features,
                                 ImageT<T>& d_img) const = 0;
};

// Deterministic multi-scale pyramid of fixed random strided convolutions
// with tanh activations; the default perceptual feature source.
template <class T>
class ConvPyramidExtractor : public FeatureExtractorT<T> {
 public:
  struct Config {
    int levels = 3;
    int channels = 8;
    int kernel = 3;
    int stride = 2;
    std::uint64_t seed = 7;
  };

  explicit ConvPyramidExtractor(const Config& cfg);
  explicit ConvPyramidExtractor(const std::string& weight_file);

  int levels() const override { return int(kernels_.size()); }
  const VecX<T>& layer_weights(int level) const override {
    return layer_weights_[level];
  }
  std::vector<FeatureMap<T>> features(const ImageT<T>& img) const override;
  void features_backward(const ImageT<T>& img,
                         const std::vector<FeatureMap<T>>& d_features,
                         ImageT<T>& d_img) const override;

  void save(const std::string& path) const;

 private:
  struct Layer {
    int in_channels, out_channels, kernel, stride;
    std::vector<T> weights;  // out x in x k x k
  };
  std::vector<Layer> kernels_;
  std::vector<VecX<T>> layer_weights_;

  FeatureMap<T> conv_forward(const FeatureMap<T>& in, const Layer& layer,
                             FeatureMap<T>* pre_act) const;
};

// Features are the image itself; useful for hand-checkable tests.
template <class T>
class IdentityExtractor : public FeatureExtractorT<T> {
 public:
  IdentityExtractor() : w_(VecX<T>::Ones(3)) {}
  explicit IdentityExtractor(const VecX<T>& w) : w_(w) {}
  int levels() const override { return 1; }
  const VecX<T>& layer_weights(int) const override { return w_; }
  std::vector<FeatureMap<T>> features(const ImageT<T>& img) const override;
  void features_backward(const ImageT<T>& img,
                         const std::vector<FeatureMap<T>>& d_features,
                         ImageT<T>& d_img) const override;

 private:
  VecX<T> w_;
};

// Zero levels: the perceptual term evaluates to 0 and contributes nothing.
template <class T>
class NullExtractor : public FeatureExtractorT<T> {
 public:
  int levels() const override { return 0; }
  const VecX<T>& layer_weights(int) const override {
    throw ValidationError("NullExtractor has no layers");
  }
  std::vector<FeatureMap<T>> features(const ImageT<T>&) const override {
    return {};
  }
  void features_backward(const ImageT<T>&, const std::vector<FeatureMap<T>>&,
                         ImageT<T>&) const override {}
};

// sum_l 1/(H_l W_l) sum_hw || w_l . (fx - fy) ||^2 over channel-unit-
// normalized features.
template <class T>
T lpips(const ImageT<T>& x, const ImageT<T>& y, const FeatureExtractorT<T>& ext);

// Same value; when d_x is non-null also computes dL/dx.
template <class T>
T lpips_with_grad(const ImageT<T>& x, const ImageT<T>& y,
                  const FeatureExtractorT<T>& ext, ImageT<T>* d_x);

// ---------------------------------------------------------------------------
// Regularizers (mean squared entries)

template <class T>
T reg_offset(const MatX<T>& offsets) {
  require(offsets.rows() > 0, "reg_offset: empty input");
  return offsets.array().square().sum() / T(offsets.rows());
}

template <class T>
T reg_scale(const VecX<T>& raw_scales) {
  require(raw_scales.size() > 0, "reg_scale: empty input");
  return raw_scales.array().square().sum() / T(raw_scales.size());
}

template <class T>
T reg_feature(const FeatureTensorT<T>& features) {
  require(!features.values.empty(), "reg_feature: empty input");
  T sum = T(0);
  for (const T v : features.values) sum += v * v;
  return sum / T(features.values.size());
}

// ---------------------------------------------------------------------------
// Evaluation metrics

// 10 log10(1 / MSE) on unit range, capped at 100 dB for MSE < 1e-10.
template <class T>
T psnr(const ImageT<T>& x, const ImageT<T>& y);

// ---------------------------------------------------------------------------
// Objective assembly

struct LossWeights {
  double rgb = 0.8;
  double ssim = 0.2;
  double lpips = 0.2;
  double offset = 10.0;
  double scale = 1.0;
  double feature = 1.0;
};

template <class T>
struct LossBreakdown {
  T rgb = T(0), ssim = T(0), lpips = T(0);
  T offset = T(0), scale = T(0), feature = T(0);
  T total = T(0);
};

template <class T>
LossBreakdown<T> total_loss(T rgb, T ssim_term, T lpips_term, T offset,
                            T scale, T feature, const LossWeights& w);

}  // namespace osplat
