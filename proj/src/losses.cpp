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
#include "osplat/losses.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace osplat {

template <class T>
T l1_rgb(const ImageT<T>& x, const ImageT<T>& y) {
  require(x.same_shape(y), "l1_rgb: image dimensions differ");
  require(x.width > 0, "l1_rgb: empty image");
  T sum = T(0);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    sum += std::abs(x.data[i] - y.data[i]);
  return sum / T(x.data.size());
}

template <class T>
ImageT<T> l1_rgb_backward(const ImageT<T>& x, const ImageT<T>& y) {
  require(x.same_shape(y), "l1_rgb_backward: image dimensions differ");
  ImageT<T> g(x.width, x.height);
  const T inv = T(1) / T(x.data.size());
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const T d = x.data[i] - y.data[i];
    g.data[i] = d > T(0) ? inv : (d < T(0) ? -inv : T(0));
  }
  return g;
}

// ---------------------------------------------------------------------------
// SSIM

namespace {

constexpr int kWin = 11;

template <class T>
std::array<T, kWin> ssim_kernel() {
  std::array<T, kWin> g;
  const double sigma = 1.5;
  double sum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - (kWin - 1) / 2.0;
    const double v = std::exp(-d * d / (2.0 * sigma * sigma));
    g[i] = T(v);
    sum += v;
  }
  for (auto& v : g) v = T(double(v) / sum);
  return g;
}

// Valid-mode separable convolution of one channel plane.
template <class T>
std::vector<T> conv_valid(const std::vector<T>& in, int h, int w,
                          const std::array<T, kWin>& g) {
  const int ow = w - kWin + 1, oh = h - kWin + 1;
  std::vector<T> tmp(std::size_t(h) * ow), out(std::size_t(oh) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      T acc = T(0);
      for (int k = 0; k < kWin; ++k) acc += g[k] * in[std::size_t(y) * w + x + k];
      tmp[std::size_t(y) * ow + x] = acc;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      T acc = T(0);
      for (int k = 0; k < kWin; ++k)
        acc += g[k] * tmp[std::size_t(y + k) * ow + x];
      out[std::size_t(y) * ow + x] = acc;
    }
  return out;
}

// Transpose of conv_valid: scatters window-space gradients back to pixels.
template <class T>
std::vector<T> conv_valid_transpose(const std::vector<T>& win, int h, int w,
                                    const std::array<T, kWin>& g) {
  const int ow = w - kWin + 1, oh = h - kWin + 1;
  std::vector<T> tmp(std::size_t(h) * ow, T(0)), out(std::size_t(h) * w, T(0));
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const T v = win[std::size_t(y) * ow + x];
      if (v == T(0)) continue;
      for (int k = 0; k < kWin; ++k) tmp[std::size_t(y + k) * ow + x] += g[k] * v;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      const T v = tmp[std::size_t(y) * ow + x];
      if (v == T(0)) continue;
      for (int k = 0; k < kWin; ++k) out[std::size_t(y) * w + x + k] += g[k] * v;
    }
  return out;
}

template <class T>
std::vector<T> channel_plane(const ImageT<T>& img, int c) {
  std::vector<T> p(std::size_t(img.width) * img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      p[std::size_t(y) * img.width + x] = img.at(y, x, c);
  return p;
}

template <class T>
struct SsimMoments {
  std::vector<T> mu_x, mu_y, ex2, ey2, exy;
  int oh, ow;
};

template <class T>
SsimMoments<T> ssim_moments(const std::vector<T>& px, const std::vector<T>& py,
                            int h, int w, const std::array<T, kWin>& g) {
  SsimMoments<T> m;
  m.oh = h - kWin + 1;
  m.ow = w - kWin + 1;
  std::vector<T> xx(px.size()), yy(px.size()), xy(px.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    xx[i] = px[i] * px[i];
    yy[i] = py[i] * py[i];
    xy[i] = px[i] * py[i];
  }
  m.mu_x = conv_valid(px, h, w, g);
  m.mu_y = conv_valid(py, h, w, g);
  m.ex2 = conv_valid(xx, h, w, g);
  m.ey2 = conv_valid(yy, h, w, g);
  m.exy = conv_valid(xy, h, w, g);
  return m;
}

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

}  // namespace

template <class T>
T ssim(const ImageT<T>& x, const ImageT<T>& y) {
  require(x.same_shape(y), "ssim: image dimensions differ");
  require(x.width >= kWin && x.height >= kWin,
          "ssim: image smaller than the 11x11 window");
  const auto g = ssim_kernel<T>();
  T total = T(0);
  std::size_t count = 0;
  for (int c = 0; c < 3; ++c) {
    const auto px = channel_plane(x, c), py = channel_plane(y, c);
    const auto m = ssim_moments(px, py, x.height, x.width, g);
    for (std::size_t i = 0; i < m.mu_x.size(); ++i) {
      const T mx = m.mu_x[i], my = m.mu_y[i];
      const T sx = m.ex2[i] - mx * mx;
      const T sy = m.ey2[i] - my * my;
      const T sxy = m.exy[i] - mx * my;
      const T a1 = T(2) * mx * my + T(kC1);
      const T a2 = T(2) * sxy + T(kC2);
      const T b1 = mx * mx + my * my + T(kC1);
      const T b2 = sx + sy + T(kC2);
      total += (a1 * a2) / (b1 * b2);
    }
    count += m.mu_x.size();
  }
  return total / T(count);
}

template <class T>
ImageT<T> ssim_backward(const ImageT<T>& x, const ImageT<T>& y) {
  require(x.same_shape(y), "ssim_backward: image dimensions differ");
  require(x.width >= kWin && x.height >= kWin,
          "ssim_backward: image smaller than the 11x11 window");
  const auto g = ssim_kernel<T>();
  ImageT<T> grad(x.width, x.height);
  const int h = x.height, w = x.width;
  const std::size_t nwin = std::size_t(h - kWin + 1) * (w - kWin + 1);
  const T m_scale = T(1) / T(nwin * 3);

  for (int c = 0; c < 3; ++c) {
    const auto px = channel_plane(x, c), py = channel_plane(y, c);
    const auto m = ssim_moments(px, py, h, w, g);
    std::vector<T> d_mu(m.mu_x.size()), d_ex2(m.mu_x.size()),
        d_exy(m.mu_x.size());
    for (std::size_t i = 0; i < m.mu_x.size(); ++i) {
      const T mx = m.mu_x[i], my = m.mu_y[i];
      const T sx = m.ex2[i] - mx * mx;
      const T sy = m.ey2[i] - my * my;
      const T sxy = m.exy[i] - mx * my;
      const T a1 = T(2) * mx * my + T(kC1);
      const T a2 = T(2) * sxy + T(kC2);
      const T b1 = mx * mx + my * my + T(kC1);
      const T b2 = sx + sy + T(kC2);
      const T s = (a1 * a2) / (b1 * b2);
      // moments as independent inputs: sx = ex2 - mx^2, sxy = exy - mx my
      d_mu[i] = m_scale * (T(2) * my * (a2 - a1) / (b1 * b2) -
                           s * T(2) * mx * (T(1) / b1 - T(1) / b2));
      d_ex2[i] = m_scale * (-s / b2);
      d_exy[i] = m_scale * (T(2) * a1 / (b1 * b2));
    }
    const auto g_mu = conv_valid_transpose(d_mu, h, w, g);
    const auto g_ex2 = conv_valid_transpose(d_ex2, h, w, g);
    const auto g_exy = conv_valid_transpose(d_exy, h, w, g);
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        const std::size_t i = std::size_t(yy) * w + xx;
        grad.at(yy, xx, c) =
            g_mu[i] + T(2) * px[i] * g_ex2[i] + py[i] * g_exy[i];
      }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Feature extractors and LPIPS

template <class T>
ConvPyramidExtractor<T>::ConvPyramidExtractor(const Config& cfg) {
  require(cfg.levels >= 1 && cfg.channels >= 1 && cfg.kernel >= 1 &&
              cfg.stride >= 1,
          "ConvPyramidExtractor: bad config");
  Rng rng(cfg.seed);
  int in_c = 3;
  for (int l = 0; l < cfg.levels; ++l) {
    Layer layer;
    layer.in_channels = in_c;
    layer.out_channels = cfg.channels;
    layer.kernel = cfg.kernel;
    layer.stride = cfg.stride;
    const double scale =
        1.0 / std::sqrt(double(in_c) * cfg.kernel * cfg.kernel);
    layer.weights.resize(std::size_t(cfg.channels) * in_c * cfg.kernel *
                         cfg.kernel);
    for (auto& v : layer.weights) v = T(scale * rng.normal());
    kernels_.push_back(std::move(layer));
    layer_weights_.push_back(VecX<T>::Ones(cfg.channels));
    in_c = cfg.channels;
  }
}

template <class T>
FeatureMap<T> ConvPyramidExtractor<T>::conv_forward(const FeatureMap<T>& in,
                                                    const Layer& layer,
                                                    FeatureMap<T>* pre_act) const {
  const int pad = layer.kernel / 2;
  FeatureMap<T> out;
  out.width = (in.width + 2 * pad - layer.kernel) / layer.stride + 1;
  out.height = (in.height + 2 * pad - layer.kernel) / layer.stride + 1;
  out.channels = layer.out_channels;
  out.data.assign(std::size_t(out.width) * out.height * out.channels, T(0));
  for (int oy = 0; oy < out.height; ++oy)
    for (int ox = 0; ox < out.width; ++ox)
      for (int oc = 0; oc < out.channels; ++oc) {
        T acc = T(0);
        for (int ky = 0; ky < layer.kernel; ++ky) {
          const int iy = oy * layer.stride - pad + ky;
          if (iy < 0 || iy >= in.height) continue;
          for (int kx = 0; kx < layer.kernel; ++kx) {
            const int ix = ox * layer.stride - pad + kx;
            if (ix < 0 || ix >= in.width) continue;
            for (int ic = 0; ic < layer.in_channels; ++ic) {
              const T wgt =
                  layer.weights[((std::size_t(oc) * layer.in_channels + ic) *
                                     layer.kernel +
                                 ky) *
                                    layer.kernel +
                                kx];
              acc += wgt * in.at(iy, ix, ic);
            }
          }
        }
        out.at(oy, ox, oc) = acc;
      }
  if (pre_act) *pre_act = out;
  for (auto& v : out.data) v = std::tanh(v);
  return out;
}

namespace {
template <class T>
FeatureMap<T> image_as_features(const ImageT<T>& img) {
  FeatureMap<T> f;
  f.width = img.width;
  f.height = img.height;
  f.channels = 3;
  f.data = img.data;
  return f;
}
}  // namespace

template <class T>
std::vector<FeatureMap<T>> ConvPyramidExtractor<T>::features(
    const ImageT<T>& img) const {
  std::vector<FeatureMap<T>> out;
  FeatureMap<T> cur = image_as_features(img);
  for (const auto& layer : kernels_) {
    cur = conv_forward(cur, layer, nullptr);
    out.push_back(cur);
  }
  return out;
}

template <class T>
void ConvPyramidExtractor<T>::features_backward(
    const ImageT<T>& img, const std::vector<FeatureMap<T>>& d_features,
    ImageT<T>& d_img) const {
  const int L = levels();
  require(int(d_features.size()) == L,
          "features_backward: gradient level count mismatch");
  std::vector<FeatureMap<T>> acts(L);
  std::vector<FeatureMap<T>> inputs(L);
  FeatureMap<T> cur = image_as_features(img);
  for (int l = 0; l < L; ++l) {
    inputs[l] = cur;
    cur = conv_forward(cur, kernels_[l], nullptr);
    acts[l] = cur;
  }

  FeatureMap<T> grad;  // gradient flowing down from the level above
  for (int l = L - 1; l >= 0; --l) {
    if (l == L - 1) {
      grad = d_features[l];
    } else {
      for (std::size_t i = 0; i < grad.data.size(); ++i)
        grad.data[i] += d_features[l].data[i];
    }
    // through tanh
    for (std::size_t i = 0; i < grad.data.size(); ++i)
      grad.data[i] *= (T(1) - acts[l].data[i] * acts[l].data[i]);
    // conv backward to input
    const Layer& layer = kernels_[l];
    const int pad = layer.kernel / 2;
    const FeatureMap<T>& in = inputs[l];
    FeatureMap<T> d_in;
    d_in.width = in.width;
    d_in.height = in.height;
    d_in.channels = in.channels;
    d_in.data.assign(in.data.size(), T(0));
    for (int oy = 0; oy < grad.height; ++oy)
      for (int ox = 0; ox < grad.width; ++ox)
        for (int oc = 0; oc < grad.channels; ++oc) {
          const T gv = grad.at(oy, ox, oc);
          if (gv == T(0)) continue;
          for (int ky = 0; ky < layer.kernel; ++ky) {
            const int iy = oy * layer.stride - pad + ky;
            if (iy < 0 || iy >= in.height) continue;
            for (int kx = 0; kx < layer.kernel; ++kx) {
              const int ix = ox * layer.stride - pad + kx;
              if (ix < 0 || ix >= in.width) continue;
              for (int ic = 0; ic < layer.in_channels; ++ic) {
                const T wgt =
                    layer.weights[((std::size_t(oc) * layer.in_channels + ic) *
                                       layer.kernel +
                                   ky) *
                                      layer.kernel +
                                  kx];
                d_in.at(iy, ix, ic) += wgt * gv;
              }
            }
          }
        }
    grad = std::move(d_in);
  }
  for (std::size_t i = 0; i < d_img.data.size(); ++i)
    d_img.data[i] += grad.data[i];
}

template <class T>
void ConvPyramidExtractor<T>::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("extractor save: cannot open " + path);
  os << std::setprecision(17);
  os << "OSPLAT_FX 1\n" << levels() << '\n';
  for (int l = 0; l < levels(); ++l) {
    const Layer& k = kernels_[l];
    os << k.in_channels << ' ' << k.out_channels << ' ' << k.kernel << ' '
       << k.stride << '\n';
    for (int c = 0; c < k.out_channels; ++c)
      os << layer_weights_[l][c] << (c + 1 < k.out_channels ? ' ' : '\n');
    for (std::size_t i = 0; i < k.weights.size(); ++i)
      os << k.weights[i] << (i + 1 < k.weights.size() ? ' ' : '\n');
  }
  if (!os) throw IoError("extractor save: write failed for " + path);
}

template <class T>
ConvPyramidExtractor<T>::ConvPyramidExtractor(const std::string& weight_file) {
  std::ifstream is(weight_file);
  if (!is) throw IoError("extractor load: cannot open " + weight_file);
  std::string magic;
  int version = 0, levels = 0;
  is >> magic >> version >> levels;
  require(magic == "OSPLAT_FX" && version == 1 && levels >= 1,
          "extractor load: bad header in " + weight_file);
  for (int l = 0; l < levels; ++l) {
    Layer k;
    is >> k.in_channels >> k.out_channels >> k.kernel >> k.stride;
    require(bool(is) && k.in_channels >= 1 && k.out_channels >= 1,
            "extractor load: bad layer header");
    VecX<T> w(k.out_channels);
    for (int c = 0; c < k.out_channels; ++c) is >> w[c];
    k.weights.resize(std::size_t(k.out_channels) * k.in_channels * k.kernel *
                     k.kernel);
    for (auto& v : k.weights) is >> v;
    require(bool(is), "extractor load: truncated weights");
    kernels_.push_back(std::move(k));
    layer_weights_.push_back(std::move(w));
  }
}

template <class T>
std::vector<FeatureMap<T>> IdentityExtractor<T>::features(
    const ImageT<T>& img) const {
  return {image_as_features(img)};
}

template <class T>
void IdentityExtractor<T>::features_backward(
    const ImageT<T>&, const std::vector<FeatureMap<T>>& d_features,
    ImageT<T>& d_img) const {
  for (std::size_t i = 0; i < d_img.data.size(); ++i)
    d_img.data[i] += d_features[0].data[i];
}

namespace {
constexpr double kNormEps = 1e-10;
}

template <class T>
T lpips_with_grad(const ImageT<T>& x, const ImageT<T>& y,
                  const FeatureExtractorT<T>& ext, ImageT<T>* d_x) {
  require(x.same_shape(y), "lpips: image dimensions differ");
  if (ext.levels() == 0) {
    if (d_x) *d_x = ImageT<T>(x.width, x.height);
    return T(0);
  }
  const auto fx = ext.features(x);
  const auto fy = ext.features(y);
  std::vector<FeatureMap<T>> d_fx;
  if (d_x) d_fx.resize(fx.size());

  T value = T(0);
  for (int l = 0; l < ext.levels(); ++l) {
    const FeatureMap<T>& ax = fx[l];
    const FeatureMap<T>& ay = fy[l];
    require(ax.width == ay.width && ax.height == ay.height,
            "lpips: feature maps differ in size");
    const VecX<T>& w = ext.layer_weights(l);
    require(int(w.size()) == ax.channels, "lpips: layer weight size mismatch");
    const T inv_hw = T(1) / T(std::size_t(ax.width) * ax.height);
    if (d_x) {
      d_fx[l].width = ax.width;
      d_fx[l].height = ax.height;
      d_fx[l].channels = ax.channels;
      d_fx[l].data.assign(ax.data.size(), T(0));
    }
    const int C = ax.channels;
    std::vector<T> nx(C), ny(C), diff(C);
    for (int py = 0; py < ax.height; ++py)
      for (int px = 0; px < ax.width; ++px) {
        T sx = T(kNormEps), sy = T(kNormEps);
        for (int c = 0; c < C; ++c) {
          const T vx = ax.at(py, px, c), vy = ay.at(py, px, c);
          sx += vx * vx;
          sy += vy * vy;
        }
        const T rx = T(1) / std::sqrt(sx), ry = T(1) / std::sqrt(sy);
        for (int c = 0; c < C; ++c) {
          nx[c] = ax.at(py, px, c) * rx;
          ny[c] = ay.at(py, px, c) * ry;
          diff[c] = nx[c] - ny[c];
          value += inv_hw * w[c] * w[c] * diff[c] * diff[c];
        }
        if (d_x) {
          // through the channel normalization of the x features
          T dot = T(0);
          for (int c = 0; c < C; ++c) {
            const T d_n = T(2) * inv_hw * w[c] * w[c] * diff[c];
            dot += d_n * nx[c];
            d_fx[l].at(py, px, c) = d_n * rx;
          }
          for (int c = 0; c < C; ++c)
            d_fx[l].at(py, px, c) -= dot * nx[c] * rx;
        }
      }
  }
  if (d_x) {
    *d_x = ImageT<T>(x.width, x.height);
    ext.features_backward(x, d_fx, *d_x);
  }
  return value;
}

template <class T>
T lpips(const ImageT<T>& x, const ImageT<T>& y,
        const FeatureExtractorT<T>& ext) {
  return lpips_with_grad<T>(x, y, ext, nullptr);
}

// ---------------------------------------------------------------------------

template <class T>
T psnr(const ImageT<T>& x, const ImageT<T>& y) {
  require(x.same_shape(y), "psnr: image dimensions differ");
  require(x.width > 0, "psnr: empty image");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = double(x.data[i]) - double(y.data[i]);
    mse += d * d;
  }
  mse /= double(x.data.size());
  if (mse < 1e-10) return T(100);
  return T(10.0 * std::log10(1.0 / mse));
}

template <class T>
LossBreakdown<T> total_loss(T rgb, T ssim_term, T lpips_term, T offset, T scale,
                            T feature, const LossWeights& w) {
  const T terms[6] = {rgb, ssim_term, lpips_term, offset, scale, feature};
  const double weights[6] = {w.rgb, w.ssim, w.lpips, w.offset, w.scale,
                             w.feature};
  for (int i = 0; i < 6; ++i) {
    require(std::isfinite(double(terms[i])), "total_loss: non-finite term");
    require(terms[i] >= T(0), "total_loss: negative term");
    require(weights[i] >= 0.0, "total_loss: negative weight");
  }
  LossBreakdown<T> b;
  b.rgb = rgb;
  b.ssim = ssim_term;
  b.lpips = lpips_term;
  b.offset = offset;
  b.scale = scale;
  b.feature = feature;
  b.total = T(w.rgb) * rgb + T(w.ssim) * ssim_term + T(w.lpips) * lpips_term +
            T(w.offset) * offset + T(w.scale) * scale + T(w.feature) * feature;
  return b;
}

#define OSPLAT_INSTANTIATE(T)                                                \
  template T l1_rgb(const ImageT<T>&, const ImageT<T>&);                     \
  template ImageT<T> l1_rgb_backward(const ImageT<T>&, const ImageT<T>&);    \
  template T ssim(const ImageT<T>&, const ImageT<T>&);                       \
  template ImageT<T> ssim_backward(const ImageT<T>&, const ImageT<T>&);      \
  template class ConvPyramidExtractor<T>;                                    \
  template class IdentityExtractor<T>;                                       \
  template class NullExtractor<T>;                                           \
  template T lpips(const ImageT<T>&, const ImageT<T>&,                       \
                   const FeatureExtractorT<T>&);                             \
  template T lpips_with_grad(const ImageT<T>&, const ImageT<T>&,             \
                             const FeatureExtractorT<T>&, ImageT<T>*);       \
  template T psnr(const ImageT<T>&, const ImageT<T>&);                       \
  template LossBreakdown<T> total_loss(T, T, T, T, T, T, const LossWeights&);

OSPLAT_INSTANTIATE(float)
OSPLAT_INSTANTIATE(double)
#undef OSPLAT_INSTANTIATE

}  // namespace osplat
