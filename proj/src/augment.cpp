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
#include "osplat/augment.hpp"

#include <algorithm>
#include <cmath>

namespace osplat {

namespace {

// Catmull-Rom kernel (bicubic convolution, a = -0.5).
template <class T>
T cubic_weight(T t) {
  const T a = T(-0.5);
  const T x = std::abs(t);
  if (x <= T(1)) return ((a + T(2)) * x - (a + T(3))) * x * x + T(1);
  if (x < T(2)) return (((x - T(5)) * x + T(8)) * x - T(4)) * a;
  return T(0);
}

inline int clamp_idx(int i, int n) { return std::clamp(i, 0, n - 1); }

}  // namespace

template <class T>
ImageT<T> resize_bicubic(const ImageT<T>& img, int out_width, int out_height) {
  require(img.width > 0 && img.height > 0, "resize_bicubic: empty image");
  require(out_width > 0 && out_height > 0, "resize_bicubic: bad target size");
  if (out_width == img.width && out_height == img.height) return img;

  // horizontal pass, then vertical
  ImageT<T> tmp(out_width, img.height);
  const double sx = double(img.width) / out_width;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < out_width; ++x) {
      const double src = (x + 0.5) * sx - 0.5;
      const int x0 = int(std::floor(src));
      const T frac = T(src - x0);
      T w[4], acc[3] = {T(0), T(0), T(0)};
      for (int k = 0; k < 4; ++k) w[k] = cubic_weight(frac - T(k - 1));
      for (int k = 0; k < 4; ++k) {
        const int xi = clamp_idx(x0 + k - 1, img.width);
        for (int c = 0; c < 3; ++c) acc[c] += w[k] * img.at(y, xi, c);
      }
      for (int c = 0; c < 3; ++c) tmp.at(y, x, c) = acc[c];
    }

  ImageT<T> out(out_width, out_height);
  const double sy = double(img.height) / out_height;
  for (int y = 0; y < out_height; ++y) {
    const double src = (y + 0.5) * sy - 0.5;
    const int y0 = int(std::floor(src));
    const T frac = T(src - y0);
    T w[4];
    for (int k = 0; k < 4; ++k) w[k] = cubic_weight(frac - T(k - 1));
    for (int x = 0; x < out_width; ++x) {
      T acc[3] = {T(0), T(0), T(0)};
      for (int k = 0; k < 4; ++k) {
        const int yi = clamp_idx(y0 + k - 1, img.height);
        for (int c = 0; c < 3; ++c) acc[c] += w[k] * tmp.at(yi, x, c);
      }
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = acc[c];
    }
  }
  return out;
}

template <class T>
ImageT<T> upsample_resize(const ImageT<T>& frame, int factor, int target_width,
                          int target_height) {
  require(frame.width == frame.height,
          "upsample_resize: expected a square frame");
  require(factor >= 1, "upsample_resize: factor must be >= 1");
  ImageT<T> up =
      resize_bicubic(frame, frame.width * factor, frame.height * factor);
  ImageT<T> out = resize_bicubic(up, target_width, target_height);
  out.clamp01();
  return out;
}

// ---------------------------------------------------------------------------
// Optical flow

namespace {

template <class T>
struct Plane {
  int width = 0, height = 0;
  std::vector<T> v;

  Plane() = default;
  Plane(int w, int h) : width(w), height(h), v(std::size_t(w) * h, T(0)) {}
  T& at(int y, int x) { return v[std::size_t(y) * width + x]; }
  T at(int y, int x) const { return v[std::size_t(y) * width + x]; }

  T sample(T fx, T fy) const {  // bilinear, clamp borders
    fx = std::clamp(fx, T(0), T(width - 1));
    fy = std::clamp(fy, T(0), T(height - 1));
    const int x0 = std::min(int(fx), width - 2 >= 0 ? width - 2 : 0);
    const int y0 = std::min(int(fy), height - 2 >= 0 ? height - 2 : 0);
    const T ax = fx - T(x0), ay = fy - T(y0);
    const int x1 = clamp_idx(x0 + 1, width), y1 = clamp_idx(y0 + 1, height);
    return (T(1) - ay) * ((T(1) - ax) * at(y0, x0) + ax * at(y0, x1)) +
           ay * ((T(1) - ax) * at(y1, x0) + ax * at(y1, x1));
  }
};

template <class T>
Plane<T> luminance(const ImageT<T>& img) {
  Plane<T> p(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      p.at(y, x) =
          (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / T(3);
  return p;
}

template <class T>
Plane<T> downsample2(const Plane<T>& in) {
  // 5-tap binomial blur, then decimate
  static const T k[5] = {T(1) / 16, T(4) / 16, T(6) / 16, T(4) / 16, T(1) / 16};
  Plane<T> blur_h(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      T acc = T(0);
      for (int i = -2; i <= 2; ++i)
        acc += k[i + 2] * in.at(y, clamp_idx(x + i, in.width));
      blur_h.at(y, x) = acc;
    }
  Plane<T> blur(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      T acc = T(0);
      for (int i = -2; i <= 2; ++i)
        acc += k[i + 2] * blur_h.at(clamp_idx(y + i, in.height), x);
      blur.at(y, x) = acc;
    }
  Plane<T> out((in.width + 1) / 2, (in.height + 1) / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(y, x) = blur.at(2 * y, 2 * x);
  return out;
}

template <class T>
Plane<T> upsample_flow(const Plane<T>& in, int w, int h) {
  Plane<T> out(w, h);
  const T sx = T(in.width) / T(w), sy = T(in.height) / T(h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out.at(y, x) =
          T(2) * in.sample((T(x) + T(0.5)) * sx - T(0.5),
                           (T(y) + T(0.5)) * sy - T(0.5));
  return out;
}

// One-direction Horn-Schunck with incremental warping on a pyramid.
template <class T>
void solve_flow(const Plane<T>& i0_full, const Plane<T>& i1_full,
                const FlowConfig& cfg, Plane<T>& u, Plane<T>& v) {
  std::vector<Plane<T>> p0{i0_full}, p1{i1_full};
  for (int l = 1; l < cfg.levels; ++l) {
    if (p0.back().width < 8 || p0.back().height < 8) break;
    p0.push_back(downsample2(p0.back()));
    p1.push_back(downsample2(p1.back()));
  }

  const int coarsest = int(p0.size()) - 1;
  u = Plane<T>(p0[coarsest].width, p0[coarsest].height);
  v = Plane<T>(p0[coarsest].width, p0[coarsest].height);

  for (int level = coarsest; level >= 0; --level) {
    const Plane<T>& i0 = p0[level];
    const Plane<T>& i1 = p1[level];
    if (level != coarsest) {
      u = upsample_flow(u, i0.width, i0.height);
      v = upsample_flow(v, i0.width, i0.height);
    }
    const int W = i0.width, H = i0.height;
    const T alpha = T(cfg.smoothness);

    for (int iter = 0; iter < cfg.iterations; ++iter) {
      // warp i1 by the current flow and linearize around it
      Plane<T> ix(W, H), iy(W, H), it(W, H);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const T wx = T(x) + u.at(y, x);
          const T wy = T(y) + v.at(y, x);
          it.at(y, x) = i1.sample(wx, wy) - i0.at(y, x);
          ix.at(y, x) = (i1.sample(wx + 1, wy) - i1.sample(wx - 1, wy)) / T(2);
          iy.at(y, x) = (i1.sample(wx, wy + 1) - i1.sample(wx, wy - 1)) / T(2);
        }
      Plane<T> du(W, H), dv(W, H);
      for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
        Plane<T> ndu(W, H), ndv(W, H);
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            const T ubar = (du.at(clamp_idx(y - 1, H), x) +
                            du.at(clamp_idx(y + 1, H), x) +
                            du.at(y, clamp_idx(x - 1, W)) +
                            du.at(y, clamp_idx(x + 1, W))) /
                           T(4);
            const T vbar = (dv.at(clamp_idx(y - 1, H), x) +
                            dv.at(clamp_idx(y + 1, H), x) +
                            dv.at(y, clamp_idx(x - 1, W)) +
                            dv.at(y, clamp_idx(x + 1, W))) /
                           T(4);
            const T gx = ix.at(y, x), gy = iy.at(y, x);
            const T common = (gx * ubar + gy * vbar + it.at(y, x)) /
                             (alpha + gx * gx + gy * gy);
            ndu.at(y, x) = ubar - gx * common;
            ndv.at(y, x) = vbar - gy * common;
          }
        du = std::move(ndu);
        dv = std::move(ndv);
      }
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          u.at(y, x) += du.at(y, x);
          v.at(y, x) += dv.at(y, x);
        }
    }
  }
}

template <class T>
void fill_confidence(FlowField<T>& fwd, const FlowField<T>& bwd) {
  const T sigma2 = T(2);  // 2 * (1 px)^2
  Plane<T> bu(bwd.width, bwd.height), bv(bwd.width, bwd.height);
  bu.v = bwd.u;
  bv.v = bwd.v;
  for (int y = 0; y < fwd.height; ++y)
    for (int x = 0; x < fwd.width; ++x) {
      const std::size_t i = std::size_t(y) * fwd.width + x;
      const T tx = T(x) + fwd.u[i];
      const T ty = T(y) + fwd.v[i];
      if (tx < T(0) || tx > T(fwd.width - 1) || ty < T(0) ||
          ty > T(fwd.height - 1)) {
        fwd.confidence[i] = T(0);
        continue;
      }
      const T rx = fwd.u[i] + bu.sample(tx, ty);
      const T ry = fwd.v[i] + bv.sample(tx, ty);
      fwd.confidence[i] = std::exp(-(rx * rx + ry * ry) / sigma2);
    }
}

}  // namespace

template <class T>
std::pair<FlowField<T>, FlowField<T>> estimate_flow(const ImageT<T>& f0,
                                                    const ImageT<T>& f1,
                                                    const FlowConfig& cfg) {
  require(f0.same_shape(f1), "estimate_flow: image dimensions differ");
  require(cfg.levels >= 1 && cfg.iterations >= 1 && cfg.sweeps >= 1,
          "estimate_flow: bad config");
  const auto l0 = luminance(f0), l1 = luminance(f1);

  FlowField<T> forward(f0.width, f0.height), backward(f0.width, f0.height);
  Plane<T> u, v;
  solve_flow(l0, l1, cfg, u, v);
  forward.u = u.v;
  forward.v = v.v;
  solve_flow(l1, l0, cfg, u, v);
  backward.u = u.v;
  backward.v = v.v;

  fill_confidence(forward, backward);
  fill_confidence(backward, forward);
  return {forward, backward};
}

template <class T>
ImageT<T> interpolate_frame(const ImageT<T>& f0, const ImageT<T>& f1, T t,
                            const FlowField<T>& forward,
                            const FlowField<T>& backward) {
  require(t > T(0) && t < T(1), "interpolate_frame: t must be in (0,1)");
  require(f0.same_shape(f1), "interpolate_frame: image dimensions differ");
  require(forward.width == f0.width && forward.height == f0.height &&
              backward.width == f0.width && backward.height == f0.height,
          "interpolate_frame: flow resolution mismatch");

  Plane<T> planes0[3], planes1[3];
  for (int c = 0; c < 3; ++c) {
    planes0[c] = Plane<T>(f0.width, f0.height);
    planes1[c] = Plane<T>(f0.width, f0.height);
    for (int y = 0; y < f0.height; ++y)
      for (int x = 0; x < f0.width; ++x) {
        planes0[c].at(y, x) = f0.at(y, x, c);
        planes1[c].at(y, x) = f1.at(y, x, c);
      }
  }

  ImageT<T> out(f0.width, f0.height);
  for (int y = 0; y < f0.height; ++y)
    for (int x = 0; x < f0.width; ++x) {
      const std::size_t i = std::size_t(y) * f0.width + x;
      // sample frame 0 along the backward flow, frame 1 along the forward
      const T x0 = T(x) + t * backward.u[i];
      const T y0 = T(y) + t * backward.v[i];
      const T x1 = T(x) + (T(1) - t) * forward.u[i];
      const T y1 = T(y) + (T(1) - t) * forward.v[i];
      const bool in0 = x0 >= T(0) && x0 <= T(f0.width - 1) && y0 >= T(0) &&
                       y0 <= T(f0.height - 1);
      const bool in1 = x1 >= T(0) && x1 <= T(f0.width - 1) && y1 >= T(0) &&
                       y1 <= T(f0.height - 1);

      T w0 = (T(1) - t) * backward.confidence[i] * (in0 ? T(1) : T(0));
      T w1 = t * forward.confidence[i] * (in1 ? T(1) : T(0));
      if (w0 + w1 < T(1e-8)) {
        // no reliable side; fall back to the plain temporal blend
        w0 = T(1) - t;
        w1 = t;
      }
      const T mix = w1 / (w0 + w1);
      for (int c = 0; c < 3; ++c) {
        const T a = planes0[c].sample(x0, y0);
        const T b = planes1[c].sample(x1, y1);
        out.at(y, x, c) = std::clamp(a + mix * (b - a), T(0), T(1));
      }
    }
  return out;
}

template <class T>
VideoSequenceT<T> augment_video(const VideoSequenceT<T>& video,
                                const SuperResolver<T>& sr,
                                const FrameInterpolator<T>& vfi) {
  video.validate();
  const int n = video.count();
  std::vector<ImageT<T>> resized;
  resized.reserve(n);
  for (const auto& f : video.frames) resized.push_back(sr.enhance(f));

  VideoSequenceT<T> out;
  out.frames.reserve(std::size_t(n) + 3 * (n - 1));
  const std::vector<T> times{T(0.25), T(0.5), T(0.75)};
  for (int i = 0; i + 1 < n; ++i) {
    out.frames.push_back(resized[i]);
    auto mids = vfi.interpolate(resized[i], resized[i + 1], times);
    for (auto& m : mids) out.frames.push_back(std::move(m));
  }
  out.frames.push_back(resized[n - 1]);
  return out;
}

#define OSPLAT_INSTANTIATE(T)                                                  \
  template ImageT<T> resize_bicubic(const ImageT<T>&, int, int);               \
  template ImageT<T> upsample_resize(const ImageT<T>&, int, int, int);         \
  template std::pair<FlowField<T>, FlowField<T>> estimate_flow(               \
      const ImageT<T>&, const ImageT<T>&, const FlowConfig&);                  \
  template ImageT<T> interpolate_frame(const ImageT<T>&, const ImageT<T>&, T, \
                                       const FlowField<T>&,                    \
                                       const FlowField<T>&);                   \
  template VideoSequenceT<T> augment_video(const VideoSequenceT<T>&,           \
                                           const SuperResolver<T>&,            \
                                           const FrameInterpolator<T>&);

OSPLAT_INSTANTIATE(float)
OSPLAT_INSTANTIATE(double)
#undef OSPLAT_INSTANTIATE

}  // namespace osplat
