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
#include <utility>
#include <vector>

#include "osplat/image.hpp"

namespace osplat {

// Dense per-pixel displacement field with a warp-consistency confidence.
template <class T>
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<T> u, v;          // displacement in pixels
  std::vector<T> confidence;    // [0,1], forward/backward agreement

  FlowField() = default;
  FlowField(int w, int h)
      : width(w), height(h), u(std::size_t(w) * h, T(0)),
        v(std::size_t(w) * h, T(0)), confidence(std::size_t(w) * h, T(1)) {}
};

template <class T>
struct VideoSequenceT {
  std::vector<ImageT<T>> frames;

  int count() const { return int(frames.size()); }
  void validate() const {
    require(count() >= 2, "video: needs at least 2 frames");
    for (const auto& f : frames)
      require(f.same_shape(frames.front()),
              "video: frames must share one resolution");
  }
};

using VideoSequence = VideoSequenceT<float>;

struct FlowConfig {
  int levels = 4;
  int iterations = 10;      // warp updates per pyramid level
  int sweeps = 30;          // Jacobi relaxations per update
  double smoothness = 0.1;  // Horn-Schunck regularization weight
};

struct AugmentConfig {
  int sr_factor = 4;
  int target_width = 1080;
  int target_height = 1080;
  FlowConfig flow;
};

// Catmull-Rom bicubic resampling with clamp-to-edge borders.
template <class T>
ImageT<T> resize_bicubic(const ImageT<T>& img, int out_width, int out_height);

// Bicubic upsample by `factor`, then bicubic resize to the target;
// clamped to [0,1]. Inputs must be square (orbit frames are).
template <class T>
ImageT<T> upsample_resize(const ImageT<T>& frame, int factor, int target_width,
                          int target_height);

// Coarse-to-fine Horn-Schunck flow, both directions (forward = frame0 to
// frame1). Deterministic.
template <class T>
std::pair<FlowField<T>, FlowField<T>> estimate_flow(const ImageT<T>& f0,
                                                    const ImageT<T>& f1,
                                                    const FlowConfig& cfg = {});

// Warp-and-blend intermediate frame at t in (0,1): f0 is backward-warped by
// t * F(1->0), f1 by (1-t) * F(0->1); blended with (1-t, t) weights
// modulated by flow confidence, holes taken from the stronger side.
template <class T>
ImageT<T> interpolate_frame(const ImageT<T>& f0, const ImageT<T>& f1, T t,
                            const FlowField<T>& forward,
                            const FlowField<T>& backward);

// Pluggable stage interfaces; the classical implementations above are the
// defaults, external tools can be slotted in through a frames directory.
template <class T>
class SuperResolver {
 public:
  virtual ~SuperResolver() = default;
  virtual ImageT<T> enhance(const ImageT<T>& frame) const = 0;
};

template <class T>
class BicubicSuperResolver : public SuperResolver<T> {
 public:
  BicubicSuperResolver(int factor, int target_w, int target_h)
      : factor_(factor), target_w_(target_w), target_h_(target_h) {}
  ImageT<T> enhance(const ImageT<T>& frame) const override {
    return upsample_resize(frame, factor_, target_w_, target_h_);
  }

 private:
  int factor_, target_w_, target_h_;
};

template <class T>
class FrameInterpolator {
 public:
  virtual ~FrameInterpolator() = default;
  // all requested times for one frame pair at once, so per-pair work
  // (flow estimation) happens once
  virtual std::vector<ImageT<T>> interpolate(const ImageT<T>& f0,
                                             const ImageT<T>& f1,
                                             const std::vector<T>& ts) const = 0;
};

template <class T>
class FlowFrameInterpolator : public FrameInterpolator<T> {
 public:
  explicit FlowFrameInterpolator(const FlowConfig& cfg = {}) : cfg_(cfg) {}
  std::vector<ImageT<T>> interpolate(const ImageT<T>& f0, const ImageT<T>& f1,
                                     const std::vector<T>& ts) const override {
    const auto flows = estimate_flow(f0, f1, cfg_);
    std::vector<ImageT<T>> out;
    out.reserve(ts.size());
    for (const T t : ts)
      out.push_back(interpolate_frame(f0, f1, t, flows.first, flows.second));
    return out;
  }

 private:
  FlowConfig cfg_;
};

// Full augmentation: per-frame super-resolution, then 3 interpolated frames
// in each of the n-1 gaps at t = 0.25, 0.5, 0.75. Originals land verbatim at
// stride-4 slots; output count is n + 3(n-1).
template <class T>
VideoSequenceT<T> augment_video(const VideoSequenceT<T>& video,
                                const SuperResolver<T>& sr,
                                const FrameInterpolator<T>& vfi);

template <class T>
VideoSequenceT<T> augment_video(const VideoSequenceT<T>& video,
                                const AugmentConfig& cfg = {}) {
  BicubicSuperResolver<T> sr(cfg.sr_factor, cfg.target_width,
                             cfg.target_height);
  FlowFrameInterpolator<T> vfi(cfg.flow);
  return augment_video<T>(video, sr, vfi);
}

}  // namespace osplat
