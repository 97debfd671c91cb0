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

#include <algorithm>
#include <string>
#include <vector>

#include "osplat/common.hpp"

namespace osplat {

// H x W x 3 interleaved RGB, values nominally in [0, 1].
template <class T>
struct ImageT {
  int width = 0;
  int height = 0;
  std::vector<T> data;  // size = width * height * 3, row-major

  ImageT() = default;
  ImageT(int w, int h, T fill = T(0))
      : width(w), height(h), data(std::size_t(w) * h * 3, fill) {}

  T& at(int y, int x, int c) { return data[(std::size_t(y) * width + x) * 3 + c]; }
  const T& at(int y, int x, int c) const {
    return data[(std::size_t(y) * width + x) * 3 + c];
  }

  std::size_t size() const { return data.size(); }
  bool same_shape(const ImageT& o) const {
    return width == o.width && height == o.height;
  }

  template <class U>
  ImageT<U> cast() const {
    ImageT<U> out(width, height);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }

  void clamp01() {
    for (auto& v : data) v = std::clamp(v, T(0), T(1));
  }
};

using Imagef = ImageT<float>;
using Imaged = ImageT<double>;

// The 8-bit quantization applied when writing PNGs: round(255 * clamp(v)),
// mapped back to [0,1]. quantize8(x) equals save_png + load_png exactly.
template <class T>
ImageT<T> quantize8(const ImageT<T>& img) {
  ImageT<T> out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double v = std::clamp(double(img.data[i]), 0.0, 1.0);
    out.data[i] = T(std::lround(255.0 * v)) / T(255);
  }
  return out;
}

// 8-bit RGB PNG, quantized as round(255 * clamp(v, 0, 1)).
template <class T>
void save_png(const ImageT<T>& img, const std::string& path);

template <class T>
ImageT<T> load_png(const std::string& path);

// Lossless float dump: "OSIMGF1\n" magic, then width/height/channels as
// uint32 LE, then row-major float32 LE samples. Used for exact regression
// tests where PNG quantization would lose bits.
template <class T>
void save_raw(const ImageT<T>& img, const std::string& path);

template <class T>
ImageT<T> load_raw(const std::string& path);

}  // namespace osplat
