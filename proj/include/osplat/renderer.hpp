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

#include <vector>

#include "osplat/camera.hpp"
#include "osplat/gaussians.hpp"
#include "osplat/image.hpp"

namespace osplat {

template <class T>
struct RasterizeConfig {
  Vec3<T> background = Vec3<T>::Ones();
  int tile_size = 16;
  T alpha_clamp = T(0.99);
  T alpha_min = T(1) / T(255);
  T transmittance_min = T(1e-6);  // stop compositing once this transparent
  T cov_floor = T(0.3);           // low-pass filter on the 2D covariance, px^2
  T znear = T(0.01);
  T cull_margin = T(0.15);  // cull centers beyond this fraction outside
  bool record = false;      // keep projection/tile state for backward
};

// A Gaussian projected to the image plane.
template <class T>
struct Splat2D {
  Vec2<T> mean = Vec2<T>::Zero();
  T cov_a = T(0), cov_b = T(0), cov_c = T(0);  // [[a,b],[b,c]]
  T conic_a = T(0), conic_b = T(0), conic_c = T(0);
  T depth = T(0);
  T radius = T(0);  // bound of the alpha >= alpha_min footprint, pixels
  int id = -1;
  bool valid = false;
};

// Sigma = R S S^T R^T; eigenvalues are the squared scales.
template <class T>
Mat3<T> compute_cov3d(const Vec3<T>& scale, const Vec4<T>& rotation);

// Perspective mean + first-order covariance propagation with the low-pass
// floor added in pixel space. Invalid when the center is at or behind znear
// or projects far outside the image.
template <class T>
Splat2D<T> project_gaussian(const CameraPose& pose, const Vec3<T>& center,
                            const Mat3<T>& cov3d,
                            const RasterizeConfig<T>& cfg);

template <class T>
struct RenderForward {
  ImageT<T> image;
  std::vector<T> alpha;  // H x W accumulated opacity

  // recorded for backward
  bool recorded = false;
  std::vector<Splat2D<T>> splats;           // valid splats in depth order
  std::vector<std::vector<int>> tile_lists; // indices into splats per tile
  int tiles_x = 0, tiles_y = 0;
};

// Front-to-back alpha compositing over depth-sorted splats, tiled 16x16.
// Deterministic: depth ties break on Gaussian index, tiles merge in index
// order.
template <class T>
RenderForward<T> rasterize(const GaussianSetT<T>& gaussians,
                           const CameraPose& pose,
                           const RasterizeConfig<T>& cfg);

template <class T>
struct GaussianGrads {
  MatX<T> d_centers;    // N x 3, world space
  MatX<T> d_colors;     // N x 3
  VecX<T> d_opacities;  // N
  MatX<T> d_scales;     // N x 3
  MatX<T> d_rotations;  // N x 4 (raw quaternion, through normalization)

  explicit GaussianGrads(int n = 0)
      : d_centers(MatX<T>::Zero(n, 3)), d_colors(MatX<T>::Zero(n, 3)),
        d_opacities(VecX<T>::Zero(n)), d_scales(MatX<T>::Zero(n, 3)),
        d_rotations(MatX<T>::Zero(n, 4)) {}
};

// Analytic gradients of the compositing equation for a loss gradient on the
// rendered image. The depth order and the tile assignment are treated as
// fixed; alpha values at the 0.99 clamp propagate zero gradient.
template <class T>
GaussianGrads<T> rasterize_backward(const RenderForward<T>& fwd,
                                    const GaussianSetT<T>& gaussians,
                                    const CameraPose& pose,
                                    const RasterizeConfig<T>& cfg,
                                    const ImageT<T>& d_image);

}  // namespace osplat
