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
#include "osplat/gaussians.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

namespace osplat {

template <class T>
DecoderNetT<T> DecoderNetT<T>::zeros(const std::vector<int>& widths) {
  require(widths.size() >= 2, "decoder: need at least input and output widths");
  DecoderNetT<T> net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    net.weights.push_back(MatX<T>::Zero(widths[l + 1], widths[l]));
    net.biases.push_back(VecX<T>::Zero(widths[l + 1]));
  }
  return net;
}

template <class T>
DecoderNetT<T> DecoderNetT<T>::glorot(const std::vector<int>& widths,
                                      std::uint64_t seed) {
  DecoderNetT<T> net = zeros(widths);
  Rng rng(seed);
  for (auto& w : net.weights) {
    const double a = std::sqrt(6.0 / double(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w.data()[i] = T(rng.uniform(-a, a));
  }
  return net;
}

template <class T>
DecodedParamsT<T> decode(const FeatureTensorT<T>& features,
                         const UVPositionMap& posmap,
                         const DecoderNetT<T>& net, DecodeContext<T>* ctx) {
  require(features.width == posmap.width && features.height == posmap.height,
          "decode: feature tensor / position map resolution mismatch");
  require(net.input_width() == features.channels + 3,
          "decode: net input width must be feature channels + 3");
  require(net.output_width() == 7, "decode: net must output 7 channels");

  const int n = posmap.valid_count;
  MatX<T> input(n, features.channels + 3);
  for (int y = 0; y < posmap.height; ++y) {
    for (int x = 0; x < posmap.width; ++x) {
      const std::size_t cell = std::size_t(y) * posmap.width + x;
      const int row = posmap.sample_index[cell];
      if (row < 0) continue;
      for (int c = 0; c < features.channels; ++c)
        input(row, c) = features.at(y, x, c);
      for (int c = 0; c < 3; ++c)
        input(row, features.channels + c) = T(posmap.positions[cell * 3 + c]);
    }
  }

  MatX<T> x = std::move(input);
  if (ctx) ctx->layer_inputs.clear();
  const int L = net.layer_count();
  for (int l = 0; l < L; ++l) {
    if (ctx) ctx->layer_inputs.push_back(x);
    MatX<T> z = x * net.weights[l].transpose();
    z.rowwise() += net.biases[l].transpose();
    if (l + 1 < L) z = z.array().tanh();
    x = std::move(z);
  }

  DecodedParamsT<T> out;
  out.offsets = x.leftCols(3);
  out.colors_raw = x.middleCols(3, 3);
  out.scales_raw = x.col(6);
  return out;
}

template <class T>
DecodeGrads<T> decode_backward(const FeatureTensorT<T>& features,
                               const UVPositionMap& posmap,
                               const DecoderNetT<T>& net,
                               const DecodeContext<T>& ctx,
                               const DecodedParamsT<T>& grad_out) {
  const int L = net.layer_count();
  require(int(ctx.layer_inputs.size()) == L,
          "decode_backward: context layer count mismatch");
  const int n = grad_out.count();

  MatX<T> dz(n, 7);
  dz.leftCols(3) = grad_out.offsets;
  dz.middleCols(3, 3) = grad_out.colors_raw;
  dz.col(6) = grad_out.scales_raw;

  DecodeGrads<T> grads;
  grads.d_weights.resize(L);
  grads.d_biases.resize(L);
  for (int l = L - 1; l >= 0; --l) {
    grads.d_weights[l] = dz.transpose() * ctx.layer_inputs[l];
    grads.d_biases[l] = dz.colwise().sum().transpose();
    MatX<T> dx = dz * net.weights[l];
    if (l > 0) {
      // layer_inputs[l] is the post-tanh activation of layer l-1
      dz = dx.array() * (T(1) - ctx.layer_inputs[l].array().square());
    } else {
      dz = std::move(dx);
    }
  }

  // dz now holds the gradient with respect to the concatenated input; keep
  // the feature channels, drop the (constant) position channels.
  grads.d_features =
      FeatureTensorT<T>(features.width, features.height, features.channels);
  for (int y = 0; y < posmap.height; ++y) {
    for (int x = 0; x < posmap.width; ++x) {
      const std::size_t cell = std::size_t(y) * posmap.width + x;
      const int row = posmap.sample_index[cell];
      if (row < 0) continue;
      for (int c = 0; c < features.channels; ++c)
        grads.d_features.at(y, x, c) = dz(row, c);
    }
  }
  return grads;
}

template <class T>
void GaussianSetT<T>::validate() const {
  const int n = count();
  require(colors.rows() == n && opacities.size() == n && scales.rows() == n &&
              rotations.rows() == n,
          "GaussianSet: field count mismatch");
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      require(std::isfinite(double(centers(i, c))), "GaussianSet: non-finite center");
      require(colors(i, c) >= T(0) && colors(i, c) <= T(1),
              "GaussianSet: color outside [0,1]");
      require(scales(i, c) > T(0), "GaussianSet: non-positive scale");
    }
    require(opacities[i] >= T(0) && opacities[i] <= T(1),
            "GaussianSet: opacity outside [0,1]");
    require(std::abs(double(rotations.row(i).norm()) - 1.0) <= 1e-6,
            "GaussianSet: non-unit quaternion");
  }
}

namespace {
template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}
}  // namespace

template <class T>
GaussianSetT<T> assemble(const MatX<T>& surface_positions,
                         const DecodedParamsT<T>& decoded, T base_scale) {
  const int n = decoded.count();
  require(surface_positions.rows() == n,
          "assemble: surface/decoded count mismatch");
  require(base_scale > T(0), "assemble: base_scale must be positive");
  GaussianSetT<T> g;
  g.centers = surface_positions + decoded.offsets;
  g.colors.resize(n, 3);
  g.scales.resize(n, 3);
  g.opacities = VecX<T>::Ones(n);
  g.rotations = MatX<T>::Zero(n, 4);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) g.colors(i, c) = sigmoid(decoded.colors_raw(i, c));
    const T s = base_scale * std::exp(decoded.scales_raw[i]);
    g.scales.row(i).setConstant(s);
    g.rotations(i, 0) = T(1);
  }
  return g;
}

template <class T>
DecodedParamsT<T> assemble_backward(const GaussianSetT<T>& assembled,
                                    const DecodedParamsT<T>& decoded,
                                    T base_scale, const MatX<T>& d_centers,
                                    const MatX<T>& d_colors,
                                    const MatX<T>& d_scales) {
  (void)base_scale;
  const int n = decoded.count();
  DecodedParamsT<T> g;
  g.offsets = d_centers;
  g.colors_raw.resize(n, 3);
  g.scales_raw.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const T s = assembled.colors(i, c);
      g.colors_raw(i, c) = d_colors(i, c) * s * (T(1) - s);
    }
    // scale value is shared by the three axes
    g.scales_raw[i] = d_scales.row(i).sum() * assembled.scales(i, 0);
  }
  return g;
}

template <class T>
Vec4<T> quat_from_mat3(const Mat3<T>& m) {
  Vec4<T> q;
  const T tr = m(0, 0) + m(1, 1) + m(2, 2);
  if (tr > T(0)) {
    T s = std::sqrt(tr + T(1)) * T(2);
    q << s / T(4), (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s,
        (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
    T s = std::sqrt(T(1) + m(0, 0) - m(1, 1) - m(2, 2)) * T(2);
    q << (m(2, 1) - m(1, 2)) / s, s / T(4), (m(0, 1) + m(1, 0)) / s,
        (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) > m(2, 2)) {
    T s = std::sqrt(T(1) + m(1, 1) - m(0, 0) - m(2, 2)) * T(2);
    q << (m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, s / T(4),
        (m(1, 2) + m(2, 1)) / s;
  } else {
    T s = std::sqrt(T(1) + m(2, 2) - m(0, 0) - m(1, 1)) * T(2);
    q << (m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s,
        (m(1, 2) + m(2, 1)) / s, s / T(4);
  }
  return q.normalized();
}

template <class T>
GaussianSetT<T> repose(const GaussianSetT<T>& canonical, const MatX<T>& weights,
                       const MatX<T>& rest_joints,
                       const std::vector<int>& parents,
                       const std::vector<int>& topo_order,
                       const BodyStateT<T>& state, ReposeContext<T>* ctx) {
  const int n = canonical.count();
  require(weights.rows() == n, "repose: weight/gaussian count mismatch");
  const MatX<T> theta = state.refined_theta();
  const Vec3<T> translation = state.refined_translation();
  const JointTransforms<T> tf =
      kinematic_transforms(rest_joints, parents, topo_order, theta);

  GaussianSetT<T> out = canonical;
  out.centers = skin_points(canonical.centers, weights, tf, translation);

  const int J = int(rest_joints.rows());
  std::vector<Vec4<T>> joint_quats(J);
  for (int j = 0; j < J; ++j) {
    joint_quats[j] = quat_from_mat3(tf.global_rot[j]);
    // keep all joints on one quaternion hemisphere so blending is stable
    if (j > 0 && joint_quats[j].dot(joint_quats[0]) < T(0))
      joint_quats[j] = -joint_quats[j];
  }
  for (int i = 0; i < n; ++i) {
    Vec4<T> blended = Vec4<T>::Zero();
    for (int j = 0; j < J; ++j) {
      const T w = weights(i, j);
      if (w != T(0)) blended += w * joint_quats[j];
    }
    const T norm = blended.norm();
    if (norm > T(1e-12)) {
      blended /= norm;
      out.rotations.row(i) =
          quat_mul<T>(blended, canonical.rotations.row(i).transpose())
              .normalized()
              .transpose();
    }
  }
  if (ctx) {
    ctx->theta = theta;
    ctx->translation = translation;
  }
  return out;
}

template <class T>
ReposeGrads<T> repose_backward(const GaussianSetT<T>& canonical,
                               const MatX<T>& weights,
                               const MatX<T>& rest_joints,
                               const std::vector<int>& parents,
                               const std::vector<int>& topo_order,
                               const ReposeContext<T>& ctx,
                               const MatX<T>& d_motion_centers) {
  const LbsGrads<T> lbs = skin_lbs_backward(
      canonical.centers, weights, rest_joints, parents, topo_order, ctx.theta,
      d_motion_centers);
  ReposeGrads<T> g;
  g.d_centers = lbs.d_points;
  g.d_delta_theta = lbs.d_theta;
  g.d_delta_translation = lbs.d_translation;
  return g;
}

double mean_nn_distance(const MatX<double>& points) {
  const int n = int(points.rows());
  require(n >= 2, "mean_nn_distance: need at least 2 points");

  Vec3<double> lo = points.row(0).transpose(), hi = lo;
  for (int i = 1; i < n; ++i) {
    lo = lo.cwiseMin(points.row(i).transpose());
    hi = hi.cwiseMax(points.row(i).transpose());
  }
  const double extent = std::max((hi - lo).maxCoeff(), 1e-12);
  // aim for a handful of points per cell
  const double cell = extent / std::max(1.0, std::cbrt(double(n) / 4.0));
  const auto max_ring = std::int64_t(extent / cell) + 2;

  auto cell_of = [&](const Vec3<double>& p) {
    return std::array<std::int64_t, 3>{
        std::int64_t(std::floor((p.x() - lo.x()) / cell)),
        std::int64_t(std::floor((p.y() - lo.y()) / cell)),
        std::int64_t(std::floor((p.z() - lo.z()) / cell))};
  };
  auto hash_cell = [](const std::array<std::int64_t, 3>& c) {
    return (c[0] * 73856093) ^ (c[1] * 19349663) ^ (c[2] * 83492791);
  };
  std::unordered_map<std::int64_t, std::vector<int>> grid;
  for (int i = 0; i < n; ++i)
    grid[hash_cell(cell_of(points.row(i).transpose()))].push_back(i);

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3<double> p = points.row(i).transpose();
    const auto base = cell_of(p);
    double best = std::numeric_limits<double>::infinity();
    // Scan outward shell by shell; points within sqrt(best) of p can only
    // live within ring <= sqrt(best)/cell + 1, so stop once that is covered.
    for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
      if (std::isfinite(best) &&
          double(ring) * cell > std::sqrt(best) + cell)
        break;
      for (std::int64_t dx = -ring; dx <= ring; ++dx)
        for (std::int64_t dy = -ring; dy <= ring; ++dy)
          for (std::int64_t dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring)
              continue;
            const auto it = grid.find(hash_cell(
                {base[0] + dx, base[1] + dy, base[2] + dz}));
            if (it == grid.end()) continue;
            for (const int j : it->second) {
              if (j == i) continue;
              best = std::min(best,
                              (points.row(j).transpose() - p).squaredNorm());
            }
          }
    }
    total += std::sqrt(best);
  }
  return total / double(n);
}

#define OSPLAT_INSTANTIATE(T)                                                  \
  template struct DecoderNetT<T>;                                              \
  template struct GaussianSetT<T>;                                             \
  template DecodedParamsT<T> decode(const FeatureTensorT<T>&,                  \
                                    const UVPositionMap&,                      \
                                    const DecoderNetT<T>&, DecodeContext<T>*); \
  template DecodeGrads<T> decode_backward(                                     \
      const FeatureTensorT<T>&, const UVPositionMap&, const DecoderNetT<T>&,   \
      const DecodeContext<T>&, const DecodedParamsT<T>&);                      \
  template GaussianSetT<T> assemble(const MatX<T>&, const DecodedParamsT<T>&,  \
                                    T);                                        \
  template DecodedParamsT<T> assemble_backward(                                \
      const GaussianSetT<T>&, const DecodedParamsT<T>&, T, const MatX<T>&,     \
      const MatX<T>&, const MatX<T>&);                                         \
  template Vec4<T> quat_from_mat3(const Mat3<T>&);                             \
  template GaussianSetT<T> repose(const GaussianSetT<T>&, const MatX<T>&,      \
                                  const MatX<T>&, const std::vector<int>&,     \
                                  const std::vector<int>&,                     \
                                  const BodyStateT<T>&, ReposeContext<T>*);    \
  template ReposeGrads<T> repose_backward(                                     \
      const GaussianSetT<T>&, const MatX<T>&, const MatX<T>&,                  \
      const std::vector<int>&, const std::vector<int>&,                        \
      const ReposeContext<T>&, const MatX<T>&);

OSPLAT_INSTANTIATE(float)
OSPLAT_INSTANTIATE(double)
#undef OSPLAT_INSTANTIATE

}  // namespace osplat
