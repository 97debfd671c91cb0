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
#include "osplat/renderer.hpp"

#include <algorithm>
#include <cmath>

namespace osplat {

namespace {

template <class T>
Mat3<T> quat_to_mat(const Vec4<T>& qn) {
  const T w = qn[0], x = qn[1], y = qn[2], z = qn[3];
  Mat3<T> r;
  r << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z),
      T(2) * (x * z + w * y), T(2) * (x * y + w * z),
      T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),
      T(2) * (x * z - w * y), T(2) * (y * z + w * x),
      T(1) - T(2) * (x * x + y * y);
  return r;
}

template <class T>
struct CamFrame {
  Mat3<T> rot;   // world -> camera rotation
  Vec3<T> trans;
  T fx, fy, cx, cy;
};

template <class T>
CamFrame<T> cam_frame(const CameraPose& pose) {
  CamFrame<T> f;
  f.rot = pose.extrinsic.topLeftCorner<3, 3>().cast<T>();
  f.trans = pose.extrinsic.topRightCorner<3, 1>().cast<T>();
  f.fx = T(pose.intrinsic(0, 0));
  f.fy = T(pose.intrinsic(1, 1));
  f.cx = T(pose.intrinsic(0, 2));
  f.cy = T(pose.intrinsic(1, 2));
  return f;
}

// Projection Jacobian at a camera-space point.
template <class T>
void projection_jacobian(const CamFrame<T>& cam, const Vec3<T>& p, T J[2][3]) {
  const T iz = T(1) / p.z();
  const T iz2 = iz * iz;
  J[0][0] = cam.fx * iz;
  J[0][1] = T(0);
  J[0][2] = -cam.fx * p.x() * iz2;
  J[1][0] = T(0);
  J[1][1] = cam.fy * iz;
  J[1][2] = -cam.fy * p.y() * iz2;
}

}  // namespace

template <class T>
Mat3<T> compute_cov3d(const Vec3<T>& scale, const Vec4<T>& rotation) {
  const Mat3<T> R = quat_to_mat<T>(rotation.normalized());
  const Mat3<T> M = R * scale.asDiagonal();
  return M * M.transpose();
}

template <class T>
Splat2D<T> project_gaussian(const CameraPose& pose, const Vec3<T>& center,
                            const Mat3<T>& cov3d,
                            const RasterizeConfig<T>& cfg) {
  Splat2D<T> s;
  const CamFrame<T> cam = cam_frame<T>(pose);
  const Vec3<T> p = cam.rot * center + cam.trans;
  if (!(p.z() > cfg.znear)) return s;
  s.depth = p.z();
  s.mean.x() = cam.fx * p.x() / p.z() + cam.cx;
  s.mean.y() = cam.fy * p.y() / p.z() + cam.cy;
  const T mx = cfg.cull_margin * T(pose.width);
  const T my = cfg.cull_margin * T(pose.height);
  if (s.mean.x() < -mx || s.mean.x() > T(pose.width) + mx || s.mean.y() < -my ||
      s.mean.y() > T(pose.height) + my)
    return s;

  T J[2][3];
  projection_jacobian(cam, p, J);
  const Mat3<T> cov_cam = cam.rot * cov3d * cam.rot.transpose();
  // cov2d = J * cov_cam * J^T + floor * I, unique entries (a, b, c)
  Vec3<T> j0(J[0][0], J[0][1], J[0][2]);
  Vec3<T> j1(J[1][0], J[1][1], J[1][2]);
  const Vec3<T> c0 = cov_cam * j0;
  const Vec3<T> c1 = cov_cam * j1;
  s.cov_a = j0.dot(c0) + cfg.cov_floor;
  s.cov_b = j0.dot(c1);
  s.cov_c = j1.dot(c1) + cfg.cov_floor;

  const T det = s.cov_a * s.cov_c - s.cov_b * s.cov_b;
  if (!(det > T(0))) return s;
  s.conic_a = s.cov_c / det;
  s.conic_b = -s.cov_b / det;
  s.conic_c = s.cov_a / det;

  // Bound the footprint where alpha can still reach alpha_min: the ellipse
  // d^T conic d <= 2 ln(1/alpha_min) (opacity is at most 1), measured along
  // the largest eigenvalue. Keeps tile culling exactly consistent with the
  // per-pixel alpha_min skip.
  const T mid = (s.cov_a + s.cov_c) / T(2);
  const T disc = std::sqrt(std::max(T(0), mid * mid - det));
  const T lambda_max = mid + disc;
  const T sigmas = std::sqrt(T(2) * std::log(T(1) / cfg.alpha_min));
  s.radius = sigmas * std::sqrt(lambda_max);
  s.valid = true;
  return s;
}

template <class T>
RenderForward<T> rasterize(const GaussianSetT<T>& gaussians,
                           const CameraPose& pose,
                           const RasterizeConfig<T>& cfg) {
  const int W = pose.width, H = pose.height;
  RenderForward<T> out;
  out.image = ImageT<T>(W, H);
  out.alpha.assign(std::size_t(W) * H, T(0));

  const int n = gaussians.count();
  std::vector<Splat2D<T>> splats;
  splats.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Vec3<T> center = gaussians.centers.row(i).transpose();
    const Vec3<T> scale = gaussians.scales.row(i).transpose();
    const Vec4<T> rot = gaussians.rotations.row(i).transpose();
    Splat2D<T> s =
        project_gaussian(pose, center, compute_cov3d(scale, rot), cfg);
    if (!s.valid) continue;
    s.id = i;
    splats.push_back(s);
  }
  std::sort(splats.begin(), splats.end(), [](const auto& a, const auto& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.id < b.id;
  });

  const int ts = cfg.tile_size;
  const int tiles_x = (W + ts - 1) / ts;
  const int tiles_y = (H + ts - 1) / ts;
  std::vector<std::vector<int>> tile_lists(std::size_t(tiles_x) * tiles_y);
  for (int k = 0; k < int(splats.size()); ++k) {
    const auto& s = splats[k];
    const int x0 = std::clamp(int(std::floor((s.mean.x() - s.radius) / ts)), 0,
                              tiles_x - 1);
    const int x1 = std::clamp(int(std::floor((s.mean.x() + s.radius) / ts)), 0,
                              tiles_x - 1);
    const int y0 = std::clamp(int(std::floor((s.mean.y() - s.radius) / ts)), 0,
                              tiles_y - 1);
    const int y1 = std::clamp(int(std::floor((s.mean.y() + s.radius) / ts)), 0,
                              tiles_y - 1);
    if (s.mean.x() + s.radius < T(0) || s.mean.x() - s.radius > T(W) ||
        s.mean.y() + s.radius < T(0) || s.mean.y() - s.radius > T(H))
      continue;
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx)
        tile_lists[std::size_t(ty) * tiles_x + tx].push_back(k);
  }

  parallel_for(tiles_x * tiles_y, [&](int tile) {
    const int tx = tile % tiles_x, ty = tile / tiles_x;
    const auto& list = tile_lists[tile];
    const int px0 = tx * ts, px1 = std::min(W, px0 + ts);
    const int py0 = ty * ts, py1 = std::min(H, py0 + ts);
    for (int y = py0; y < py1; ++y) {
      for (int x = px0; x < px1; ++x) {
        const Vec2<T> pix(T(x) + T(0.5), T(y) + T(0.5));
        Vec3<T> color = Vec3<T>::Zero();
        T trans = T(1);
        for (const int k : list) {
          const auto& s = splats[k];
          const T dx = pix.x() - s.mean.x();
          const T dy = pix.y() - s.mean.y();
          const T power = T(-0.5) * (s.conic_a * dx * dx + s.conic_c * dy * dy) -
                          s.conic_b * dx * dy;
          if (power > T(0)) continue;
          const T alpha = std::min(
              cfg.alpha_clamp, gaussians.opacities[s.id] * std::exp(power));
          if (alpha < cfg.alpha_min) continue;
          color += gaussians.colors.row(s.id).transpose() * (alpha * trans);
          trans *= (T(1) - alpha);
          if (trans < cfg.transmittance_min) break;
        }
        color += cfg.background * trans;
        for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = color[c];
        out.alpha[std::size_t(y) * W + x] = T(1) - trans;
      }
    }
  });

  if (cfg.record) {
    out.recorded = true;
    out.splats = std::move(splats);
    out.tile_lists = std::move(tile_lists);
    out.tiles_x = tiles_x;
    out.tiles_y = tiles_y;
  }
  return out;
}

namespace {

// Per-splat gradients in screen space, accumulated per tile.
template <class T>
struct SplatGrad {
  T d_mean_x = T(0), d_mean_y = T(0);
  T d_conic_a = T(0), d_conic_b = T(0), d_conic_c = T(0);
  T d_color[3] = {T(0), T(0), T(0)};
  T d_opacity = T(0);
};

template <class T>
struct PixelHit {
  int list_pos;
  T alpha;
  T trans_before;
};

}  // namespace

template <class T>
GaussianGrads<T> rasterize_backward(const RenderForward<T>& fwd,
                                    const GaussianSetT<T>& gaussians,
                                    const CameraPose& pose,
                                    const RasterizeConfig<T>& cfg,
                                    const ImageT<T>& d_image) {
  require(fwd.recorded,
          "rasterize_backward: forward pass was not recorded (set cfg.record)");
  const int W = pose.width, H = pose.height;
  require(d_image.width == W && d_image.height == H,
          "rasterize_backward: loss gradient resolution mismatch");
  const int ts = cfg.tile_size;
  const int n_tiles = fwd.tiles_x * fwd.tiles_y;

  std::vector<std::vector<SplatGrad<T>>> tile_grads(n_tiles);
  parallel_for(n_tiles, [&](int tile) {
    const auto& list = fwd.tile_lists[tile];
    if (list.empty()) return;
    auto& grads = tile_grads[tile];
    grads.assign(list.size(), SplatGrad<T>{});
    std::vector<PixelHit<T>> hits;
    hits.reserve(list.size());

    const int tx = tile % fwd.tiles_x, ty = tile / fwd.tiles_x;
    const int px0 = tx * ts, px1 = std::min(W, px0 + ts);
    const int py0 = ty * ts, py1 = std::min(H, py0 + ts);
    for (int y = py0; y < py1; ++y) {
      for (int x = px0; x < px1; ++x) {
        const Vec2<T> pix(T(x) + T(0.5), T(y) + T(0.5));
        const Vec3<T> g(d_image.at(y, x, 0), d_image.at(y, x, 1),
                        d_image.at(y, x, 2));
        if (g[0] == T(0) && g[1] == T(0) && g[2] == T(0)) continue;

        // Re-walk the forward compositing to recover (alpha, T) per hit.
        hits.clear();
        T trans = T(1);
        for (int pos = 0; pos < int(list.size()); ++pos) {
          const auto& s = fwd.splats[list[pos]];
          const T dx = pix.x() - s.mean.x();
          const T dy = pix.y() - s.mean.y();
          const T power =
              T(-0.5) * (s.conic_a * dx * dx + s.conic_c * dy * dy) -
              s.conic_b * dx * dy;
          if (power > T(0)) continue;
          const T alpha = std::min(
              cfg.alpha_clamp, gaussians.opacities[s.id] * std::exp(power));
          if (alpha < cfg.alpha_min) continue;
          hits.push_back({pos, alpha, trans});
          trans *= (T(1) - alpha);
          if (trans < cfg.transmittance_min) break;
        }

        // Suffix light: everything composited after hit i, plus background.
        Vec3<T> suffix = cfg.background * trans;
        for (int h = int(hits.size()) - 1; h >= 0; --h) {
          const auto& hit = hits[h];
          const auto& s = fwd.splats[list[hit.list_pos]];
          const Vec3<T> color = gaussians.colors.row(s.id).transpose();
          SplatGrad<T>& sg = grads[hit.list_pos];

          const T aT = hit.alpha * hit.trans_before;
          for (int c = 0; c < 3; ++c) sg.d_color[c] += g[c] * aT;

          const T d_alpha =
              g.dot(color * hit.trans_before - suffix / (T(1) - hit.alpha));
          suffix += color * aT;

          const T opacity = gaussians.opacities[s.id];
          const T dx = pix.x() - s.mean.x();
          const T dy = pix.y() - s.mean.y();
          const T power =
              T(-0.5) * (s.conic_a * dx * dx + s.conic_c * dy * dy) -
              s.conic_b * dx * dy;
          const T gauss = std::exp(power);
          if (opacity * gauss >= cfg.alpha_clamp) continue;  // clamped: flat

          sg.d_opacity += d_alpha * gauss;
          const T d_power = d_alpha * opacity * gauss;
          sg.d_conic_a += T(-0.5) * dx * dx * d_power;
          sg.d_conic_b += -dx * dy * d_power;
          sg.d_conic_c += T(-0.5) * dy * dy * d_power;
          const T d_dx = (-s.conic_a * dx - s.conic_b * dy) * d_power;
          const T d_dy = (-s.conic_c * dy - s.conic_b * dx) * d_power;
          sg.d_mean_x += -d_dx;
          sg.d_mean_y += -d_dy;
        }
      }
    }
  });

  // Merge screen-space gradients per splat in fixed tile order.
  std::vector<SplatGrad<T>> splat_grads(fwd.splats.size());
  for (int tile = 0; tile < n_tiles; ++tile) {
    const auto& list = fwd.tile_lists[tile];
    const auto& grads = tile_grads[tile];
    if (grads.empty()) continue;
    for (std::size_t pos = 0; pos < list.size(); ++pos) {
      SplatGrad<T>& dst = splat_grads[list[pos]];
      const SplatGrad<T>& src = grads[pos];
      dst.d_mean_x += src.d_mean_x;
      dst.d_mean_y += src.d_mean_y;
      dst.d_conic_a += src.d_conic_a;
      dst.d_conic_b += src.d_conic_b;
      dst.d_conic_c += src.d_conic_c;
      for (int c = 0; c < 3; ++c) dst.d_color[c] += src.d_color[c];
      dst.d_opacity += src.d_opacity;
    }
  }

  // Chain screen-space gradients back to the 3D parameters.
  GaussianGrads<T> out(gaussians.count());
  const CamFrame<T> cam = cam_frame<T>(pose);
  for (std::size_t k = 0; k < fwd.splats.size(); ++k) {
    const Splat2D<T>& s = fwd.splats[k];
    const SplatGrad<T>& sg = splat_grads[k];
    const int i = s.id;

    for (int c = 0; c < 3; ++c) out.d_colors(i, c) = sg.d_color[c];
    out.d_opacities[i] = sg.d_opacity;

    // conic = inverse covariance; map (dA, dB, dC) to (da, db, dc)
    const T a = s.cov_a, b = s.cov_b, c = s.cov_c;
    const T det = a * c - b * b;
    const T det2 = det * det;
    const T dA = sg.d_conic_a, dB = sg.d_conic_b, dC = sg.d_conic_c;
    const T da = (-c * c * dA + b * c * dB - b * b * dC) / det2;
    const T db =
        (T(2) * b * c * dA - (a * c + b * b) * dB + T(2) * a * b * dC) / det2;
    const T dc = (-b * b * dA + a * b * dB - a * a * dC) / det2;

    // Recompute the projection intermediates for this splat.
    const Vec3<T> center = gaussians.centers.row(i).transpose();
    const Vec3<T> scale = gaussians.scales.row(i).transpose();
    const Vec4<T> q_raw = gaussians.rotations.row(i).transpose();
    const T q_norm = q_raw.norm();
    const Vec4<T> qn = q_raw / q_norm;
    const Mat3<T> R = quat_to_mat<T>(qn);
    const Mat3<T> M = R * scale.asDiagonal();
    const Mat3<T> cov3d = M * M.transpose();
    const Vec3<T> p = cam.rot * center + cam.trans;
    T J[2][3];
    projection_jacobian(cam, p, J);
    const Vec3<T> j0(J[0][0], J[0][1], J[0][2]);
    const Vec3<T> j1(J[1][0], J[1][1], J[1][2]);
    const Mat3<T> cov_cam = cam.rot * cov3d * cam.rot.transpose();

    // cov2d entries: a = j0 S j0 + floor, b = j0 S j1, c = j1 S j1 + floor
    const Mat3<T> d_cov_cam = da * (j0 * j0.transpose()) +
                              db * (j0 * j1.transpose()) +
                              dc * (j1 * j1.transpose());
    const Eigen::Matrix<T, 1, 3> sj0 = (cov_cam * j0).transpose();
    const Eigen::Matrix<T, 1, 3> sj1 = (cov_cam * j1).transpose();
    const Eigen::Matrix<T, 1, 3> d_j0 = T(2) * da * sj0 + db * sj1;
    const Eigen::Matrix<T, 1, 3> d_j1 = db * sj0 + T(2) * dc * sj1;

    // camera-space position gradient: projection of the mean ...
    Vec3<T> d_p = Vec3<T>::Zero();
    const T iz = T(1) / p.z();
    const T iz2 = iz * iz;
    d_p.x() += sg.d_mean_x * cam.fx * iz;
    d_p.y() += sg.d_mean_y * cam.fy * iz;
    d_p.z() += -(sg.d_mean_x * cam.fx * p.x() + sg.d_mean_y * cam.fy * p.y()) *
               iz2;
    // ... plus the Jacobian's own dependence on position
    d_p.x() += d_j0[2] * (-cam.fx * iz2);
    d_p.y() += d_j1[2] * (-cam.fy * iz2);
    d_p.z() += d_j0[0] * (-cam.fx * iz2) +
               d_j0[2] * (T(2) * cam.fx * p.x() * iz2 * iz) +
               d_j1[1] * (-cam.fy * iz2) +
               d_j1[2] * (T(2) * cam.fy * p.y() * iz2 * iz);
    out.d_centers.row(i) = (cam.rot.transpose() * d_p).transpose();

    // cov_cam = W cov3d W^T; cov3d = M M^T; M = R diag(s)
    const Mat3<T> d_cov3d = cam.rot.transpose() * d_cov_cam * cam.rot;
    const Mat3<T> d_M = (d_cov3d + d_cov3d.transpose()) * M;
    const Mat3<T> d_R = d_M * scale.asDiagonal();
    const Mat3<T> RT_dM = R.transpose() * d_M;
    for (int axis = 0; axis < 3; ++axis)
      out.d_scales(i, axis) = RT_dM(axis, axis);

    // rotation gradient through quaternion normalization
    const T w = qn[0], xq = qn[1], yq = qn[2], zq = qn[3];
    Mat3<T> dRdq[4];
    dRdq[0] << T(0), -zq, yq, zq, T(0), -xq, -yq, xq, T(0);
    dRdq[1] << T(0), yq, zq, yq, T(-2) * xq, -w, zq, w, T(-2) * xq;
    dRdq[2] << T(-2) * yq, xq, w, xq, T(0), zq, -w, zq, T(-2) * yq;
    dRdq[3] << T(-2) * zq, -w, xq, w, T(-2) * zq, yq, xq, yq, T(0);
    Vec4<T> d_qn;
    for (int m = 0; m < 4; ++m)
      d_qn[m] = T(2) * (d_R.array() * dRdq[m].array()).sum();
    const Vec4<T> d_q = (d_qn - qn * qn.dot(d_qn)) / q_norm;
    out.d_rotations.row(i) = d_q.transpose();
  }
  return out;
}

#define OSPLAT_INSTANTIATE(T)                                                 \
  template Mat3<T> compute_cov3d(const Vec3<T>&, const Vec4<T>&);             \
  template Splat2D<T> project_gaussian(const CameraPose&, const Vec3<T>&,     \
                                       const Mat3<T>&,                        \
                                       const RasterizeConfig<T>&);            \
  template RenderForward<T> rasterize(const GaussianSetT<T>&,                 \
                                      const CameraPose&,                      \
                                      const RasterizeConfig<T>&);             \
  template GaussianGrads<T> rasterize_backward(                               \
      const RenderForward<T>&, const GaussianSetT<T>&, const CameraPose&,     \
      const RasterizeConfig<T>&, const ImageT<T>&);

OSPLAT_INSTANTIATE(float)
OSPLAT_INSTANTIATE(double)
#undef OSPLAT_INSTANTIATE

}  // namespace osplat
