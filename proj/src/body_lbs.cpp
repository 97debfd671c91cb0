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
#include <cmath>

#include "osplat/body.hpp"

namespace osplat {

template <class T>
Mat3<T> rodrigues(const Vec3<T>& aa) {
  const T theta2 = aa.squaredNorm();
  const Mat3<T> K = cross_matrix(aa);
  T a, b;  // R = I + a K + b K^2
  if (theta2 < T(1e-12)) {
    a = T(1) - theta2 / T(6);
    b = T(0.5) - theta2 / T(24);
  } else {
    const T theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (T(1) - std::cos(theta)) / theta2;
  }
  return Mat3<T>::Identity() + a * K + b * K * K;
}

// Gallego & Yezzi closed form for d(exp aa)/d(aa_i), with the [e_i]x limit
// at the identity.
template <class T>
Vec3<T> rodrigues_backward(const Vec3<T>& aa, const Mat3<T>& grad_R) {
  const T theta2 = aa.squaredNorm();
  const Mat3<T> R = rodrigues(aa);
  Vec3<T> grad = Vec3<T>::Zero();
  for (int i = 0; i < 3; ++i) {
    Vec3<T> e = Vec3<T>::Zero();
    e[i] = T(1);
    Mat3<T> dR;
    if (theta2 < T(1e-12)) {
      dR = cross_matrix(e);
    } else {
      const Vec3<T> v = aa.cross((Mat3<T>::Identity() - R) * e);
      dR = ((aa[i] * cross_matrix(aa) + cross_matrix(v)) / theta2) * R;
    }
    grad[i] = (grad_R.array() * dR.array()).sum();
  }
  return grad;
}

template <class T>
JointTransforms<T> kinematic_transforms(const MatX<T>& rest_joints,
                                        const std::vector<int>& parents,
                                        const std::vector<int>& topo_order,
                                        const MatX<T>& theta) {
  const int J = int(rest_joints.rows());
  require(theta.rows() == J && theta.cols() == 3,
          "kinematic_transforms: theta shape mismatch");
  JointTransforms<T> out;
  out.rot.resize(J);
  out.trans.resize(J);
  out.global_rot.resize(J);
  // Skinning transform accumulated directly as A_j = A_parent * B_j with
  // B_j = [R_j | j_j - R_j j_j]; at theta = 0 every factor is exactly the
  // identity, which keeps the rest pose bit-exact.
  for (const int j : topo_order) {
    const Mat3<T> local_R = rodrigues<T>(theta.row(j).transpose());
    const Vec3<T> rest = rest_joints.row(j).transpose();
    const Vec3<T> local_t = rest - local_R * rest;
    const int p = parents[j];
    if (p < 0) {
      out.rot[j] = local_R;
      out.trans[j] = local_t;
    } else {
      out.rot[j] = out.rot[p] * local_R;
      out.trans[j] = out.rot[p] * local_t + out.trans[p];
    }
    out.global_rot[j] = out.rot[j];
  }
  return out;
}

template <class T>
MatX<T> skin_points(const MatX<T>& points, const MatX<T>& weights,
                    const JointTransforms<T>& transforms,
                    const Vec3<T>& translation) {
  const int N = int(points.rows());
  const int J = int(transforms.rot.size());
  require(points.cols() == 3, "skin_points: points must be N x 3");
  require(weights.rows() == N && weights.cols() == J,
          "skin_points: weight shape mismatch");
  MatX<T> out(N, 3);
  for (int i = 0; i < N; ++i) {
    const Vec3<T> p = points.row(i).transpose();
    // deviation form: identity transforms contribute exactly zero
    Vec3<T> acc = p + translation;
    for (int j = 0; j < J; ++j) {
      const T w = weights(i, j);
      if (w == T(0)) continue;
      acc += w * (transforms.rot[j] * p + transforms.trans[j] - p);
    }
    out.row(i) = acc.transpose();
  }
  return out;
}

template <class T>
MatX<T> skin_lbs(const MatX<T>& points, const MatX<T>& weights,
                 const MatX<T>& rest_joints, const std::vector<int>& parents,
                 const MatX<T>& theta, const Vec3<T>& translation) {
  TemplateBody dummy;  // reuse the tree check / ordering
  dummy.joints = rest_joints.template cast<double>();
  dummy.parents = parents;
  const auto topo = dummy.topological_order();
  return skin_points(points, weights,
                     kinematic_transforms(rest_joints, parents, topo, theta),
                     translation);
}

template <class T>
LbsGrads<T> skin_lbs_backward(const MatX<T>& points, const MatX<T>& weights,
                              const MatX<T>& rest_joints,
                              const std::vector<int>& parents,
                              const std::vector<int>& topo_order,
                              const MatX<T>& theta, const MatX<T>& grad_out) {
  const int N = int(points.rows());
  const int J = int(rest_joints.rows());
  require(grad_out.rows() == N && grad_out.cols() == 3,
          "skin_lbs_backward: grad shape mismatch");
  const JointTransforms<T> tf =
      kinematic_transforms(rest_joints, parents, topo_order, theta);

  LbsGrads<T> grads;
  grads.d_points = MatX<T>::Zero(N, 3);
  grads.d_theta = MatX<T>::Zero(J, 3);

  // Adjoints of the per-joint skinning transforms (x -> A_R x + A_t).
  std::vector<Mat3<T>> d_A_rot(J, Mat3<T>::Zero());
  std::vector<Vec3<T>> d_A_trans(J, Vec3<T>::Zero());
  for (int i = 0; i < N; ++i) {
    const Vec3<T> p = points.row(i).transpose();
    const Vec3<T> g = grad_out.row(i).transpose();
    Mat3<T> blended = Mat3<T>::Identity();
    for (int j = 0; j < J; ++j) {
      const T w = weights(i, j);
      if (w == T(0)) continue;
      d_A_rot[j] += w * g * p.transpose();
      d_A_trans[j] += w * g;
      blended += w * (tf.rot[j] - Mat3<T>::Identity());
    }
    grads.d_points.row(i) = (blended.transpose() * g).transpose();
    grads.d_translation += g;
  }

  // Walk the tree children-first, peeling A_j = A_p * B_j with
  // B_j = [R_j | rest_j - R_j rest_j].
  for (auto it = topo_order.rbegin(); it != topo_order.rend(); ++it) {
    const int j = *it;
    const int p = parents[j];
    const Mat3<T> local_R = rodrigues<T>(theta.row(j).transpose());
    const Vec3<T> rest = rest_joints.row(j).transpose();
    Mat3<T> d_B_rot;
    Vec3<T> d_B_trans;
    if (p < 0) {
      d_B_rot = d_A_rot[j];
      d_B_trans = d_A_trans[j];
    } else {
      d_B_rot = tf.rot[p].transpose() * d_A_rot[j];
      d_B_trans = tf.rot[p].transpose() * d_A_trans[j];
      const Vec3<T> local_t = rest - local_R * rest;
      d_A_rot[p] += d_A_rot[j] * local_R.transpose() +
                    d_A_trans[j] * local_t.transpose();
      d_A_trans[p] += d_A_trans[j];
    }
    const Mat3<T> d_local_R = d_B_rot - d_B_trans * rest.transpose();
    grads.d_theta.row(j) =
        rodrigues_backward<T>(theta.row(j).transpose(), d_local_R).transpose();
  }
  return grads;
}

template Mat3<float> rodrigues(const Vec3<float>&);
template Mat3<double> rodrigues(const Vec3<double>&);
template Vec3<float> rodrigues_backward(const Vec3<float>&, const Mat3<float>&);
template Vec3<double> rodrigues_backward(const Vec3<double>&,
                                         const Mat3<double>&);
template JointTransforms<float> kinematic_transforms(
    const MatX<float>&, const std::vector<int>&, const std::vector<int>&,
    const MatX<float>&);
template JointTransforms<double> kinematic_transforms(
    const MatX<double>&, const std::vector<int>&, const std::vector<int>&,
    const MatX<double>&);
template MatX<float> skin_points(const MatX<float>&, const MatX<float>&,
                                 const JointTransforms<float>&,
                                 const Vec3<float>&);
template MatX<double> skin_points(const MatX<double>&, const MatX<double>&,
                                  const JointTransforms<double>&,
                                  const Vec3<double>&);
template MatX<float> skin_lbs(const MatX<float>&, const MatX<float>&,
                              const MatX<float>&, const std::vector<int>&,
                              const MatX<float>&, const Vec3<float>&);
template MatX<double> skin_lbs(const MatX<double>&, const MatX<double>&,
                               const MatX<double>&, const std::vector<int>&,
                               const MatX<double>&, const Vec3<double>&);
template LbsGrads<float> skin_lbs_backward(
    const MatX<float>&, const MatX<float>&, const MatX<float>&,
    const std::vector<int>&, const std::vector<int>&, const MatX<float>&,
    const MatX<float>&);
template LbsGrads<double> skin_lbs_backward(
    const MatX<double>&, const MatX<double>&, const MatX<double>&,
    const std::vector<int>&, const std::vector<int>&, const MatX<double>&,
    const MatX<double>&);

}  // namespace osplat
