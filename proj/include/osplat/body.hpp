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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "osplat/common.hpp"

namespace osplat {

// Articulated template body: canonical mesh, skeleton, skinning weights, UV
// coordinates, and an optional linear shape basis. Loaded bodies are
// normalized so the bounding-sphere center sits at the origin with radius 1.
struct TemplateBody {
  MatX<double> vertices;                       // V x 3, canonical pose
  std::vector<std::array<int, 3>> faces;       // triangle indices
  MatX<double> joints;                         // J x 3, rest pose
  std::vector<int> parents;                    // -1 for the root
  MatX<double> skin_weights;                   // V x J, rows sum to 1
  MatX<double> uv;                             // V x 2, in [0,1]^2
  std::vector<MatX<double>> shape_vertex_basis;  // B entries, each V x 3
  std::vector<MatX<double>> shape_joint_basis;   // B entries, each J x 3

  int vertex_count() const { return int(vertices.rows()); }
  int joint_count() const { return int(joints.rows()); }
  int face_count() const { return int(faces.size()); }
  int shape_dim() const { return int(shape_vertex_basis.size()); }

  // Joints ordered parents-before-children (root first).
  std::vector<int> topological_order() const;
};

// Per-frame pose: axis-angle per joint, shape coefficients, global
// translation, and the learnable corrections of the motion refinement.
template <class T>
struct BodyStateT {
  MatX<T> theta;              // J x 3 axis-angle
  VecX<T> beta;               // shape coefficients (may be empty)
  Vec3<T> translation = Vec3<T>::Zero();
  MatX<T> delta_theta;        // J x 3, initialized to zero
  Vec3<T> delta_translation = Vec3<T>::Zero();

  static BodyStateT rest(int joints, int shape_dim) {
    BodyStateT s;
    s.theta = MatX<T>::Zero(joints, 3);
    s.beta = VecX<T>::Zero(shape_dim);
    s.delta_theta = MatX<T>::Zero(joints, 3);
    return s;
  }

  MatX<T> refined_theta() const { return theta + delta_theta; }
  Vec3<T> refined_translation() const { return translation + delta_translation; }

  template <class U>
  BodyStateT<U> cast() const {
    BodyStateT<U> o;
    o.theta = theta.template cast<U>();
    o.beta = beta.template cast<U>();
    o.translation = translation.template cast<U>();
    o.delta_theta = delta_theta.template cast<U>();
    o.delta_translation = delta_translation.template cast<U>();
    return o;
  }
};

using BodyState = BodyStateT<float>;
using BodyStated = BodyStateT<double>;

// Points sampled on the canonical surface, with interpolated attributes.
struct SurfaceSamples {
  MatX<double> positions;     // N x 3, on the base (beta = 0) surface
  MatX<double> uv;            // N x 2
  MatX<double> skin_weights;  // N x J
  std::vector<int> face_ids;  // source triangle per sample
  MatX<double> bary;          // N x 3 barycentric coordinates on face_ids

  int count() const { return int(positions.rows()); }
};

// UV-space position map: each valid pixel stores one sample's 3D position.
// sample_index gives the bijection back to SurfaceSamples rows (-1 invalid).
struct UVPositionMap {
  int width = 0;
  int height = 0;
  std::vector<double> positions;   // H x W x 3, zero where invalid
  std::vector<std::uint8_t> valid; // H x W
  std::vector<int> sample_index;   // H x W

  int valid_count = 0;

  Vec3<double> position_at(int y, int x) const {
    const std::size_t i = (std::size_t(y) * width + x) * 3;
    return Vec3<double>(positions[i], positions[i + 1], positions[i + 2]);
  }
};

// ---------------------------------------------------------------------------
// Asset I/O

// Parses and validates a .body asset, then normalizes it into the unit
// sphere. Throws ValidationError naming the offending element on weight rows
// that do not sum to 1 (within 1e-4), non-tree skeletons, or malformed files.
TemplateBody load_template(const std::string& path);

void save_body(const TemplateBody& body, const std::string& path);

// Recenter on the bounding-sphere center and scale the radius to 1.
void normalize_body(TemplateBody& body);

// Procedural 24-joint articulated test figure built from capsules, one per
// bone, with a chart-per-bone UV atlas and a 2-vector shape basis.
TemplateBody make_capsule_person();

// Pose file: one row per frame, "index theta[J*3] translation[3]".
std::vector<BodyStated> load_poses(const std::string& path, int joint_count);
void save_poses(const std::vector<BodyStated>& states, const std::string& path);

// ---------------------------------------------------------------------------
// Shape blending

// Rest-pose joint locations after linear shape blending.
MatX<double> joint_locations(const TemplateBody& body, const VecX<double>& beta);

// Canonical vertices after linear shape blending.
MatX<double> shaped_vertices(const TemplateBody& body, const VecX<double>& beta);

// ---------------------------------------------------------------------------
// Rotations

// Axis-angle to rotation matrix (exponential map).
template <class T>
Mat3<T> rodrigues(const Vec3<T>& aa);

// Gradient of a loss through rodrigues: given dL/dR, returns dL/d(axis-angle).
template <class T>
Vec3<T> rodrigues_backward(const Vec3<T>& aa, const Mat3<T>& grad_R);

template <class T>
Mat3<T> cross_matrix(const Vec3<T>& v) {
  Mat3<T> m;
  m << T(0), -v.z(), v.y(), v.z(), T(0), -v.x(), -v.y(), v.x(), T(0);
  return m;
}

// ---------------------------------------------------------------------------
// Linear blend skinning

// Per-joint skinning transforms x -> R x + t composed along the kinematic
// tree, plus the global joint rotations used for splat frame blending.
template <class T>
struct JointTransforms {
  std::vector<Mat3<T>> rot;        // skinning rotation per joint
  std::vector<Vec3<T>> trans;      // skinning translation per joint
  std::vector<Mat3<T>> global_rot; // world orientation per joint
};

template <class T>
JointTransforms<T> kinematic_transforms(const MatX<T>& rest_joints,
                                        const std::vector<int>& parents,
                                        const std::vector<int>& topo_order,
                                        const MatX<T>& theta);

// Skins N points: out_i = sum_j w_ij (R_j p_i + t_j) + translation.
template <class T>
MatX<T> skin_points(const MatX<T>& points, const MatX<T>& weights,
                    const JointTransforms<T>& transforms,
                    const Vec3<T>& translation);

// Convenience wrapper matching the full op signature.
template <class T>
MatX<T> skin_lbs(const MatX<T>& points, const MatX<T>& weights,
                 const MatX<T>& rest_joints, const std::vector<int>& parents,
                 const MatX<T>& theta, const Vec3<T>& translation);

template <class T>
struct LbsGrads {
  MatX<T> d_points;       // N x 3
  MatX<T> d_theta;        // J x 3
  Vec3<T> d_translation = Vec3<T>::Zero();
};

// Reverse-mode gradients of skin_points through the kinematic tree. The
// per-joint rest offsets are treated as constants.
template <class T>
LbsGrads<T> skin_lbs_backward(const MatX<T>& points, const MatX<T>& weights,
                              const MatX<T>& rest_joints,
                              const std::vector<int>& parents,
                              const std::vector<int>& topo_order,
                              const MatX<T>& theta, const MatX<T>& grad_out);

// ---------------------------------------------------------------------------
// Sampling and UV maps

// Area-weighted stratified surface sampling, deterministic per seed.
SurfaceSamples sample_surface(const TemplateBody& body, int count,
                              std::uint64_t seed);

// Same, but re-jitters colliding samples so each maps to a distinct pixel of
// a width x height UV grid. Required before uv_position_map at that
// resolution.
SurfaceSamples sample_surface_for_uv(const TemplateBody& body, int count,
                                     std::uint64_t seed, int uv_width,
                                     int uv_height);

// Scatter per-sample positions into the UV grid. Throws on pixel collisions.
UVPositionMap uv_position_map(const SurfaceSamples& samples,
                              const MatX<double>& positions, int width,
                              int height);

// Sample positions re-evaluated on the shape-blended surface T(beta).
MatX<double> shaped_sample_positions(const TemplateBody& body,
                                     const SurfaceSamples& samples,
                                     const VecX<double>& beta);

// D = T(beta) surface + dT, elementwise.
template <class T>
MatX<T> apply_offsets(const MatX<T>& template_surface, const MatX<T>& offsets) {
  require(template_surface.rows() == offsets.rows() &&
              template_surface.cols() == offsets.cols(),
          "apply_offsets: shape mismatch");
  return template_surface + offsets;
}

}  // namespace osplat
