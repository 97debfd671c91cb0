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

namespace {

// 24-joint skeleton mirroring the usual parametric-body joint layout:
// pelvis root, three spine links, symmetric legs/arms, neck and head.
// Left side is +x, up is +y, the figure faces +z.
const double kJointPos[24][3] = {
    {0.00, 0.95, 0.00},   // 0  pelvis
    {0.09, 0.91, 0.00},   // 1  left hip
    {-0.09, 0.91, 0.00},  // 2  right hip
    {0.00, 1.05, 0.00},   // 3  spine1
    {0.10, 0.50, 0.00},   // 4  left knee
    {-0.10, 0.50, 0.00},  // 5  right knee
    {0.00, 1.15, 0.00},   // 6  spine2
    {0.11, 0.10, 0.00},   // 7  left ankle
    {-0.11, 0.10, 0.00},  // 8  right ankle
    {0.00, 1.25, 0.00},   // 9  spine3
    {0.11, 0.03, 0.12},   // 10 left foot
    {-0.11, 0.03, 0.12},  // 11 right foot
    {0.00, 1.45, 0.00},   // 12 neck
    {0.07, 1.40, 0.00},   // 13 left collar
    {-0.07, 1.40, 0.00},  // 14 right collar
    {0.00, 1.58, 0.00},   // 15 head
    {0.18, 1.40, 0.00},   // 16 left shoulder
    {-0.18, 1.40, 0.00},  // 17 right shoulder
    {0.45, 1.38, 0.00},   // 18 left elbow
    {-0.45, 1.38, 0.00},  // 19 right elbow
    {0.70, 1.36, 0.00},   // 20 left wrist
    {-0.70, 1.36, 0.00},  // 21 right wrist
    {0.80, 1.35, 0.00},   // 22 left hand
    {-0.80, 1.35, 0.00},  // 23 right hand
};

const int kParents[24] = {-1, 0, 0,  0,  1,  2,  3,  4,  5,  6,  7,  8,
                          9,  9, 9,  12, 13, 14, 16, 17, 18, 19, 20, 21};

// One capsule per bone plus a head sphere; radius per capsule.
struct BoneSpec {
  int parent;
  int child;    // joint that owns the far end
  double radius;
  bool head_cap;  // head sphere: axis is synthetic, fully bound to `child`
};

const BoneSpec kBones[] = {
    {0, 1, 0.075, false},  {0, 2, 0.075, false},  {0, 3, 0.125, false},
    {1, 4, 0.070, false},  {2, 5, 0.070, false},  {3, 6, 0.130, false},
    {4, 7, 0.050, false},  {5, 8, 0.050, false},  {6, 9, 0.130, false},
    {7, 10, 0.035, false}, {8, 11, 0.035, false}, {9, 12, 0.055, false},
    {9, 13, 0.055, false}, {9, 14, 0.055, false}, {12, 15, 0.060, false},
    {13, 16, 0.050, false}, {14, 17, 0.050, false}, {16, 18, 0.045, false},
    {17, 19, 0.045, false}, {18, 20, 0.040, false}, {19, 21, 0.040, false},
    {20, 22, 0.030, false}, {21, 23, 0.030, false}, {15, 15, 0.110, true},
};

constexpr int kSegments = 8;  // vertices per ring (plus a UV seam duplicate)
constexpr int kRings = 4;

}  // namespace

TemplateBody make_capsule_person() {
  TemplateBody body;
  const int J = 24;
  body.joints.resize(J, 3);
  body.parents.assign(kParents, kParents + J);
  for (int j = 0; j < J; ++j)
    body.joints.row(j) << kJointPos[j][0], kJointPos[j][1], kJointPos[j][2];

  const int n_bones = int(std::size(kBones));
  const int verts_per = kRings * (kSegments + 1) + 2;
  const int faces_per = (kRings - 1) * kSegments * 2 + 2 * kSegments;
  const int V = n_bones * verts_per;
  body.vertices.resize(V, 3);
  body.uv.resize(V, 2);
  body.skin_weights = MatX<double>::Zero(V, J);
  body.faces.reserve(std::size_t(n_bones) * faces_per);

  const int grid = 5;  // UV atlas: one chart cell per capsule
  int vi = 0;
  for (int b = 0; b < n_bones; ++b) {
    const BoneSpec& bone = kBones[b];
    const Vec3<double> pj = body.joints.row(bone.parent).transpose();
    Vec3<double> cj = body.joints.row(bone.child).transpose();
    if (bone.head_cap) cj = pj + Vec3<double>(0.0, 0.14, 0.0);
    const Vec3<double> axis = cj - pj;
    const double len = axis.norm();
    const Vec3<double> dir = axis / len;
    Vec3<double> u = std::abs(dir.y()) < 0.9
                         ? dir.cross(Vec3<double>(0, 1, 0)).normalized()
                         : dir.cross(Vec3<double>(0, 0, 1)).normalized();
    const Vec3<double> w = dir.cross(u);

    const double cell = 1.0 / grid;
    const double cell_x = (b % grid) * cell;
    const double cell_y = (b / grid) * cell;
    auto chart_uv = [&](double uu, double vv) {
      return Vec2<double>(cell_x + (0.03 + 0.94 * uu) * cell,
                          cell_y + (0.03 + 0.94 * vv) * cell);
    };
    auto bone_weights = [&](int row, double s) {
      // Interior follows the parent joint's frame; the far end blends
      // halfway into the child so the next segment creases smoothly.
      if (bone.head_cap) {
        body.skin_weights(row, bone.child) = 1.0;
        return;
      }
      const double wc = 0.5 * std::clamp((s - 0.6) / 0.4, 0.0, 1.0);
      body.skin_weights(row, bone.child) = wc;
      body.skin_weights(row, bone.parent) = 1.0 - wc;
    };

    const int base = vi;
    for (int k = 0; k < kRings; ++k) {
      const double t = double(k) / double(kRings - 1);
      const Vec3<double> center = pj + dir * (t * len);
      for (int s = 0; s <= kSegments; ++s) {
        const double ang = 2.0 * M_PI * double(s % kSegments) / kSegments;
        const Vec3<double> pos =
            center + bone.radius * (std::cos(ang) * u + std::sin(ang) * w);
        body.vertices.row(vi) = pos.transpose();
        body.uv.row(vi) =
            chart_uv(double(s) / kSegments, 0.12 + 0.76 * t).transpose();
        bone_weights(vi, t);
        ++vi;
      }
    }
    const int apex0 = vi;
    body.vertices.row(vi) = (pj - dir * bone.radius).transpose();
    body.uv.row(vi) = chart_uv(0.5, 0.0).transpose();
    bone_weights(vi, 0.0);
    ++vi;
    const int apex1 = vi;
    body.vertices.row(vi) = (cj + dir * bone.radius).transpose();
    body.uv.row(vi) = chart_uv(0.5, 1.0).transpose();
    bone_weights(vi, 1.0);
    ++vi;

    auto ring_vert = [&](int k, int s) { return base + k * (kSegments + 1) + s; };
    for (int k = 0; k + 1 < kRings; ++k) {
      for (int s = 0; s < kSegments; ++s) {
        const int a = ring_vert(k, s), b2 = ring_vert(k, s + 1);
        const int c = ring_vert(k + 1, s + 1), d = ring_vert(k + 1, s);
        body.faces.push_back({a, b2, c});
        body.faces.push_back({a, c, d});
      }
    }
    for (int s = 0; s < kSegments; ++s) {
      body.faces.push_back({apex0, ring_vert(0, s + 1), ring_vert(0, s)});
      body.faces.push_back({apex1, ring_vert(kRings - 1, s),
                            ring_vert(kRings - 1, s + 1)});
    }
  }

  // Linear shape basis: coefficient 0 stretches the figure vertically,
  // coefficient 1 widens it radially around the vertical axis.
  MatX<double> sv0(V, 3), sv1(V, 3);
  for (int i = 0; i < V; ++i) {
    sv0.row(i) << 0.0, 0.10 * (body.vertices(i, 1) - 0.9), 0.0;
    sv1.row(i) << 0.12 * body.vertices(i, 0), 0.0, 0.12 * body.vertices(i, 2);
  }
  MatX<double> sj0(J, 3), sj1(J, 3);
  for (int j = 0; j < J; ++j) {
    sj0.row(j) << 0.0, 0.10 * (body.joints(j, 1) - 0.9), 0.0;
    sj1.row(j) << 0.12 * body.joints(j, 0), 0.0, 0.12 * body.joints(j, 2);
  }
  body.shape_vertex_basis = {sv0, sv1};
  body.shape_joint_basis = {sj0, sj1};
  return body;
}

}  // namespace osplat
