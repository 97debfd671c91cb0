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

#include <string>
#include <vector>

#include "osplat/common.hpp"

namespace osplat {

// Pinhole camera on the capture orbit. World frame is Y-up with the subject
// centered at the origin; the camera frame is OpenCV-style (x right, y down,
// z forward). Extrinsic maps world to camera. Square pixels, principal point
// at the exact image center, vertical field of view.
struct CameraPose {
  double azimuth = 0.0;    // degrees
  double elevation = 0.0;  // degrees
  double radius = 1.0;     // world units
  double fov = 33.8;       // degrees, vertical
  int width = 576;
  int height = 576;
  Mat4<double> extrinsic = Mat4<double>::Identity();  // world -> camera
  Mat3<double> intrinsic = Mat3<double>::Identity();

  Vec3<double> center() const;  // camera position in world space
  double focal() const { return intrinsic(0, 0); }
};

// Camera at (azimuth, elevation) on a sphere of the given radius, looking at
// the world origin. Azimuth 0 places the camera on +Z (the front view),
// azimuth 90 on +X; elevation raises it toward +Y.
CameraPose look_at_origin(double azimuth_deg, double elevation_deg,
                          double radius, double fov_deg, int width, int height);

// n_frames poses at azimuths k * (360 / n_frames), all at the same elevation.
std::vector<CameraPose> make_static_orbit(int n_frames, double elevation_deg,
                                          double radius, double fov_deg,
                                          int width, int height);

template <class T>
struct Projection {
  Vec2<T> pixel = Vec2<T>::Zero();
  T depth = T(0);
  bool valid = false;  // false when the point is at or behind the camera
};

// Pinhole projection with perspective divide. Continuous pixel coordinates:
// the image spans [0, width] x [0, height] with the center at (w/2, h/2).
template <class T>
Projection<T> project(const CameraPose& pose, const Vec3<T>& world_point) {
  const Mat3<T> R = pose.extrinsic.template topLeftCorner<3, 3>().template cast<T>();
  const Vec3<T> t = pose.extrinsic.template topRightCorner<3, 1>().template cast<T>();
  const Vec3<T> p = R * world_point + t;
  Projection<T> out;
  out.depth = p.z();
  if (!(p.z() > T(0))) return out;
  const T fx = T(pose.intrinsic(0, 0));
  const T fy = T(pose.intrinsic(1, 1));
  const T cx = T(pose.intrinsic(0, 2));
  const T cy = T(pose.intrinsic(1, 2));
  out.pixel.x() = fx * p.x() / p.z() + cx;
  out.pixel.y() = fy * p.y() / p.z() + cy;
  out.valid = true;
  return out;
}

// Inverse of project at a known camera-space depth.
template <class T>
Vec3<T> unproject(const CameraPose& pose, const Vec2<T>& pixel, T depth) {
  const T fx = T(pose.intrinsic(0, 0));
  const T fy = T(pose.intrinsic(1, 1));
  const T cx = T(pose.intrinsic(0, 2));
  const T cy = T(pose.intrinsic(1, 2));
  const Vec3<T> cam((pixel.x() - cx) / fx * depth, (pixel.y() - cy) / fy * depth,
                    depth);
  const Mat3<T> R = pose.extrinsic.template topLeftCorner<3, 3>().template cast<T>();
  const Vec3<T> t = pose.extrinsic.template topRightCorner<3, 1>().template cast<T>();
  return R.transpose() * (cam - t);
}

// Plain-text orbit dump, one row per pose:
//   index azimuth elevation radius fov width height e00 e01 ... e33
void save_orbit(const std::vector<CameraPose>& poses, const std::string& path);
std::vector<CameraPose> load_orbit(const std::string& path);

}  // namespace osplat
