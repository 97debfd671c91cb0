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
#include "osplat/camera.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace osplat {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
}

Vec3<double> CameraPose::center() const {
  const Mat3<double> R = extrinsic.topLeftCorner<3, 3>();
  const Vec3<double> t = extrinsic.topRightCorner<3, 1>();
  return -R.transpose() * t;
}

CameraPose look_at_origin(double azimuth_deg, double elevation_deg,
                          double radius, double fov_deg, int width,
                          int height) {
  require(radius > 0.0, "camera: radius must be positive");
  require(fov_deg > 0.0 && fov_deg < 180.0, "camera: fov must be in (0, 180)");
  require(width > 0 && height > 0, "camera: image dimensions must be positive");

  CameraPose pose;
  pose.azimuth = azimuth_deg;
  pose.elevation = elevation_deg;
  pose.radius = radius;
  pose.fov = fov_deg;
  pose.width = width;
  pose.height = height;

  const double az = azimuth_deg * kDegToRad;
  const double el = elevation_deg * kDegToRad;
  const Vec3<double> eye(radius * std::sin(az) * std::cos(el),
                         radius * std::sin(el),
                         radius * std::cos(az) * std::cos(el));

  Vec3<double> z = (-eye).normalized();  // toward the origin
  Vec3<double> up(0.0, 1.0, 0.0);
  if (std::abs(z.dot(up)) > 0.999999) up = Vec3<double>(0.0, 0.0, 1.0);
  const Vec3<double> x = z.cross(up).normalized();
  const Vec3<double> y = z.cross(x);  // camera y points down in world space

  Mat3<double> R;
  R.row(0) = x.transpose();
  R.row(1) = y.transpose();
  R.row(2) = z.transpose();
  pose.extrinsic.setIdentity();
  pose.extrinsic.topLeftCorner<3, 3>() = R;
  pose.extrinsic.topRightCorner<3, 1>() = -R * eye;

  const double f = (double(height) / 2.0) / std::tan(fov_deg * kDegToRad / 2.0);
  pose.intrinsic.setIdentity();
  pose.intrinsic(0, 0) = f;
  pose.intrinsic(1, 1) = f;
  pose.intrinsic(0, 2) = double(width) / 2.0;
  pose.intrinsic(1, 2) = double(height) / 2.0;
  return pose;
}

std::vector<CameraPose> make_static_orbit(int n_frames, double elevation_deg,
                                          double radius, double fov_deg,
                                          int width, int height) {
  require(n_frames >= 2, "make_static_orbit: need at least 2 frames");
  require(radius > 0.0, "make_static_orbit: radius must be positive");
  std::vector<CameraPose> poses;
  poses.reserve(n_frames);
  for (int k = 0; k < n_frames; ++k) {
    const double az = 360.0 * double(k) / double(n_frames);
    poses.push_back(
        look_at_origin(az, elevation_deg, radius, fov_deg, width, height));
  }
  return poses;
}

void save_orbit(const std::vector<CameraPose>& poses, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("save_orbit: cannot open " + path);
  os << std::setprecision(17);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const CameraPose& p = poses[i];
    os << i << ' ' << p.azimuth << ' ' << p.elevation << ' ' << p.radius << ' '
       << p.fov << ' ' << p.width << ' ' << p.height;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) os << ' ' << p.extrinsic(r, c);
    os << '\n';
  }
  if (!os) throw IoError("save_orbit: write failed for " + path);
}

std::vector<CameraPose> load_orbit(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("load_orbit: cannot open " + path);
  std::vector<CameraPose> poses;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t index;
    CameraPose p;
    ss >> index >> p.azimuth >> p.elevation >> p.radius >> p.fov >> p.width >>
        p.height;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) ss >> p.extrinsic(r, c);
    if (!ss) throw IoError("load_orbit: malformed row in " + path);
    const double f =
        (double(p.height) / 2.0) / std::tan(p.fov * kDegToRad / 2.0);
    p.intrinsic.setIdentity();
    p.intrinsic(0, 0) = f;
    p.intrinsic(1, 1) = f;
    p.intrinsic(0, 2) = double(p.width) / 2.0;
    p.intrinsic(1, 2) = double(p.height) / 2.0;
    poses.push_back(p);
  }
  return poses;
}

}  // namespace osplat
