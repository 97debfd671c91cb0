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
#include "osplat/body.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace osplat {

std::vector<int> TemplateBody::topological_order() const {
  const int J = joint_count();
  std::vector<int> order;
  order.reserve(J);
  std::vector<std::vector<int>> children(J);
  int root = -1;
  for (int j = 0; j < J; ++j) {
    if (parents[j] < 0) {
      require(root < 0, "body: multiple skeleton roots");
      root = j;
    } else {
      require(parents[j] < J, "body: parent index out of range");
      children[parents[j]].push_back(j);
    }
  }
  require(root == 0, "body: skeleton root must be joint 0");
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int j = stack.back();
    stack.pop_back();
    order.push_back(j);
    for (auto it = children[j].rbegin(); it != children[j].rend(); ++it)
      stack.push_back(*it);
  }
  require(int(order.size()) == J,
          "body: skeleton is not a tree (cycle or unreachable joint)");
  return order;
}

void normalize_body(TemplateBody& body) {
  const int V = body.vertex_count();
  require(V > 0, "body: no vertices");
  Vec3<double> lo = body.vertices.row(0).transpose();
  Vec3<double> hi = lo;
  for (int i = 1; i < V; ++i) {
    lo = lo.cwiseMin(body.vertices.row(i).transpose());
    hi = hi.cwiseMax(body.vertices.row(i).transpose());
  }
  const Vec3<double> center = 0.5 * (lo + hi);
  double radius = 0.0;
  for (int i = 0; i < V; ++i)
    radius = std::max(radius,
                      (body.vertices.row(i).transpose() - center).norm());
  require(radius > 0.0, "body: degenerate mesh, zero bounding radius");
  const double inv = 1.0 / radius;
  for (int i = 0; i < V; ++i)
    body.vertices.row(i) =
        ((body.vertices.row(i).transpose() - center) * inv).transpose();
  for (int j = 0; j < body.joint_count(); ++j)
    body.joints.row(j) =
        ((body.joints.row(j).transpose() - center) * inv).transpose();
  for (auto& basis : body.shape_vertex_basis) basis *= inv;
  for (auto& basis : body.shape_joint_basis) basis *= inv;
}

namespace {

void validate_body(const TemplateBody& body) {
  const int V = body.vertex_count();
  const int J = body.joint_count();
  require(V >= 3, "body: needs at least 3 vertices");
  require(J >= 1, "body: needs at least 1 joint");
  require(int(body.parents.size()) == J, "body: parents size mismatch");
  require(body.skin_weights.rows() == V && body.skin_weights.cols() == J,
          "body: skin weight shape mismatch");
  require(body.uv.rows() == V && body.uv.cols() == 2,
          "body: uv shape mismatch");
  for (const auto& f : body.faces)
    for (int k = 0; k < 3; ++k)
      require(f[k] >= 0 && f[k] < V, "body: face index out of range");
  for (int i = 0; i < V; ++i) {
    double sum = 0.0;
    for (int j = 0; j < J; ++j) {
      const double w = body.skin_weights(i, j);
      require(w >= 0.0, "body: negative skin weight at vertex " +
                            std::to_string(i));
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-4)
      throw ValidationError("body: skin weights of vertex " +
                            std::to_string(i) + " sum to " +
                            std::to_string(sum) + ", expected 1");
    require(body.uv(i, 0) >= 0.0 && body.uv(i, 0) <= 1.0 &&
                body.uv(i, 1) >= 0.0 && body.uv(i, 1) <= 1.0,
            "body: uv of vertex " + std::to_string(i) + " outside [0,1]^2");
  }
  for (const auto& basis : body.shape_vertex_basis)
    require(basis.rows() == V && basis.cols() == 3,
            "body: vertex shape basis shape mismatch");
  for (const auto& basis : body.shape_joint_basis)
    require(basis.rows() == J && basis.cols() == 3,
            "body: joint shape basis shape mismatch");
  require(body.shape_joint_basis.size() == body.shape_vertex_basis.size(),
          "body: vertex/joint shape basis count mismatch");
  body.topological_order();  // throws on non-tree skeletons
}

std::string next_content_line(std::istream& is) {
  std::string line;
  while (std::getline(is, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == '#') continue;
    return line;
  }
  throw ValidationError("body file: unexpected end of file");
}

}  // namespace

TemplateBody load_template(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("load_template: cannot open " + path);

  try {
    std::istringstream header(next_content_line(is));
    std::string magic;
    int version = 0;
    header >> magic >> version;
    require(magic == "OSPLAT_BODY" && version == 1,
            "body file: bad magic or version");

    std::istringstream counts(next_content_line(is));
    std::string kw;
    int V = 0, F = 0, J = 0, B = 0;
    counts >> kw >> V >> F >> J >> B;
    require(kw == "counts" && V > 0 && F >= 0 && J > 0 && B >= 0,
            "body file: bad counts line");

    TemplateBody body;
    auto expect_section = [&](const std::string& name) {
      const std::string line = next_content_line(is);
      std::istringstream ss(line);
      std::string got;
      ss >> got;
      require(got == name, "body file: expected section '" + name +
                               "', found '" + got + "'");
      return line;
    };

    expect_section("vertices");
    body.vertices.resize(V, 3);
    for (int i = 0; i < V; ++i) {
      std::istringstream ss(next_content_line(is));
      ss >> body.vertices(i, 0) >> body.vertices(i, 1) >> body.vertices(i, 2);
      require(bool(ss), "body file: malformed vertex " + std::to_string(i));
    }

    expect_section("faces");
    body.faces.resize(F);
    for (int i = 0; i < F; ++i) {
      std::istringstream ss(next_content_line(is));
      ss >> body.faces[i][0] >> body.faces[i][1] >> body.faces[i][2];
      require(bool(ss), "body file: malformed face " + std::to_string(i));
    }

    expect_section("joints");
    body.joints.resize(J, 3);
    for (int i = 0; i < J; ++i) {
      std::istringstream ss(next_content_line(is));
      ss >> body.joints(i, 0) >> body.joints(i, 1) >> body.joints(i, 2);
      require(bool(ss), "body file: malformed joint " + std::to_string(i));
    }

    expect_section("parents");
    {
      std::istringstream ss(next_content_line(is));
      body.parents.resize(J);
      for (int i = 0; i < J; ++i) ss >> body.parents[i];
      require(bool(ss), "body file: malformed parents line");
    }

    expect_section("weights");
    body.skin_weights = MatX<double>::Zero(V, J);
    for (int i = 0; i < V; ++i) {
      std::istringstream ss(next_content_line(is));
      int k = 0;
      ss >> k;
      require(k >= 1 && k <= 4, "body file: vertex " + std::to_string(i) +
                                    " must have 1..4 influences");
      for (int n = 0; n < k; ++n) {
        int j = -1;
        double w = 0.0;
        ss >> j >> w;
        require(bool(ss) && j >= 0 && j < J,
                "body file: bad influence on vertex " + std::to_string(i));
        body.skin_weights(i, j) += w;
      }
    }

    expect_section("uv");
    body.uv.resize(V, 2);
    for (int i = 0; i < V; ++i) {
      std::istringstream ss(next_content_line(is));
      ss >> body.uv(i, 0) >> body.uv(i, 1);
      require(bool(ss), "body file: malformed uv " + std::to_string(i));
    }

    for (int b = 0; b < B; ++b) {
      expect_section("shape_vertices");
      MatX<double> sv(V, 3);
      for (int i = 0; i < V; ++i) {
        std::istringstream ss(next_content_line(is));
        ss >> sv(i, 0) >> sv(i, 1) >> sv(i, 2);
        require(bool(ss), "body file: malformed shape vertex row");
      }
      body.shape_vertex_basis.push_back(std::move(sv));
      expect_section("shape_joints");
      MatX<double> sj(J, 3);
      for (int i = 0; i < J; ++i) {
        std::istringstream ss(next_content_line(is));
        ss >> sj(i, 0) >> sj(i, 1) >> sj(i, 2);
        require(bool(ss), "body file: malformed shape joint row");
      }
      body.shape_joint_basis.push_back(std::move(sj));
    }

    validate_body(body);
    normalize_body(body);
    return body;
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void save_body(const TemplateBody& body, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("save_body: cannot open " + path);
  os << std::setprecision(17);
  const int V = body.vertex_count();
  const int F = body.face_count();
  const int J = body.joint_count();
  const int B = body.shape_dim();
  os << "OSPLAT_BODY 1\n";
  os << "counts " << V << ' ' << F << ' ' << J << ' ' << B << '\n';
  os << "vertices\n";
  for (int i = 0; i < V; ++i)
    os << body.vertices(i, 0) << ' ' << body.vertices(i, 1) << ' '
       << body.vertices(i, 2) << '\n';
  os << "faces\n";
  for (const auto& f : body.faces)
    os << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  os << "joints\n";
  for (int i = 0; i < J; ++i)
    os << body.joints(i, 0) << ' ' << body.joints(i, 1) << ' '
       << body.joints(i, 2) << '\n';
  os << "parents\n";
  for (int i = 0; i < J; ++i) os << body.parents[i] << (i + 1 < J ? ' ' : '\n');
  os << "weights\n";
  for (int i = 0; i < V; ++i) {
    std::vector<std::pair<int, double>> inf;
    for (int j = 0; j < J; ++j)
      if (body.skin_weights(i, j) != 0.0)
        inf.emplace_back(j, body.skin_weights(i, j));
    if (inf.size() > 4) {
      std::sort(inf.begin(), inf.end(),
                [](auto& a, auto& b) { return a.second > b.second; });
      inf.resize(4);
      double sum = 0.0;
      for (auto& [j, w] : inf) sum += w;
      for (auto& [j, w] : inf) w /= sum;
    }
    os << inf.size();
    for (const auto& [j, w] : inf) os << ' ' << j << ' ' << w;
    os << '\n';
  }
  os << "uv\n";
  for (int i = 0; i < V; ++i)
    os << body.uv(i, 0) << ' ' << body.uv(i, 1) << '\n';
  for (int b = 0; b < B; ++b) {
    os << "shape_vertices " << b << '\n';
    for (int i = 0; i < V; ++i)
      os << body.shape_vertex_basis[b](i, 0) << ' '
         << body.shape_vertex_basis[b](i, 1) << ' '
         << body.shape_vertex_basis[b](i, 2) << '\n';
    os << "shape_joints " << b << '\n';
    for (int i = 0; i < J; ++i)
      os << body.shape_joint_basis[b](i, 0) << ' '
         << body.shape_joint_basis[b](i, 1) << ' '
         << body.shape_joint_basis[b](i, 2) << '\n';
  }
  if (!os) throw IoError("save_body: write failed for " + path);
}

std::vector<BodyStated> load_poses(const std::string& path, int joint_count) {
  std::ifstream is(path);
  if (!is) throw IoError("load_poses: cannot open " + path);
  std::vector<BodyStated> states;
  std::string line;
  while (std::getline(is, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    std::istringstream ss(line);
    std::size_t index;
    ss >> index;
    BodyStated s = BodyStated::rest(joint_count, 0);
    for (int j = 0; j < joint_count; ++j)
      for (int c = 0; c < 3; ++c) ss >> s.theta(j, c);
    ss >> s.translation.x() >> s.translation.y() >> s.translation.z();
    if (!ss)
      throw ValidationError("load_poses: row " + std::to_string(states.size()) +
                            " malformed for " + std::to_string(joint_count) +
                            " joints");
    std::string extra;
    if (ss >> extra)
      throw ValidationError("load_poses: row " + std::to_string(states.size()) +
                            " has trailing columns; expected " +
                            std::to_string(joint_count) + " joints");
    states.push_back(std::move(s));
  }
  return states;
}

void save_poses(const std::vector<BodyStated>& states, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("save_poses: cannot open " + path);
  os << std::setprecision(17);
  for (std::size_t i = 0; i < states.size(); ++i) {
    os << i;
    const auto& s = states[i];
    for (int j = 0; j < s.theta.rows(); ++j)
      for (int c = 0; c < 3; ++c) os << ' ' << s.theta(j, c);
    os << ' ' << s.translation.x() << ' ' << s.translation.y() << ' '
       << s.translation.z() << '\n';
  }
  if (!os) throw IoError("save_poses: write failed for " + path);
}

MatX<double> joint_locations(const TemplateBody& body,
                             const VecX<double>& beta) {
  require(int(beta.size()) == body.shape_dim(),
          "joint_locations: beta dimension mismatch (expected " +
              std::to_string(body.shape_dim()) + ", got " +
              std::to_string(beta.size()) + ")");
  MatX<double> joints = body.joints;
  for (int b = 0; b < body.shape_dim(); ++b)
    joints += beta[b] * body.shape_joint_basis[b];
  return joints;
}

MatX<double> shaped_vertices(const TemplateBody& body,
                             const VecX<double>& beta) {
  require(int(beta.size()) == body.shape_dim(),
          "shaped_vertices: beta dimension mismatch");
  MatX<double> verts = body.vertices;
  for (int b = 0; b < body.shape_dim(); ++b)
    verts += beta[b] * body.shape_vertex_basis[b];
  return verts;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

struct FaceTables {
  std::vector<double> cdf;  // cumulative area, normalized to 1
  double total_area = 0.0;
};

FaceTables face_area_tables(const TemplateBody& body) {
  FaceTables t;
  t.cdf.resize(body.face_count());
  double acc = 0.0;
  for (int f = 0; f < body.face_count(); ++f) {
    const auto& tri = body.faces[f];
    const Vec3<double> a = body.vertices.row(tri[0]).transpose();
    const Vec3<double> b = body.vertices.row(tri[1]).transpose();
    const Vec3<double> c = body.vertices.row(tri[2]).transpose();
    acc += 0.5 * (b - a).cross(c - a).norm();
    t.cdf[f] = acc;
  }
  t.total_area = acc;
  require(acc > 0.0, "sample_surface: degenerate mesh with zero total area");
  for (auto& v : t.cdf) v /= acc;
  return t;
}

struct DrawnSample {
  int face;
  Vec3<double> bary;
};

DrawnSample draw_sample(const FaceTables& tables, double strat_u, Rng& rng) {
  DrawnSample s;
  const auto it =
      std::upper_bound(tables.cdf.begin(), tables.cdf.end(), strat_u);
  s.face = int(std::min<std::ptrdiff_t>(it - tables.cdf.begin(),
                                        std::ptrdiff_t(tables.cdf.size()) - 1));
  const double su = std::sqrt(rng.uniform());
  const double r2 = rng.uniform();
  s.bary = Vec3<double>(1.0 - su, su * (1.0 - r2), su * r2);
  return s;
}

void write_sample(const TemplateBody& body, const DrawnSample& d, int row,
                  SurfaceSamples& out) {
  const auto& tri = body.faces[d.face];
  out.positions.row(row).setZero();
  out.uv.row(row).setZero();
  out.skin_weights.row(row).setZero();
  for (int k = 0; k < 3; ++k) {
    out.positions.row(row) += d.bary[k] * body.vertices.row(tri[k]);
    out.uv.row(row) += d.bary[k] * body.uv.row(tri[k]);
    out.skin_weights.row(row) += d.bary[k] * body.skin_weights.row(tri[k]);
  }
  out.face_ids[row] = d.face;
  out.bary.row(row) = d.bary.transpose();
}

SurfaceSamples alloc_samples(const TemplateBody& body, int count) {
  SurfaceSamples s;
  s.positions.resize(count, 3);
  s.uv.resize(count, 2);
  s.skin_weights.resize(count, body.joint_count());
  s.face_ids.resize(count);
  s.bary.resize(count, 3);
  return s;
}

inline int uv_pixel(double u, int extent) {
  return std::min(int(u * extent), extent - 1);
}

}  // namespace

SurfaceSamples sample_surface(const TemplateBody& body, int count,
                              std::uint64_t seed) {
  require(count >= 1, "sample_surface: count must be >= 1");
  const FaceTables tables = face_area_tables(body);
  Rng rng(seed);
  SurfaceSamples out = alloc_samples(body, count);
  for (int i = 0; i < count; ++i) {
    const double strat_u = (double(i) + rng.uniform()) / double(count);
    write_sample(body, draw_sample(tables, strat_u, rng), i, out);
  }
  return out;
}

SurfaceSamples sample_surface_for_uv(const TemplateBody& body, int count,
                                     std::uint64_t seed, int uv_width,
                                     int uv_height) {
  require(count >= 1, "sample_surface_for_uv: count must be >= 1");
  require(uv_width > 0 && uv_height > 0,
          "sample_surface_for_uv: resolution must be positive");
  require(count <= uv_width * uv_height,
          "sample_surface_for_uv: more samples than UV pixels");
  const FaceTables tables = face_area_tables(body);
  Rng rng(seed);
  SurfaceSamples out = alloc_samples(body, count);
  std::vector<std::uint8_t> occupied(std::size_t(uv_width) * uv_height, 0);

  for (int i = 0; i < count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 100000 && !placed; ++attempt) {
      // First try keeps the stratified draw; retries re-draw face and
      // barycentrics so that saturated UV charts cannot deadlock.
      const double strat_u = attempt == 0
                                 ? (double(i) + rng.uniform()) / double(count)
                                 : rng.uniform();
      const DrawnSample d = draw_sample(tables, strat_u, rng);
      Vec2<double> uv = Vec2<double>::Zero();
      const auto& tri = body.faces[d.face];
      for (int k = 0; k < 3; ++k)
        uv += d.bary[k] * body.uv.row(tri[k]).transpose();
      const int px = uv_pixel(uv.x(), uv_width);
      const int py = uv_pixel(uv.y(), uv_height);
      const std::size_t cell = std::size_t(py) * uv_width + px;
      if (occupied[cell]) continue;
      occupied[cell] = 1;
      write_sample(body, d, i, out);
      placed = true;
    }
    if (!placed)
      throw ValidationError(
          "sample_surface_for_uv: could not find a free UV pixel for sample " +
          std::to_string(i) + "; UV resolution too small for sample count");
  }
  return out;
}

UVPositionMap uv_position_map(const SurfaceSamples& samples,
                              const MatX<double>& positions, int width,
                              int height) {
  require(width > 0 && height > 0, "uv_position_map: bad resolution");
  require(positions.rows() == samples.positions.rows() &&
              positions.cols() == 3,
          "uv_position_map: positions shape mismatch");
  UVPositionMap map;
  map.width = width;
  map.height = height;
  map.positions.assign(std::size_t(width) * height * 3, 0.0);
  map.valid.assign(std::size_t(width) * height, 0);
  map.sample_index.assign(std::size_t(width) * height, -1);
  for (int i = 0; i < samples.count(); ++i) {
    const int px = uv_pixel(samples.uv(i, 0), width);
    const int py = uv_pixel(samples.uv(i, 1), height);
    const std::size_t cell = std::size_t(py) * width + px;
    if (map.valid[cell])
      throw ValidationError("uv_position_map: samples " +
                            std::to_string(map.sample_index[cell]) + " and " +
                            std::to_string(i) + " collide at pixel (" +
                            std::to_string(px) + "," + std::to_string(py) +
                            ")");
    map.valid[cell] = 1;
    map.sample_index[cell] = i;
    for (int c = 0; c < 3; ++c) map.positions[cell * 3 + c] = positions(i, c);
  }
  map.valid_count = samples.count();
  return map;
}

MatX<double> shaped_sample_positions(const TemplateBody& body,
                                     const SurfaceSamples& samples,
                                     const VecX<double>& beta) {
  require(int(beta.size()) == body.shape_dim(),
          "shaped_sample_positions: beta dimension mismatch");
  MatX<double> pos = samples.positions;
  for (int b = 0; b < body.shape_dim(); ++b) {
    const auto& basis = body.shape_vertex_basis[b];
    for (int i = 0; i < samples.count(); ++i) {
      const auto& tri = body.faces[samples.face_ids[i]];
      for (int k = 0; k < 3; ++k)
        pos.row(i) += beta[b] * samples.bary(i, k) * basis.row(tri[k]);
    }
  }
  return pos;
}

}  // namespace osplat
