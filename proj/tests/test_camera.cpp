#include <doctest.h>

#include <cmath>

#include "osplat/camera.hpp"
#include "testutil.hpp"

using namespace osplat;

TEST_CASE("static orbit spacing is exactly 360/n degrees") {
  const auto poses = make_static_orbit(21, 10.0, 2.7, 33.8, 576, 576);
  REQUIRE(poses.size() == 21);
  const double step = 360.0 / 21.0;
  double gap_sum = 0.0;
  for (int k = 0; k < 21; ++k) {
    CHECK(poses[k].azimuth == doctest::Approx(k * step).epsilon(1e-12));
    CHECK(poses[k].elevation == 10.0);
    const double next = (k + 1 < 21) ? poses[k + 1].azimuth : 360.0;
    gap_sum += next - poses[k].azimuth;
  }
  CHECK(std::abs(gap_sum - 360.0) < 1e-9);
}

TEST_CASE("four-frame orbit hits the cardinal azimuths") {
  const auto poses = make_static_orbit(4, 0.0, 2.0, 45.0, 64, 64);
  CHECK(poses[0].azimuth == 0.0);
  CHECK(poses[1].azimuth == 90.0);
  CHECK(poses[2].azimuth == 180.0);
  CHECK(poses[3].azimuth == 270.0);
  for (const auto& p : poses) CHECK(p.elevation == 0.0);
}

TEST_CASE("every orbit pose looks at the origin") {
  const auto poses = make_static_orbit(21, 15.0, 2.7, 33.8, 576, 576);
  for (const auto& pose : poses) {
    const auto pr = project<double>(pose, Vec3<double>::Zero());
    REQUIRE(pr.valid);
    CHECK(pr.pixel.x() == doctest::Approx(288.0).epsilon(1e-9));
    CHECK(pr.pixel.y() == doctest::Approx(288.0).epsilon(1e-9));
    CHECK(pr.depth == doctest::Approx(2.7).epsilon(1e-9));
  }
}

TEST_CASE("extrinsic rotation block is orthonormal") {
  for (const auto& pose : make_static_orbit(7, -20.0, 3.0, 50.0, 128, 128)) {
    const Mat3<double> R = pose.extrinsic.topLeftCorner<3, 3>();
    CHECK(((R * R.transpose()) - Mat3<double>::Identity()).norm() < 1e-6);
  }
}

TEST_CASE("focal length follows f = (h/2)/tan(fov/2)") {
  const auto pose = look_at_origin(0, 0, 2.0, 90.0, 100, 100);
  CHECK(pose.intrinsic(0, 0) == doctest::Approx(50.0).epsilon(1e-12));

  // a point offset vertically by exactly depth*tan(45) lands on the frustum
  // edge rows
  const Mat3<double> R = pose.extrinsic.topLeftCorner<3, 3>();
  const Vec3<double> t = pose.extrinsic.topRightCorner<3, 1>();
  const double depth = 1.7;
  const Vec3<double> cam_pt(0.0, depth * std::tan(M_PI / 4.0), depth);
  const Vec3<double> world = R.transpose() * (cam_pt - t);
  const auto pr = project<double>(pose, world);
  REQUIRE(pr.valid);
  CHECK(pr.pixel.y() == doctest::Approx(100.0).epsilon(1e-9));
  const Vec3<double> world_up = R.transpose() * (Vec3<double>(0, -cam_pt.y(), depth) - t);
  CHECK(project<double>(pose, world_up).pixel.y() ==
        doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("project/unproject round trip") {
  const auto pose = look_at_origin(73.0, -12.0, 3.1, 40.0, 320, 240);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Vec3<double> p(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                         rng.uniform(-0.5, 0.5));
    const auto pr = project<double>(pose, p);
    REQUIRE(pr.valid);
    const Vec3<double> back = unproject<double>(pose, pr.pixel, pr.depth);
    CHECK((back - p).norm() < 1e-6);
  }
}

TEST_CASE("projection is scale-consistent") {
  const auto base = look_at_origin(30.0, 5.0, 2.5, 33.8, 200, 200);
  const auto twice = look_at_origin(30.0, 5.0, 2.5, 33.8, 400, 400);
  // doubling the pixel dimensions doubles the focal length here
  CHECK(twice.intrinsic(0, 0) == doctest::Approx(2.0 * base.intrinsic(0, 0)));
  const Vec3<double> p(0.2, -0.1, 0.05);
  const auto a = project<double>(base, p);
  const auto b = project<double>(twice, p);
  CHECK(b.pixel.x() - 200.0 == doctest::Approx(2.0 * (a.pixel.x() - 100.0)).epsilon(1e-6));
  CHECK(b.pixel.y() - 200.0 == doctest::Approx(2.0 * (a.pixel.y() - 100.0)).epsilon(1e-6));
}

TEST_CASE("extrinsics preserve world distances") {
  const auto pose = look_at_origin(120.0, 25.0, 2.0, 45.0, 64, 64);
  const Mat3<double> R = pose.extrinsic.topLeftCorner<3, 3>();
  const Vec3<double> t = pose.extrinsic.topRightCorner<3, 1>();
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const Vec3<double> a(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Vec3<double> b(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double w = (a - b).norm();
    const double c = ((R * a + t) - (R * b + t)).norm();
    CHECK(std::abs(w - c) < 1e-9);
  }
}

TEST_CASE("behind-camera points are flagged") {
  const auto pose = look_at_origin(0, 0, 2.0, 40.0, 64, 64);
  // the camera sits at +z looking toward the origin; a point behind it
  const auto pr = project<double>(pose, Vec3<double>(0, 0, 5.0));
  CHECK_FALSE(pr.valid);
}

TEST_CASE("orbit argument validation") {
  CHECK_THROWS_AS(make_static_orbit(1, 0, 2.0, 33.8, 64, 64), ValidationError);
  CHECK_THROWS_AS(make_static_orbit(21, 0, 0.0, 33.8, 64, 64), ValidationError);
  CHECK_THROWS_AS(make_static_orbit(21, 0, -1.0, 33.8, 64, 64), ValidationError);
  CHECK_THROWS_AS(look_at_origin(0, 0, 2.0, 0.0, 64, 64), ValidationError);
  CHECK_THROWS_AS(look_at_origin(0, 0, 2.0, 180.0, 64, 64), ValidationError);
}

TEST_CASE("orbit file round trip") {
  const auto dir = testing::scratch_dir("orbit_io");
  const auto poses = make_static_orbit(5, 12.0, 2.7, 33.8, 576, 576);
  save_orbit(poses, dir + "/orbit.txt");
  const auto back = load_orbit(dir + "/orbit.txt");
  REQUIRE(back.size() == poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CHECK((back[i].extrinsic - poses[i].extrinsic).norm() < 1e-15);
    CHECK(back[i].azimuth == poses[i].azimuth);
    CHECK(back[i].fov == poses[i].fov);
    CHECK((back[i].intrinsic - poses[i].intrinsic).norm() < 1e-12);
  }
}
