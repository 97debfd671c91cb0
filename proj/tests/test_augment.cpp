#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "osplat/augment.hpp"
#include "osplat/losses.hpp"
#include "testutil.hpp"

using namespace osplat;

namespace {

// smooth periodic texture, analytically shiftable by fractional pixels
float pattern(double x, double y) {
  return float(0.5 + 0.22 * std::sin(2.0 * M_PI * x / 16.0) +
               0.18 * std::cos(2.0 * M_PI * y / 12.0) +
               0.08 * std::sin(2.0 * M_PI * (x + y) / 9.0));
}

Imagef pattern_image(int w, int h, double shift_x) {
  Imagef img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = pattern(x - shift_x + 3.7 * c, y + 1.3 * c);
  return img;
}

float median(std::vector<float> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("upsample_resize runs the 576 -> 2304 -> 1080 chain") {
  Imagef frame(576, 576);
  for (int y = 0; y < 576; ++y)
    for (int x = 0; x < 576; ++x)
      for (int c = 0; c < 3; ++c) frame.at(y, x, c) = pattern(x * 0.5, y * 0.5);
  const auto out = upsample_resize<float>(frame, 4, 1080, 1080);
  CHECK(out.width == 1080);
  CHECK(out.height == 1080);
  for (const auto v : out.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("constant frames stay constant through the resize chain") {
  Imagef frame(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      frame.at(y, x, 0) = 0.3f;
      frame.at(y, x, 1) = 0.6f;
      frame.at(y, x, 2) = 0.9f;
    }
  const auto out = upsample_resize<float>(frame, 4, 48, 48);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) {
      CHECK(std::abs(out.at(y, x, 0) - 0.3f) < 1e-6f);
      CHECK(std::abs(out.at(y, x, 1) - 0.6f) < 1e-6f);
      CHECK(std::abs(out.at(y, x, 2) - 0.9f) < 1e-6f);
    }
}

TEST_CASE("up-then-down round trip stays close on smooth images") {
  const auto img = pattern_image(64, 64, 0.0);
  const auto up = upsample_resize<float>(img, 4, 256, 256);
  const auto back = resize_bicubic<float>(up, 64, 64);
  double mae = 0.0;
  for (std::size_t i = 0; i < img.data.size(); ++i)
    mae += std::abs(double(img.data[i]) - back.data[i]);
  mae /= double(img.data.size());
  CHECK(mae < 0.02);
}

TEST_CASE("upsample_resize rejects non-square frames") {
  Imagef rect(64, 32);
  CHECK_THROWS_AS(upsample_resize<float>(rect, 4, 64, 64), ValidationError);
}

TEST_CASE("zero motion gives zero flow") {
  const auto img = pattern_image(48, 48, 0.0);
  const auto [fwd, bwd] = estimate_flow<float>(img, img);
  for (std::size_t i = 0; i < fwd.u.size(); ++i) {
    CHECK(std::abs(fwd.u[i]) < 1e-6f);
    CHECK(std::abs(fwd.v[i]) < 1e-6f);
    CHECK(std::abs(bwd.u[i]) < 1e-6f);
  }
}

TEST_CASE("flow recovers a known 3px translation") {
  const auto f0 = pattern_image(64, 64, 0.0);
  const auto f1 = pattern_image(64, 64, 3.0);
  const auto [fwd, bwd] = estimate_flow<float>(f0, f1);

  // judge the interior, away from the clamped borders
  std::vector<float> us, vs, consistency;
  for (int y = 8; y < 56; ++y)
    for (int x = 8; x < 56; ++x) {
      const std::size_t i = std::size_t(y) * 64 + x;
      us.push_back(fwd.u[i]);
      vs.push_back(fwd.v[i]);
      consistency.push_back(std::abs(fwd.u[i] + bwd.u[i]) +
                            std::abs(fwd.v[i] + bwd.v[i]));
    }
  CHECK(std::abs(median(us) - 3.0f) < 0.5f);
  CHECK(std::abs(median(vs)) < 0.5f);
  CHECK(median(consistency) < 0.5f);

  Imagef other(32, 48);
  CHECK_THROWS_AS(estimate_flow<float>(f0, other), ValidationError);
}

TEST_CASE("interpolating identical frames is exact") {
  const auto img = pattern_image(48, 48, 0.0);
  const auto [fwd, bwd] = estimate_flow<float>(img, img);
  const auto mid = interpolate_frame<float>(img, img, 0.5f, fwd, bwd);
  CHECK(mid.data == img.data);
}

TEST_CASE("t=0.5 interpolation of a rigid translation hits the true frame") {
  const auto f0 = pattern_image(64, 64, 0.0);
  const auto f1 = pattern_image(64, 64, 3.0);
  const auto truth = pattern_image(64, 64, 1.5);
  const auto [fwd, bwd] = estimate_flow<float>(f0, f1);
  const auto mid = interpolate_frame<float>(f0, f1, 0.5f, fwd, bwd);

  Imagef mid_crop(48, 48), truth_crop(48, 48);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x)
      for (int c = 0; c < 3; ++c) {
        mid_crop.at(y, x, c) = mid.at(y + 8, x + 8, c);
        truth_crop.at(y, x, c) = truth.at(y + 8, x + 8, c);
      }
  CHECK(psnr<float>(mid_crop, truth_crop) > 30.0f);
}

TEST_CASE("interpolation converges to f0 as t approaches 0") {
  const auto f0 = pattern_image(64, 64, 0.0);
  const auto f1 = pattern_image(64, 64, 3.0);
  const auto [fwd, bwd] = estimate_flow<float>(f0, f1);
  const auto near0 = interpolate_frame<float>(f0, f1, 0.01f, fwd, bwd);
  double mad = 0.0;
  for (std::size_t i = 0; i < f0.data.size(); ++i)
    mad += std::abs(double(near0.data[i]) - f0.data[i]);
  mad /= double(f0.data.size());
  CHECK(mad < 0.01);

  CHECK_THROWS_AS(interpolate_frame<float>(f0, f1, 0.0f, fwd, bwd),
                  ValidationError);
  CHECK_THROWS_AS(interpolate_frame<float>(f0, f1, 1.0f, fwd, bwd),
                  ValidationError);
}

TEST_CASE("frame count law: n + 3(n-1)") {
  AugmentConfig cfg;
  cfg.sr_factor = 2;
  cfg.target_width = 32;
  cfg.target_height = 32;

  VideoSequence two;
  two.frames = {pattern_image(32, 32, 0.0), pattern_image(32, 32, 2.0)};
  CHECK(augment_video<float>(two, cfg).count() == 5);

  VideoSequence many;
  for (int i = 0; i < 6; ++i) many.frames.push_back(pattern_image(32, 32, i));
  CHECK(augment_video<float>(many, cfg).count() == 6 + 3 * 5);

  VideoSequence one;
  one.frames = {pattern_image(32, 32, 0.0)};
  CHECK_THROWS_AS(augment_video<float>(one, cfg), ValidationError);
}

TEST_CASE("21-frame orbit expands to 81 frames with originals at stride 4") {
  AugmentConfig cfg;
  cfg.sr_factor = 4;
  cfg.target_width = 32;
  cfg.target_height = 32;
  VideoSequence video;
  for (int i = 0; i < 21; ++i)
    video.frames.push_back(pattern_image(32, 32, 0.6 * i));

  const auto out = augment_video<float>(video, cfg);
  REQUIRE(out.count() == 81);
  for (int i = 0; i < 21; ++i) {
    const auto resized = upsample_resize<float>(video.frames[i], 4, 32, 32);
    CHECK(out.frames[4 * i].data == resized.data);
  }
  for (const auto& f : out.frames)
    for (const auto v : f.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
}

TEST_CASE("augmentation is bitwise deterministic") {
  AugmentConfig cfg;
  cfg.sr_factor = 2;
  cfg.target_width = 24;
  cfg.target_height = 24;
  VideoSequence video;
  for (int i = 0; i < 3; ++i) video.frames.push_back(pattern_image(24, 24, i));
  const auto a = augment_video<float>(video, cfg);
  const auto b = augment_video<float>(video, cfg);
  REQUIRE(a.count() == b.count());
  for (int i = 0; i < a.count(); ++i) CHECK(a.frames[i].data == b.frames[i].data);
}
