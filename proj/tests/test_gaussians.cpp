#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "osplat/gaussians.hpp"
#include "testutil.hpp"

using namespace osplat;

namespace {

struct Pipeline {
  TemplateBody body = make_capsule_person();
  std::vector<int> topo;
  SurfaceSamples samples;
  UVPositionMap posmap;
  double base_scale;

  explicit Pipeline(int count = 256, int res = 32) {
    normalize_body(body);
    topo = body.topological_order();
    samples = sample_surface_for_uv(body, count, 11, res, res);
    posmap = uv_position_map(samples, samples.positions, res, res);
    base_scale = mean_nn_distance(samples.positions);
  }
};

}  // namespace

TEST_CASE("feature tensor init: deterministic, near-zero mean, full count") {
  const auto a = init_feature_tensor<float>(128, 128, 32, 9);
  const auto b = init_feature_tensor<float>(128, 128, 32, 9);
  CHECK(a.values == b.values);
  CHECK(a.values.size() == 524288);

  double mean = 0.0;
  for (const auto v : a.values) mean += v;
  mean /= double(a.values.size());
  CHECK(std::abs(mean) < 3.0 * 0.01 / std::sqrt(524288.0));

  const auto c = init_feature_tensor<float>(128, 128, 32, 10);
  CHECK(c.values != a.values);
  CHECK_THROWS_AS(init_feature_tensor<float>(0, 4, 4, 1), ValidationError);
}

TEST_CASE("zero network decodes to zeros, one row per valid pixel") {
  Pipeline p;
  const auto features = init_feature_tensor<double>(32, 32, 8, 3);
  const auto net = DecoderNetT<double>::zeros({8 + 3, 16, 7});
  const auto decoded = decode<double>(features, p.posmap, net);
  CHECK(decoded.count() == p.posmap.valid_count);
  CHECK(decoded.count() == 256);
  CHECK(decoded.offsets.norm() == 0.0);
  CHECK(decoded.colors_raw.norm() == 0.0);
  CHECK(decoded.scales_raw.norm() == 0.0);
}

TEST_CASE("decode validates widths and resolutions") {
  Pipeline p;
  const auto features = init_feature_tensor<double>(32, 32, 8, 3);
  CHECK_THROWS_AS(
      decode<double>(features, p.posmap, DecoderNetT<double>::zeros({10, 7})),
      ValidationError);
  CHECK_THROWS_AS(
      decode<double>(features, p.posmap, DecoderNetT<double>::zeros({11, 6})),
      ValidationError);
  const auto small = init_feature_tensor<double>(16, 32, 8, 3);
  CHECK_THROWS_AS(
      decode<double>(small, p.posmap, DecoderNetT<double>::zeros({11, 7})),
      ValidationError);
}

TEST_CASE("single-layer decode on a one-pixel map matches hand arithmetic") {
  SurfaceSamples s;
  s.positions.resize(1, 3);
  s.positions << 0.25, -0.5, 0.125;
  s.uv.resize(1, 2);
  s.uv << 0.5, 0.5;
  s.skin_weights = MatX<double>::Ones(1, 1);
  s.face_ids = {0};
  s.bary = MatX<double>::Zero(1, 3);
  const auto posmap = uv_position_map(s, s.positions, 4, 4);

  FeatureTensorT<double> features(4, 4, 2);
  features.at(2, 2, 0) = 0.5;
  features.at(2, 2, 1) = -1.0;

  // single linear layer: out_k = sum_i W(k,i) in_i + b_k
  auto net = DecoderNetT<double>::zeros({5, 7});
  for (int k = 0; k < 7; ++k)
    for (int i = 0; i < 5; ++i) net.weights[0](k, i) = 0.1 * (k + 1) - 0.05 * i;
  for (int k = 0; k < 7; ++k) net.biases[0][k] = 0.01 * k;

  const auto decoded = decode<double>(features, posmap, net);
  const double in[5] = {0.5, -1.0, 0.25, -0.5, 0.125};
  for (int k = 0; k < 7; ++k) {
    double want = 0.01 * k;
    for (int i = 0; i < 5; ++i) want += (0.1 * (k + 1) - 0.05 * i) * in[i];
    const double got = k < 3 ? decoded.offsets(0, k)
                             : (k < 6 ? decoded.colors_raw(0, k - 3)
                                      : decoded.scales_raw[0]);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("assemble: zero decode puts gray splats on the surface") {
  Pipeline p;
  DecodedParamsT<double> decoded;
  decoded.offsets = MatX<double>::Zero(p.samples.count(), 3);
  decoded.colors_raw = MatX<double>::Zero(p.samples.count(), 3);
  decoded.scales_raw = VecX<double>::Zero(p.samples.count());

  const auto g = assemble<double>(p.samples.positions, decoded, p.base_scale);
  g.validate();
  CHECK((g.centers - p.samples.positions).norm() == 0.0);
  CHECK((g.colors.array() - 0.5).abs().maxCoeff() == 0.0);
  CHECK((g.scales.array() - p.base_scale).abs().maxCoeff() < 1e-15);
  CHECK(g.opacities.minCoeff() == 1.0);
  for (int i = 0; i < g.count(); ++i)
    CHECK((g.rotations.row(i) - Eigen::RowVector4d(1, 0, 0, 0)).norm() == 0.0);
}

TEST_CASE("assemble: raw scale ln(2) doubles the base scale") {
  Pipeline p(16, 8);
  DecodedParamsT<double> decoded;
  decoded.offsets = MatX<double>::Zero(16, 3);
  decoded.colors_raw = MatX<double>::Zero(16, 3);
  decoded.scales_raw = VecX<double>::Zero(16);
  decoded.scales_raw[5] = std::log(2.0);
  const auto g = assemble<double>(p.samples.positions, decoded, p.base_scale);
  CHECK(g.scales(5, 0) == doctest::Approx(2.0 * p.base_scale).epsilon(1e-12));
  CHECK(g.scales(5, 1) == g.scales(5, 0));
}

TEST_CASE("assemble invariants hold for random decoder outputs") {
  Pipeline p(64, 16);
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    DecodedParamsT<double> decoded;
    decoded.offsets.resize(64, 3);
    decoded.colors_raw.resize(64, 3);
    decoded.scales_raw.resize(64);
    for (int i = 0; i < 64; ++i) {
      for (int c = 0; c < 3; ++c) {
        decoded.offsets(i, c) = rng.normal() * 10.0;
        decoded.colors_raw(i, c) = rng.normal() * 10.0;
      }
      decoded.scales_raw[i] = rng.normal() * 3.0;
    }
    const auto g = assemble<double>(p.samples.positions, decoded, p.base_scale);
    CHECK_NOTHROW(g.validate());
  }
}

TEST_CASE("decode + assemble gradients match finite differences at fp64") {
  Pipeline p(12, 8);
  auto features = init_feature_tensor<double>(8, 8, 4, 5);
  auto net = DecoderNetT<double>::glorot({4 + 3, 6, 7}, 6);
  const double base = p.base_scale;

  // random linear functional over every assembled field
  Rng rng(99);
  MatX<double> gc(12, 3), gcol(12, 3), gs(12, 3);
  for (int i = 0; i < 12; ++i)
    for (int c = 0; c < 3; ++c) {
      gc(i, c) = rng.uniform(-1, 1);
      gcol(i, c) = rng.uniform(-1, 1);
      gs(i, c) = rng.uniform(-1, 1);
    }

  auto loss = [&] {
    const auto decoded = decode<double>(features, p.posmap, net);
    const auto g = assemble<double>(p.samples.positions, decoded, base);
    return (g.centers.array() * gc.array()).sum() +
           (g.colors.array() * gcol.array()).sum() +
           (g.scales.array() * gs.array()).sum();
  };

  DecodeContext<double> ctx;
  const auto decoded = decode<double>(features, p.posmap, net, &ctx);
  const auto assembled = assemble<double>(p.samples.positions, decoded, base);
  const auto d_decoded =
      assemble_backward<double>(assembled, decoded, base, gc, gcol, gs);
  const auto grads =
      decode_backward<double>(features, p.posmap, net, ctx, d_decoded);

  int checked = 0;
  for (int y = 0; y < 8 && checked < 30; ++y)
    for (int x = 0; x < 8 && checked < 30; ++x)
      for (int c = 0; c < 4 && checked < 30; ++c) {
        if (p.posmap.sample_index[std::size_t(y) * 8 + x] < 0) continue;
        const double fd = osplat::testing::central_diff(
            loss, &features.at(y, x, c), 1e-6);
        CHECK(osplat::testing::rel_err(grads.d_features.at(y, x, c), fd) <
              1e-4);
        ++checked;
      }
  CHECK(checked == 30);

  for (int l = 0; l < net.layer_count(); ++l) {
    for (int k = 0; k < 10; ++k) {
      auto& w = net.weights[l];
      const auto idx = Eigen::Index(k * 7 % w.size());
      const double fd =
          osplat::testing::central_diff(loss, &w.data()[idx], 1e-6);
      CHECK(osplat::testing::rel_err(grads.d_weights[l].data()[idx], fd) < 1e-4);
    }
    const double fdb = osplat::testing::central_diff(
        loss, &net.biases[l][net.biases[l].size() / 2], 1e-6);
    CHECK(osplat::testing::rel_err(
              grads.d_biases[l][net.biases[l].size() / 2], fdb) < 1e-4);
  }
}

TEST_CASE("repose: identity pose and zero corrections are a no-op") {
  Pipeline p(64, 16);
  DecodedParamsT<double> decoded;
  decoded.offsets = MatX<double>::Zero(64, 3);
  decoded.colors_raw = MatX<double>::Zero(64, 3);
  decoded.scales_raw = VecX<double>::Zero(64);
  const auto g = assemble<double>(p.samples.positions, decoded, p.base_scale);

  const auto state = BodyStateT<double>::rest(24, 0);
  const auto posed = repose<double>(g, p.samples.skin_weights, p.body.joints,
                                    p.body.parents, p.topo, state);
  CHECK((posed.centers - g.centers).norm() == 0.0);
  CHECK((posed.rotations - g.rotations).norm() == 0.0);
  CHECK((posed.colors - g.colors).norm() == 0.0);
  CHECK((posed.scales - g.scales).norm() == 0.0);
}

TEST_CASE("repose: root rotation is rigid and rotates splat frames") {
  Pipeline p(64, 16);
  DecodedParamsT<double> decoded;
  decoded.offsets = MatX<double>::Zero(64, 3);
  decoded.colors_raw = MatX<double>::Zero(64, 3);
  decoded.scales_raw = VecX<double>::Zero(64);
  const auto g = assemble<double>(p.samples.positions, decoded, p.base_scale);

  auto state = BodyStateT<double>::rest(24, 0);
  state.theta.row(0) << 0.2, 0.9, -0.4;
  const auto posed = repose<double>(g, p.samples.skin_weights, p.body.joints,
                                    p.body.parents, p.topo, state);

  for (int i = 0; i + 1 < 64; i += 5) {
    const double before = (g.centers.row(i) - g.centers.row(i + 1)).norm();
    const double after =
        (posed.centers.row(i) - posed.centers.row(i + 1)).norm();
    CHECK(std::abs(before - after) < 1e-9);
  }
  // all splats share the root rotation
  const Vec4<double> expect =
      quat_from_mat3<double>(rodrigues<double>(state.theta.row(0).transpose()));
  for (int i = 0; i < 64; i += 7) {
    const Vec4<double> got = posed.rotations.row(i).transpose();
    CHECK(std::min((got - expect).norm(), (got + expect).norm()) < 1e-9);
  }
}

TEST_CASE("repose: translation correction shifts all centers exactly") {
  Pipeline p(32, 16);
  DecodedParamsT<double> decoded;
  decoded.offsets = MatX<double>::Zero(32, 3);
  decoded.colors_raw = MatX<double>::Zero(32, 3);
  decoded.scales_raw = VecX<double>::Zero(32);
  const auto g = assemble<double>(p.samples.positions, decoded, p.base_scale);

  auto state = BodyStateT<double>::rest(24, 0);
  state.delta_translation << 0, 0, 0.1;
  const auto posed = repose<double>(g, p.samples.skin_weights, p.body.joints,
                                    p.body.parents, p.topo, state);
  for (int i = 0; i < 32; ++i) {
    CHECK(posed.centers(i, 0) == g.centers(i, 0));
    CHECK(posed.centers(i, 1) == g.centers(i, 1));
    CHECK(posed.centers(i, 2) == doctest::Approx(g.centers(i, 2) + 0.1).epsilon(1e-15));
  }
}

TEST_CASE("repose on globally rigid poses is associative") {
  Pipeline p(48, 16);
  DecodedParamsT<double> decoded;
  decoded.offsets = MatX<double>::Zero(48, 3);
  decoded.colors_raw = MatX<double>::Zero(48, 3);
  decoded.scales_raw = VecX<double>::Zero(48);
  const auto g = assemble<double>(p.samples.positions, decoded, p.base_scale);

  const Vec3<double> aa1(0.3, -0.2, 0.5), aa2(-0.1, 0.7, 0.2);
  const Vec3<double> t1(0.05, 0.1, -0.02), t2(-0.03, 0.02, 0.08);
  auto rigid_state = [&](const Vec3<double>& aa, const Vec3<double>& t) {
    auto s = BodyStateT<double>::rest(24, 0);
    s.theta.row(0) = aa.transpose();
    s.translation = t;
    return s;
  };

  const auto once = repose<double>(g, p.samples.skin_weights, p.body.joints,
                                   p.body.parents, p.topo, rigid_state(aa1, t1));
  const auto twice = repose<double>(once, p.samples.skin_weights, p.body.joints,
                                    p.body.parents, p.topo,
                                    rigid_state(aa2, t2));

  // composed rigid transform: R = R2 R1 about the root pivot,
  // translation R2 t1 + t2
  const Mat3<double> R1 = rodrigues<double>(aa1), R2 = rodrigues<double>(aa2);
  const Eigen::AngleAxisd composed(R2 * R1);
  const auto state12 =
      rigid_state(composed.angle() * composed.axis(), R2 * t1 + t2);
  const auto direct = repose<double>(g, p.samples.skin_weights, p.body.joints,
                                     p.body.parents, p.topo, state12);
  CHECK((twice.centers - direct.centers).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("repose_backward matches finite differences for corrections") {
  Pipeline p(10, 8);
  DecodedParamsT<double> decoded;
  decoded.offsets = MatX<double>::Zero(10, 3);
  decoded.colors_raw = MatX<double>::Zero(10, 3);
  decoded.scales_raw = VecX<double>::Zero(10);
  const auto g = assemble<double>(p.samples.positions, decoded, p.base_scale);

  auto state = BodyStateT<double>::rest(24, 0);
  Rng rng(4);
  for (int j = 0; j < 24; ++j)
    for (int c = 0; c < 3; ++c) state.theta(j, c) = rng.uniform(-0.4, 0.4);
  state.translation << 0.1, 0, -0.05;

  MatX<double> grad_out(10, 3);
  for (int i = 0; i < 10; ++i)
    for (int c = 0; c < 3; ++c) grad_out(i, c) = rng.uniform(-1, 1);

  auto loss = [&] {
    const auto posed = repose<double>(g, p.samples.skin_weights, p.body.joints,
                                      p.body.parents, p.topo, state);
    return (posed.centers.array() * grad_out.array()).sum();
  };

  ReposeContext<double> ctx;
  repose<double>(g, p.samples.skin_weights, p.body.joints, p.body.parents,
                 p.topo, state, &ctx);
  const auto grads =
      repose_backward<double>(g, p.samples.skin_weights, p.body.joints,
                              p.body.parents, p.topo, ctx, grad_out);

  for (int j = 0; j < 24; j += 3)
    for (int c = 0; c < 3; ++c) {
      const double fd =
          osplat::testing::central_diff(loss, &state.delta_theta(j, c), 1e-6);
      CHECK(osplat::testing::rel_err(grads.d_delta_theta(j, c), fd) < 1e-5);
    }
  for (int c = 0; c < 3; ++c) {
    const double fd = osplat::testing::central_diff(
        loss, &state.delta_translation[c], 1e-6);
    CHECK(osplat::testing::rel_err(grads.d_delta_translation[c], fd) < 1e-6);
  }
}

TEST_CASE("mean_nn_distance matches brute force") {
  Rng rng(8);
  MatX<double> pts(200, 3);
  for (int i = 0; i < 200; ++i)
    for (int c = 0; c < 3; ++c) pts(i, c) = rng.uniform(-1, 1);
  double brute = 0.0;
  for (int i = 0; i < 200; ++i) {
    double best = 1e30;
    for (int j = 0; j < 200; ++j)
      if (j != i) best = std::min(best, (pts.row(i) - pts.row(j)).norm());
    brute += best;
  }
  brute /= 200.0;
  CHECK(mean_nn_distance(pts) == doctest::Approx(brute).epsilon(1e-12));
}
