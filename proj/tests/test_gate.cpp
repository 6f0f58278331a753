#include <doctest.h>

#include <random>

#include "fetomosaic/gate.hpp"
#include "fetomosaic/register.hpp"
#include "support.hpp"

using namespace fetomosaic;

namespace {

const ColorImage& canvas() {
  static const ColorImage c = generate_canvas(SceneSpec{});
  return c;
}

Frame noise_frame(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Image img(size, size);
  for (Eigen::Index k = 0; k < img.size(); ++k) img(k) = u(rng);
  return testsupport::frame_from_gray(img);
}

}  // namespace

TEST_SUITE("gate") {

TEST_CASE("self registration is accepted") {
  const Frame f = render_frame(canvas(), WarpParams::translation(200, 220), 128, 128, 0,
                               default_fov_mask(128, 128));
  const Pyramid p = build_pyramid(f);
  const RegistrationResult r = register_pair(p, p, RegistrationConfig{});
  const GateVerdict v = gate_registration(r, p, p, RefGrid(128, 128), GateConfig{});
  CHECK(v.accepted);
  CHECK(v.reason == GateReason::Ok);
  CHECK(v.registration_cost < v.random_cost_quantile_value);
}

TEST_CASE("a full-width translation is too far from the identity") {
  const Frame f = render_frame(canvas(), WarpParams::translation(200, 220), 128, 128, 0,
                               default_fov_mask(128, 128));
  const Pyramid p = build_pyramid(f);
  RegistrationResult r;
  r.warp = WarpParams::translation(128, 0);
  const GateVerdict v = gate_registration(r, p, p, RefGrid(128, 128), GateConfig{});
  CHECK_FALSE(v.accepted);
  CHECK(v.reason == GateReason::TooFarFromIdentity);
  CHECK(v.identity_distance == doctest::Approx(128.0));
}

TEST_CASE("unrelated white noise is not discriminative") {
  int rejected = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Pyramid a = build_pyramid(noise_frame(64, 1000 + trial));
    const Pyramid b = build_pyramid(noise_frame(64, 2000 + trial));
    GateConfig gate;
    gate.rng_seed = trial;
    GateVerdict v = failed_verdict();
    try {
      const RegistrationResult r = register_pair(a, b, RegistrationConfig{});
      v = gate_registration(r, a, b, RefGrid(64, 64), gate);
    } catch (const Error&) {
    }
    rejected += !v.accepted && v.reason == GateReason::CostNotDiscriminative;
  }
  CHECK(rejected >= 18);
}

TEST_CASE("deterministic under a fixed seed") {
  GateConfig cfg;
  cfg.rng_seed = 42;
  const auto a = sample_random_warps(cfg);
  const auto b = sample_random_warps(cfg);
  REQUIRE(a.size() == 30);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].params() == b[k].params());
  cfg.rng_seed = 43;
  CHECK(sample_random_warps(cfg)[0].params() != a[0].params());
}

TEST_CASE("random warps follow the configured spread") {
  GateConfig cfg;
  cfg.num_random_warps = 4000;
  const auto ws = sample_random_warps(cfg);
  double t2 = 0, l2 = 0;
  for (const auto& w : ws) {
    CHECK(w.is_affine());
    t2 += w[2] * w[2] + w[5] * w[5];
    l2 += (w[0] - 1) * (w[0] - 1) + w[1] * w[1] + w[3] * w[3] + (w[4] - 1) * (w[4] - 1);
  }
  CHECK(std::sqrt(t2 / (2 * ws.size())) == doctest::Approx(5.0).epsilon(0.05));
  CHECK(std::sqrt(l2 / (4 * ws.size())) == doctest::Approx(0.02).epsilon(0.05));
}

TEST_CASE("empirical quantile interpolates") {
  CHECK(empirical_quantile({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
  CHECK(empirical_quantile({4, 1, 3, 2}, 0.0) == doctest::Approx(1.0));
  CHECK(empirical_quantile({10, 20}, 0.25) == doctest::Approx(12.5));
}

TEST_CASE("a stricter quantile never adds acceptances") {
  const RefGrid grid(128, 128);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-6, 6);
  for (int trial = 0; trial < 6; ++trial) {
    const auto pair = testsupport::render_pair(
        canvas(), WarpParams::translation(200, 200),
        WarpParams::translation(u(rng), u(rng)), 128, default_fov_mask(128, 128));
    const Pyramid a = build_pyramid(pair.fixed);
    const Pyramid b = build_pyramid(pair.moving);
    RegistrationResult r;
    r.warp = trial % 2 ? pair.truth : WarpParams::identity();
    bool previous = true;
    for (double q : {0.45, 0.3, 0.1, 0.05, 0.01}) {
      GateConfig cfg;
      cfg.cost_quantile = q;
      const bool acc = gate_registration(r, a, b, grid, cfg).accepted;
      CHECK((previous || !acc));
      previous = acc;
    }
  }
}

TEST_CASE("frames from disjoint parts of the canvas are rejected") {
  const Mask fov = default_fov_mask(128, 128);
  int rejected = 0;
  for (int k = 0; k < 10; ++k) {
    const Frame a = render_frame(canvas(), WarpParams::translation(30 + 5 * k, 40), 128, 128, 0, fov);
    const Frame b = render_frame(canvas(), WarpParams::translation(330, 300 - 7 * k), 128, 128, 1, fov);
    const Pyramid pa = build_pyramid(a);
    const Pyramid pb = build_pyramid(b);
    GateConfig gate;
    gate.rng_seed = k;
    try {
      rejected += !gate_registration(register_pair(pa, pb, RegistrationConfig{}), pa, pb,
                                     RefGrid(128, 128), gate)
                       .accepted;
    } catch (const Error&) {
      ++rejected;
    }
  }
  CHECK(rejected >= 9);
}

TEST_CASE("the margin scales the quantile") {
  const auto pair = testsupport::render_pair(canvas(), WarpParams::translation(210, 190),
                                             WarpParams::translation(2.5, -1.0), 128,
                                             default_fov_mask(128, 128));
  const Pyramid a = build_pyramid(pair.fixed);
  const Pyramid b = build_pyramid(pair.moving);
  RegistrationResult r;
  r.warp = pair.truth;
  GateConfig cfg;
  cfg.cost_margin = 0.0;
  const GateVerdict bare = gate_registration(r, a, b, RefGrid(128, 128), cfg);
  REQUIRE(bare.accepted);
  // A margin just above the observed ratio turns the acceptance around.
  cfg.cost_margin = 1.0 - bare.registration_cost / bare.random_cost_quantile_value + 1e-3;
  const GateVerdict strict = gate_registration(r, a, b, RefGrid(128, 128), cfg);
  CHECK_FALSE(strict.accepted);
  CHECK(strict.reason == GateReason::CostNotDiscriminative);
  CHECK(strict.random_cost_quantile_value == bare.random_cost_quantile_value);
}

TEST_CASE("configuration validation") {
  GateConfig cfg;
  cfg.cost_margin = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = GateConfig{};
  cfg.cost_quantile = 0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = GateConfig{};
  cfg.num_random_warps = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = GateConfig{};
  CHECK(cfg.identity_threshold(128) == doctest::Approx(0.35 * 128));
  cfg.max_identity_distance = 10.0;
  CHECK(cfg.identity_threshold(128) == 10.0);
}

TEST_CASE("reason names round trip") {
  for (auto r : {GateReason::Ok, GateReason::TooFarFromIdentity, GateReason::CostNotDiscriminative,
                 GateReason::RegistrationFailed}) {
    CHECK(gate_reason_from_string(to_string(r)) == r);
  }
}

}  // TEST_SUITE
