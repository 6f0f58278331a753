#include <doctest.h>

#include <random>

#include "fetomosaic/costs.hpp"
#include "support.hpp"

using namespace fetomosaic;

namespace {

PyramidLevel level_of(const Image& img) {
  return build_pyramid(img, full_mask(static_cast<int>(img.cols()), static_cast<int>(img.rows())), 1)
      .levels[0];
}

Image ramp(int size, double ax, double ay) {
  Image img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) img(y, x) = 0.01 * (ax * x + ay * y);
  return img;
}

}  // namespace

TEST_SUITE("costs") {

TEST_CASE("orientation cost examples") {
  const PyramidLevel a = level_of(testsupport::smooth_image(64, 64, 1));
  const PyramidLevel neg = level_of(-testsupport::smooth_image(64, 64, 1));
  CHECK(orientation_cost(a.gradients, a.gradients, WarpParams::identity()).cost < 1e-20);
  CHECK(orientation_cost(a.gradients, neg.gradients, WarpParams::identity()).cost <
        1e-20);

  const PyramidLevel vx = level_of(ramp(32, 1, 0));
  const PyramidLevel hy = level_of(ramp(32, 0, 1));
  CHECK(orientation_cost(vx.gradients, hy.gradients, WarpParams::identity()).cost ==
        doctest::Approx(1.0));
}

TEST_CASE("correlation cost examples") {
  const PyramidLevel a = level_of(testsupport::smooth_image(64, 64, 2));
  const PyramidLevel neg = level_of(-testsupport::smooth_image(64, 64, 2));
  CHECK(correlation_cost(a.gradients, a.gradients, WarpParams::identity()).cost ==
        doctest::Approx(-1.0));
  CHECK(correlation_cost(a.gradients, neg.gradients, WarpParams::identity()).cost ==
        doctest::Approx(1.0));
  const PyramidLevel vx = level_of(ramp(32, 1, 0));
  const PyramidLevel hy = level_of(ramp(32, 0, 1));
  CHECK(std::abs(correlation_cost(vx.gradients, hy.gradients, WarpParams::identity()).cost) <
        1e-12);
}

TEST_CASE("ncc examples") {
  const Image img = testsupport::smooth_image(64, 64, 3);
  const Mask m = full_mask(64, 64);
  CHECK(ncc_cost(img, m, img, m, WarpParams::identity()).cost == doctest::Approx(-1.0));
  CHECK(ncc_cost(img, m, 0.5 * img + 0.2, m, WarpParams::identity()).cost ==
        doctest::Approx(-1.0));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  Image n1(64, 64), n2(64, 64);
  for (int k = 0; k < 64 * 64; ++k) {
    n1(k) = u(rng);
    n2(k) = u(rng);
  }
  CHECK(std::abs(ncc_cost(n1, m, n2, m, WarpParams::identity()).cost) < 0.1);

  const Image flat = Image::Constant(64, 64, 0.3);
  CHECK_THROWS_AS(ncc_cost(flat, m, img, m, WarpParams::identity()), Error);
}

TEST_CASE("insufficient overlap") {
  const PyramidLevel a = level_of(testsupport::smooth_image(64, 64, 4));
  try {
    orientation_cost(a.gradients, a.gradients, WarpParams::translation(60, 0));
    FAIL("expected InsufficientOverlap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientOverlap);
  }
}

TEST_CASE("objective names round trip") {
  for (auto o : {Objective::SinSqOrientation, Objective::CosCorrelation, Objective::NCC}) {
    CHECK(objective_from_string(to_string(o)) == o);
  }
  CHECK_THROWS_AS(objective_from_string("mutual_information"), Error);
}

TEST_CASE("linearization agrees with the cost") {
  const PyramidLevel f = level_of(testsupport::smooth_image(64, 64, 5));
  const PyramidLevel m = level_of(testsupport::smooth_image(64, 64, 6));
  const WarpParams w = WarpParams::affine(1.01, 0.02, 1.3, -0.01, 0.99, -0.7);
  for (auto o : {Objective::SinSqOrientation, Objective::CosCorrelation, Objective::NCC}) {
    const Linearization lin = linearize(f, m, w, o);
    const CostValue c = objective_cost(f, m, w, o);
    CHECK(lin.cost == doctest::Approx(c.cost).epsilon(1e-12));
    CHECK(lin.n_valid == c.n_valid);
    CHECK(static_cast<Eigen::Index>(lin.pixels.size()) == lin.n_valid);
  }
  // sin^2 cost is the mean squared residual.
  const Linearization s = linearize(f, m, w, Objective::SinSqOrientation);
  CHECK(s.residuals.squaredNorm() / s.n_valid == doctest::Approx(s.cost).epsilon(1e-12));
}

TEST_CASE("analytic Jacobian matches finite differences") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 3; ++trial) {
    const PyramidLevel f = level_of(testsupport::smooth_image(64, 64, 100 + trial));
    const PyramidLevel m = level_of(testsupport::smooth_image(64, 64, 200 + trial));
    const WarpParams w = testsupport::random_affine(rng, 0.02, 1.5);
    for (auto o : {Objective::SinSqOrientation, Objective::CosCorrelation, Objective::NCC}) {
      const auto c = testsupport::check_jacobian(f, m, w, o);
      CHECK(c.compared > 1000);
      CHECK(c.skipped < c.compared / 100);
      CHECK(c.worst_relative < 1e-3);
    }
  }
}

TEST_CASE("homography Jacobian matches finite differences") {
  const PyramidLevel f = level_of(testsupport::smooth_image(64, 64, 31));
  const PyramidLevel m = level_of(testsupport::smooth_image(64, 64, 32));
  WarpParams::Params p;
  p << 1.01, 0.01, 0.8, -0.02, 0.98, -1.1, 2e-4, -1e-4;
  const WarpParams w(p, WarpKind::Homography);
  const auto c = testsupport::check_jacobian(f, m, w, Objective::SinSqOrientation);
  CHECK(c.compared > 1000);
  CHECK(c.worst_relative < 1e-3);
}

}  // TEST_SUITE
