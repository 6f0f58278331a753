#include <doctest.h>

#include <random>

#include "fetomosaic/bundle.hpp"
#include "fetomosaic/synth.hpp"
#include "support.hpp"

using namespace fetomosaic;

namespace {

Constraint link(int i, int j, const WarpParams& w, bool accepted = true) {
  Constraint c;
  c.i = i;
  c.j = j;
  c.warp = w;
  c.accepted = accepted;
  if (!accepted) c.reason = GateReason::CostNotDiscriminative;
  return c;
}

PoseGraph graph_of(int n, std::vector<Constraint> cons) {
  PoseGraph g;
  g.num_frames = n;
  g.globals = sequential_chain(n, cons).globals;
  g.constraints = std::move(cons);
  return g;
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

// Random walk of affine globals with W_0 = identity.
std::vector<WarpParams> random_globals(int n, std::mt19937_64& rng) {
  std::vector<WarpParams> g{WarpParams::identity(WarpKind::Affine)};
  for (int i = 1; i < n; ++i) g.push_back(compose(testsupport::random_affine(rng, 0.01, 3.0), g.back()));
  return g;
}

}  // namespace

TEST_SUITE("bundle") {

TEST_CASE("chain of identities") {
  std::vector<Constraint> cons;
  for (int i = 1; i < 6; ++i) cons.push_back(link(i, i - 1, WarpParams::identity()));
  const ChainResult c = sequential_chain(6, cons);
  REQUIRE(c.globals.size() == 6);
  for (const auto& w : c.globals) CHECK(w.params() == WarpParams::identity().params());
  for (bool b : c.bridged) CHECK_FALSE(b);
}

TEST_CASE("chain of unit translations") {
  std::vector<Constraint> cons;
  for (int i = 1; i < 8; ++i) cons.push_back(link(i, i - 1, WarpParams::translation(1, 0)));
  const ChainResult c = sequential_chain(8, cons);
  for (int i = 0; i < 8; ++i) {
    CHECK(c.globals[i][2] == doctest::Approx(i));
    CHECK(c.globals[i][5] == 0.0);
  }
}

TEST_CASE("a rejected link bridges the rest of the chain") {
  std::vector<Constraint> cons;
  for (int i = 1; i < 8; ++i) cons.push_back(link(i, i - 1, WarpParams::translation(1, 0), i != 4));
  const ChainResult c = sequential_chain(8, cons);
  CHECK(c.globals[4].params() == c.globals[3].params());
  for (int i = 0; i < 8; ++i) CHECK(c.bridged[i] == (i >= 4));
  // A missing link behaves the same way.
  cons.erase(cons.begin() + 3);
  const ChainResult d = sequential_chain(8, cons);
  for (int i = 0; i < 8; ++i) CHECK(d.bridged[i] == (i >= 4));
}

TEST_CASE("noiseless chain is kept") {
  std::mt19937_64 rng(1);
  const auto truth = random_globals(20, rng);
  std::vector<Constraint> cons;
  for (int i = 1; i < 20; ++i) cons.push_back(link(i, i - 1, compose(truth[i], invert(truth[i - 1]))));
  const RefGrid grid(128, 128);
  const BundleResult r = bundle_adjust(graph_of(20, cons), grid);
  const auto chain = sequential_chain(20, cons).globals;
  CHECK(max_of(ground_truth_error(r.graph.globals, chain, grid)) < 1e-6);
  CHECK(r.final_cost < 1e-8);
}

TEST_CASE("consistent loop closure is fitted exactly from a perturbed start") {
  std::mt19937_64 rng(2);
  const int n = 30;
  const auto truth = random_globals(n, rng);
  std::vector<Constraint> cons;
  for (int i = 1; i < n; ++i) cons.push_back(link(i, i - 1, compose(truth[i], invert(truth[i - 1]))));
  cons.push_back(link(n - 1, 0, compose(truth[n - 1], invert(truth[0]))));
  PoseGraph g = graph_of(n, cons);
  std::normal_distribution<double> noise(0, 1.0);
  for (int i = 1; i < n; ++i) g.globals[i] = compose(WarpParams::translation(noise(rng), noise(rng)), g.globals[i]);
  const RefGrid grid(128, 128);
  const BundleResult r = bundle_adjust(g, grid);
  CHECK(r.initial_cost > 1.0);
  CHECK(r.final_cost < 1e-8);
  CHECK(max_of(ground_truth_error(r.graph.globals, truth, grid)) < 1e-6);
  for (const auto& c : r.graph.constraints) {
    REQUIRE(c.distance);
    CHECK(*c.distance < 1e-6);
  }
}

TEST_CASE("gauge and monotone cost") {
  std::mt19937_64 rng(3);
  const int n = 25;
  const auto truth = random_globals(n, rng);
  std::normal_distribution<double> noise(0, 0.5);
  auto noisy = [&](int i, int j) {
    return compose(WarpParams::translation(noise(rng), noise(rng)), compose(truth[i], invert(truth[j])));
  };
  std::vector<Constraint> cons;
  for (int i = 1; i < n; ++i) cons.push_back(link(i, i - 1, noisy(i, i - 1)));
  for (int i = 10; i < n; i += 5) cons.push_back(link(i, i - 10, noisy(i, i - 10)));
  const BundleResult r = bundle_adjust(graph_of(n, cons), RefGrid(128, 128));
  CHECK(r.graph.globals[0].params() == WarpParams::identity(WarpKind::Affine).params());
  REQUIRE_FALSE(r.cost_history.empty());
  for (std::size_t k = 1; k < r.cost_history.size(); ++k) {
    CHECK(r.cost_history[k] <= r.cost_history[k - 1]);
  }
  CHECK(r.final_cost <= r.initial_cost);
}

TEST_CASE("loop closures reduce drift") {
  int wins = 0;
  const RefGrid grid(128, 128);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    const int n = 100;
    std::vector<WarpParams> truth{WarpParams::identity(WarpKind::Affine)};
    for (int i = 1; i < n; ++i) truth.push_back(compose(WarpParams::translation(2, 0), truth.back()));
    std::normal_distribution<double> noise(0, 0.5);
    std::vector<Constraint> cons;
    for (int i = 1; i < n; ++i) {
      cons.push_back(link(i, i - 1, compose(WarpParams::translation(noise(rng), noise(rng)),
                                            compose(truth[i], invert(truth[i - 1])))));
    }
    // Ten noiseless closures back to frame 0.
    for (int i = 9; i < n; i += 10) cons.push_back(link(i, 0, truth[i]));
    const PoseGraph g = graph_of(n, cons);
    const double before = max_of(ground_truth_error(g.globals, truth, grid));
    const double after = max_of(ground_truth_error(bundle_adjust(g, grid).graph.globals, truth, grid));
    wins += after < before;
  }
  CHECK(wins >= 9);
}

TEST_CASE("rejected constraints carry no weight") {
  std::vector<Constraint> cons;
  for (int i = 1; i < 5; ++i) cons.push_back(link(i, i - 1, WarpParams::translation(1, 0)));
  cons.push_back(link(4, 0, WarpParams::translation(50, 0), false));
  const BundleResult r = bundle_adjust(graph_of(5, cons), RefGrid(64, 64));
  CHECK(r.final_cost < 1e-12);
  CHECK(r.graph.globals[4][2] == doctest::Approx(4.0));
}

TEST_CASE("unreachable frames are excluded or reported") {
  std::vector<Constraint> cons = {link(1, 0, WarpParams::translation(1, 0)),
                                  link(2, 1, WarpParams::translation(1, 0), false),
                                  link(3, 2, WarpParams::translation(1, 0))};
  const PoseGraph g = graph_of(4, cons);
  const auto reach = reachable_from_first(4, cons);
  CHECK(reach == std::vector<bool>{true, true, false, false});
  const BundleResult r = bundle_adjust(g, RefGrid(64, 64));
  CHECK(r.graph.excluded == std::vector<bool>{false, false, true, true});

  LmConfig strict;
  strict.require_connected = true;
  try {
    bundle_adjust(g, RefGrid(64, 64), strict);
    FAIL("expected DisconnectedGraph");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DisconnectedGraph);
  }
}

TEST_CASE("graph validation") {
  PoseGraph g = graph_of(3, {link(1, 0, WarpParams::identity()), link(2, 1, WarpParams::identity())});
  CHECK_NOTHROW(g.validate());
  g.constraints.push_back(link(2, 2, WarpParams::identity()));
  CHECK_THROWS_AS(g.validate(), Error);
  g.constraints.back() = link(3, 0, WarpParams::identity());
  CHECK_THROWS_AS(g.validate(), Error);
}

TEST_CASE("bundle cost counts only accepted constraints") {
  const std::vector<WarpParams> globals = {WarpParams::identity(), WarpParams::translation(1, 0)};
  const RefGrid grid(9, 9);
  const std::vector<Constraint> good = {link(1, 0, WarpParams::translation(1, 0))};
  const std::vector<Constraint> off = {link(1, 0, WarpParams::translation(0, 0))};
  const std::vector<Constraint> rejected = {link(1, 0, WarpParams::translation(0, 0), false)};
  CHECK(bundle_cost(globals, good, grid) == doctest::Approx(0.0));
  // Unit deviation at each of the grid points.
  CHECK(bundle_cost(globals, off, grid) == doctest::Approx(static_cast<double>(grid.points().cols())));
  CHECK(bundle_cost(globals, rejected, grid) == 0.0);
}

}  // TEST_SUITE
