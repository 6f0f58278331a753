#include <doctest.h>

#include <atomic>
#include <filesystem>

#include "fetomosaic/pipeline.hpp"
#include "fetomosaic/serialize.hpp"
#include "fetomosaic/synth.hpp"
#include "support.hpp"

using namespace fetomosaic;

namespace {

double max_error(const PipelineOutput& out, const SyntheticSequence& s) {
  const auto e = ground_truth_error(out.bundle.graph.globals, s.truth, RefGrid(128, 128));
  return *std::max_element(e.begin(), e.end());
}

int accepted(const PipelineOutput& out) {
  int n = 0;
  for (const auto& p : out.pairs) n += p.verdict.accepted;
  return n;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("two identical frames") {
  TrajectorySpec traj;
  traj.num_frames = 1;
  const SyntheticSequence s = generate_sequence(SceneSpec{}, traj, PerturbationSpec{});
  Frame second = s.frames[0];
  second.id = 1;
  PipelineConfig cfg;
  cfg.compositor.stride = 1;
  const PipelineOutput out = run_pipeline({s.frames[0], second}, cfg);
  REQUIRE(out.pairs.size() == 1);
  CHECK(accepted(out) == 1);
  const RefGrid grid(128, 128);
  for (const auto& w : out.bundle.graph.globals) {
    CHECK(warp_distance(w, WarpParams::identity(w.kind()), grid) < 0.05);
  }
  REQUIRE(out.mosaic);
  CHECK(std::abs(out.mosaic->width() - 130) <= 1);
  CHECK(std::abs(out.mosaic->height() - 130) <= 1);
}

TEST_CASE("Line sequence without perturbation") {
  TrajectorySpec traj;
  traj.num_frames = 50;
  const SyntheticSequence s = generate_sequence(SceneSpec{}, traj, PerturbationSpec{});
  const PipelineOutput out = run_pipeline(s.frames, PipelineConfig{});
  CHECK(accepted(out) == static_cast<int>(out.pairs.size()));
  CHECK(max_error(out, s) < 0.5);
  for (bool b : out.chain.bridged) CHECK_FALSE(b);
}

TEST_CASE("retrieval reduces drift") {
  SceneSpec scene;
  scene.seed = 3;
  TrajectorySpec traj;
  traj.num_frames = 60;
  traj.pattern = TrajectoryPattern::StarShaped;
  traj.num_branches = 2;
  traj.max_translation = 4;
  traj.max_rotation_deg = 1;
  traj.seed = 5;
  PerturbationSpec p;
  p.noise_sigma = 0.01;
  p.contrast_drift = true;
  const SyntheticSequence s = generate_sequence(scene, traj, p);
  REQUIRE(!s.revisits.empty());
  PipelineConfig off;
  off.retrieval.budget = 0;
  const PipelineOutput without = run_pipeline(s.frames, off);
  const PipelineOutput with = run_pipeline(s.frames, PipelineConfig{});
  CHECK(without.retrieval.pairs.empty());
  CHECK(!with.retrieval.pairs.empty());
  const double e0 = max_error(without, s);
  const double e1 = max_error(with, s);
  MESSAGE("max error without retrieval " << e0 << ", with " << e1);
  CHECK(e1 < e0);
}

TEST_CASE("worker count does not change the result") {
  TrajectorySpec traj;
  traj.num_frames = 24;
  traj.pattern = TrajectoryPattern::Loop;
  traj.max_rotation_deg = 1;
  PerturbationSpec p;
  p.occlusion_rate = 0.3;
  const SyntheticSequence s = generate_sequence(SceneSpec{}, traj, p);
  PipelineConfig cfg;
  cfg.seed = 9;
  const PipelineOutput a = run_pipeline(s.frames, cfg);
  cfg.workers = 4;
  const PipelineOutput b = run_pipeline(s.frames, cfg);
  REQUIRE(a.pairs.size() == b.pairs.size());
  for (std::size_t k = 0; k < a.pairs.size(); ++k) CHECK(json(a.pairs[k]).dump() == json(b.pairs[k]).dump());
  CHECK(pose_graph_json(a.bundle.graph) == pose_graph_json(b.bundle.graph));
  CHECK((a.mosaic->r == b.mosaic->r).all());
}

TEST_CASE("parallel_for covers every index and rethrows the first failure") {
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](int i) { hit[i] += 1; });
  for (int h : hit) CHECK(h == 1);
  try {
    parallel_for(50, 3, [](int i) {
      if (i == 7 || i == 30) throw Error(ErrorCode::InvalidArgument, std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
}

TEST_CASE("a failing registration becomes a record") {
  const Frame flat = testsupport::constant_frame(64, 64, 90, 90, 90);
  const Pyramid p = build_pyramid(flat);
  const PairRecord r = register_and_gate(p, p, 0, 1, RegistrationConfig{}, GateConfig{});
  CHECK_FALSE(r.verdict.accepted);
  CHECK(r.verdict.reason == GateReason::RegistrationFailed);
  CHECK_FALSE(r.error.empty());
  CHECK_FALSE(r.constraint());
}

TEST_CASE("seed reaches the gate") {
  PipelineConfig cfg;
  cfg.seed = 123;
  cfg.apply_seed();
  CHECK(cfg.gate.rng_seed == 123);
  CHECK(cfg.registration.level_gate.rng_seed == 123);
}

TEST_CASE("configuration validation") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.workers = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = PipelineConfig{};
  cfg.retrieval.min_gap = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = PipelineConfig{};
  cfg.compositor.stride = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("stage errors are written to disk") {
  const std::filesystem::path root = std::filesystem::path(FETOMOSAIC_TEST_TMP) / "pipeline_error";
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root / "frames");
  PipelineConfig cfg;
  cfg.frames_dir = root / "frames";
  cfg.output_dir = root / "out";
  try {
    run_pipeline_on_disk(cfg);
    FAIL("expected an error");
  } catch (const StageError& e) {
    CHECK(e.stage == "load");
  }
  const json err = read_json_file(root / "out" / "error.json");
  CHECK(err.at("stage") == "load");
  CHECK(err.contains("code"));
  CHECK(err.contains("message"));
}

TEST_CASE("field of view masks") {
  FovConfig fov;
  const Mask circle = fov.make(128, 128);
  CHECK((circle == default_fov_mask(128, 128)).all());
  fov.mode = FovConfig::Mode::Full;
  CHECK(fov.make(20, 10).count() == 200);
  fov.mode = FovConfig::Mode::Circle;
  fov.center = Point2(0, 0);
  fov.radius = 3;
  CHECK(fov.make(20, 20)(0, 0));
  CHECK_FALSE(fov.make(20, 20)(10, 10));
}

}  // TEST_SUITE
