#pragma once

// End-to-end mosaicking: consecutive registrations, retrieval of long-range
// pairs, their registrations, gating, bundle adjustment and compositing.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fetomosaic/bundle.hpp"
#include "fetomosaic/compositor.hpp"
#include "fetomosaic/gate.hpp"
#include "fetomosaic/register.hpp"
#include "fetomosaic/retrieval.hpp"

namespace fetomosaic {

struct RetrievalConfig {
  bool enabled = true;
  int vocabulary_size = 200;
  int keypoint_step = 8;
  double threshold = 0.85;
  // Unset means 3 x number of frames.
  std::optional<int> budget;
  int min_gap = 10;

  void validate() const;
  int budget_for(int num_frames) const { return budget ? *budget : 3 * num_frames; }
};

struct CompositorConfig {
  BlendMode mode = BlendMode::Feather;
  int stride = 5;
};

// Field of view applied to every frame. The default circle is the one the
// synthetic generator uses.
struct FovConfig {
  enum class Mode { Full, Circle, File };
  Mode mode = Mode::Circle;
  std::optional<Point2> center;   // default: image center
  std::optional<double> radius;   // default: inscribed circle
  std::filesystem::path path;     // Mode::File

  Mask make(int width, int height) const;
};

struct PipelineConfig {
  std::filesystem::path frames_dir;
  std::filesystem::path output_dir;
  RegistrationConfig registration;
  GateConfig gate;
  RetrievalConfig retrieval;
  LmConfig bundle;
  CompositorConfig compositor;
  FovConfig fov;
  std::uint64_t seed = 0;
  int workers = 1;

  // Copies `seed` into the gate seed and mirrors the gate into the per-level
  // gate of the registration. The vocabulary seed is derived from it too.
  void apply_seed();
  void validate() const;
};

// Runs fn(0..n-1) on up to `workers` threads. Results must be written by
// index so the outcome does not depend on scheduling. The first exception
// (lowest index) is rethrown.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

struct PairRecord {
  int fixed = 0;
  int moving = 0;
  bool retrieved = false;
  std::optional<double> similarity;
  std::optional<RegistrationResult> result;
  GateVerdict verdict;
  std::string error;

  // The constraint (moving, fixed) implied by a successful registration.
  std::optional<Constraint> constraint() const;
};

// Registers fixed -> moving and gates the result; errors become records.
PairRecord register_and_gate(const Pyramid& fixed, const Pyramid& moving, int fixed_index,
                             int moving_index, const RegistrationConfig& reg,
                             const GateConfig& gate);

struct RetrievalOutput {
  Eigen::MatrixXd similarity;
  std::vector<std::pair<int, int>> pairs;
  int vocabulary_size = 0;
  int num_descriptors = 0;
};

RetrievalOutput run_retrieval(const std::vector<Frame>& frames, const RetrievalConfig& cfg,
                              std::uint64_t seed, int workers);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineOutput {
  std::vector<std::string> frame_files;
  std::vector<PairRecord> pairs;
  RetrievalOutput retrieval;
  ChainResult chain;
  BundleResult bundle;
  std::optional<MosaicCanvas> mosaic;
  std::vector<StageTiming> timing;
};

// Stage names used in error records.
struct StageError : Error {
  StageError(std::string stage_name, const Error& e) : Error(e), stage(std::move(stage_name)) {}
  std::string stage;
};

PipelineOutput run_pipeline(const std::vector<Frame>& frames, const PipelineConfig& cfg);

// Loads frames from cfg.frames_dir, runs the pipeline and writes pairs.json,
// posegraph.json, mosaic.png and report.json into cfg.output_dir.
PipelineOutput run_pipeline_on_disk(const PipelineConfig& cfg);

std::vector<Frame> load_frames(const std::filesystem::path& dir, const FovConfig& fov,
                               std::vector<std::string>* names = nullptr);

}  // namespace fetomosaic
