#pragma once

// Synthetic ground truth: a procedural vessel-like canvas filmed by a moving
// camera with a circular field of view, with optional occlusions, contrast
// drift and noise.

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "fetomosaic/geometry.hpp"
#include "fetomosaic/imageproc.hpp"

namespace fetomosaic {

struct ColorImage {
  Image r;
  Image g;
  Image b;

  int width() const { return static_cast<int>(r.cols()); }
  int height() const { return static_cast<int>(r.rows()); }
};

struct SceneSpec {
  int canvas_width = 512;
  int canvas_height = 512;
  int num_vessels = 28;
  double min_vessel_width = 3.0;
  double max_vessel_width = 8.0;
  std::uint64_t seed = 1;
};

enum class TrajectoryPattern { Line, StarShaped, Loop };

std::string_view to_string(TrajectoryPattern pattern);
TrajectoryPattern trajectory_pattern_from_string(std::string_view name);

struct TrajectorySpec {
  int num_frames = 50;
  TrajectoryPattern pattern = TrajectoryPattern::Line;
  int frame_width = 128;
  int frame_height = 128;
  double max_translation = 2.0;   // px per frame
  double max_rotation_deg = 0.0;  // orientation jitter, degrees
  double max_scale_jitter = 0.0;  // scale in [1 - j, 1 + j]
  double line_angle_deg = 0.0;
  int num_branches = 3;
  double lateral_jitter = 0.0;  // px, StarShaped return path
  int min_revisit_gap = 10;
  double revisit_radius_fraction = 0.1;  // of frame width
  std::uint64_t seed = 1;
};

struct PerturbationSpec {
  double occlusion_rate = 0.0;
  double occlusion_min_area = 0.10;
  double occlusion_max_area = 0.40;
  bool contrast_drift = false;
  double contrast_min = 0.6;
  double contrast_max = 1.4;
  double brightness_range = 0.1;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
};

struct Ellipse {
  Eigen::Vector2d center;
  double semi_major = 0.0;
  double semi_minor = 0.0;
  double angle = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  Eigen::Vector2d shading = Eigen::Vector2d::Zero();  // linear shading slope per px
};

struct FramePerturbation {
  double contrast_a = 1.0;
  double contrast_b = 0.0;
  std::optional<Ellipse> occluder;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
};

struct SyntheticSequence {
  std::vector<Frame> frames;
  // W_i: maps frame-0 (mosaic) coordinates into frame i; truth[0] == identity.
  std::vector<WarpParams> truth;
  // C_i: maps frame-i pixels into canvas coordinates.
  std::vector<WarpParams> frame_to_canvas;
  // (later frame, earlier frame) pairs observing the same place.
  std::vector<std::pair<int, int>> revisits;
  Mask fov;
};

ColorImage generate_canvas(const SceneSpec& scene);

// Default fetoscope-like field of view for a frame size.
Mask default_fov_mask(int width, int height);

std::vector<WarpParams> generate_poses(const TrajectorySpec& traj, int canvas_width,
                                       int canvas_height);

std::vector<std::pair<int, int>> revisit_schedule(const std::vector<WarpParams>& frame_to_canvas,
                                                  int frame_width, int frame_height,
                                                  int min_gap, double radius);

Ellipse random_occluder(int width, int height, double min_area, double max_area,
                        std::mt19937_64& rng);

FramePerturbation draw_perturbation(const PerturbationSpec& spec, int width, int height,
                                    std::mt19937_64& rng);

// Samples the canvas under C (frame -> canvas), applies the perturbation,
// quantizes to 8 bits and blanks pixels outside the field of view.
Frame render_frame(const ColorImage& canvas, const WarpParams& frame_to_canvas, int width,
                   int height, int id, const Mask& fov, const FramePerturbation& perturbation = {});

SyntheticSequence generate_sequence(const SceneSpec& scene, const TrajectorySpec& traj,
                                    const PerturbationSpec& perturb);

SyntheticSequence generate_sequence(const ColorImage& canvas, const TrajectorySpec& traj,
                                    const PerturbationSpec& perturb);

// Per-frame warp_distance(globals[i], truth[i]).
std::vector<double> ground_truth_error(const std::vector<WarpParams>& globals,
                                       const std::vector<WarpParams>& truth,
                                       const RefGrid& grid);

}  // namespace fetomosaic
