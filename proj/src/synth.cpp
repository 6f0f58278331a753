#include "fetomosaic/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fetomosaic/error.hpp"

namespace fetomosaic {

namespace {

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// Value noise with quintic interpolation, values in [0, 1].
Image value_noise(int width, int height, double cell, std::mt19937_64& rng) {
  const int nx = static_cast<int>(std::ceil(width / cell)) + 2;
  const int ny = static_cast<int>(std::ceil(height / cell)) + 2;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Eigen::MatrixXd lattice(ny, nx);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) lattice(j, i) = uni(rng);
  }
  Image out(height, width);
  for (int y = 0; y < height; ++y) {
    const double gy = y / cell;
    const int j = static_cast<int>(gy);
    const double ty = fade(gy - j);
    for (int x = 0; x < width; ++x) {
      const double gx = x / cell;
      const int i = static_cast<int>(gx);
      const double tx = fade(gx - i);
      const double top = lattice(j, i) * (1 - tx) + lattice(j, i + 1) * tx;
      const double bot = lattice(j + 1, i) * (1 - tx) + lattice(j + 1, i + 1) * tx;
      out(y, x) = top * (1 - ty) + bot * ty;
    }
  }
  return out;
}

struct VesselSegment {
  Eigen::Vector2d a;
  Eigen::Vector2d b;
  double width;
  double depth;
};

void grow_vessel(Eigen::Vector2d pos, double heading, double width, double depth, int steps,
                 const SceneSpec& scene, std::mt19937_64& rng, std::vector<VesselSegment>& out,
                 int generation) {
  std::normal_distribution<double> turn(0.0, 0.07);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  constexpr double kStep = 2.0;
  const double taper = std::pow(0.6, 1.0 / std::max(steps, 1));
  for (int s = 0; s < steps; ++s) {
    heading += turn(rng);
    const Eigen::Vector2d next = pos + kStep * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    out.push_back({pos, next, width, depth});
    pos = next;
    width *= taper;
    if (pos.x() < -20 || pos.y() < -20 || pos.x() > scene.canvas_width + 20 ||
        pos.y() > scene.canvas_height + 20) {
      return;
    }
    if (generation < 2 && uni(rng) < 0.015 && width * 0.7 >= scene.min_vessel_width * 0.6) {
      const double side = uni(rng) < 0.5 ? -1.0 : 1.0;
      const double angle = heading + side * (0.5 + 0.5 * uni(rng));
      grow_vessel(pos, angle, width * 0.7, depth * 0.9, (steps - s) / 2 + 20, scene, rng, out,
                  generation + 1);
    }
  }
}

Image render_vessels(const SceneSpec& scene, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<VesselSegment> segments;
  for (int v = 0; v < scene.num_vessels; ++v) {
    const Eigen::Vector2d start(uni(rng) * scene.canvas_width, uni(rng) * scene.canvas_height);
    const double heading = uni(rng) * 2.0 * std::numbers::pi;
    const double width =
        scene.min_vessel_width + uni(rng) * (scene.max_vessel_width - scene.min_vessel_width);
    const double depth = 0.35 + 0.35 * uni(rng);
    const int steps = 60 + static_cast<int>(uni(rng) * 140);
    grow_vessel(start, heading, width, depth, steps, scene, rng, segments, 0);
  }

  Image dark = Image::Zero(scene.canvas_height, scene.canvas_width);
  for (const auto& seg : segments) {
    const double half = 0.5 * std::max(seg.width, 1.0);
    const double reach = 2.2 * half;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(seg.a.x(), seg.b.x()) - reach)));
    const int x1 = std::min(scene.canvas_width - 1,
                            static_cast<int>(std::ceil(std::max(seg.a.x(), seg.b.x()) + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(seg.a.y(), seg.b.y()) - reach)));
    const int y1 = std::min(scene.canvas_height - 1,
                            static_cast<int>(std::ceil(std::max(seg.a.y(), seg.b.y()) + reach)));
    const Eigen::Vector2d ab = seg.b - seg.a;
    const double len2 = std::max(ab.squaredNorm(), 1e-12);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Eigen::Vector2d p(x, y);
        const double t = std::clamp((p - seg.a).dot(ab) / len2, 0.0, 1.0);
        const double d = (p - (seg.a + t * ab)).norm();
        const double profile = seg.depth * std::exp(-(d / half) * (d / half));
        dark(y, x) = std::max(dark(y, x), profile);
      }
    }
  }
  return dark;
}

double bilinear(const Image& img, double x, double y) {
  const double cx = std::clamp(x, 0.0, static_cast<double>(img.cols() - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(img.rows() - 1));
  auto x0 = static_cast<Eigen::Index>(std::floor(cx));
  auto y0 = static_cast<Eigen::Index>(std::floor(cy));
  x0 = std::min(x0, img.cols() - 2);
  y0 = std::min(y0, img.rows() - 2);
  const double a = cx - x0;
  const double b = cy - y0;
  return (1 - a) * (1 - b) * img(y0, x0) + a * (1 - b) * img(y0, x0 + 1) +
         (1 - a) * b * img(y0 + 1, x0) + a * b * img(y0 + 1, x0 + 1);
}

void check_inside(const WarpParams& c, int fw, int fh, int cw, int ch, int index) {
  const std::array<Point2, 4> corners = {Point2(0, 0), Point2(fw - 1, 0), Point2(0, fh - 1),
                                         Point2(fw - 1, fh - 1)};
  for (const auto& corner : corners) {
    const Point2 q = apply_warp(c, corner);
    if (!(q.x() >= 1.0 && q.y() >= 1.0 && q.x() <= cw - 2.0 && q.y() <= ch - 2.0)) {
      throw Error(ErrorCode::TrajectoryLeavesCanvas,
                  "frame " + std::to_string(index) + " footprint leaves the canvas");
    }
  }
}

}  // namespace

std::string_view to_string(TrajectoryPattern pattern) {
  switch (pattern) {
    case TrajectoryPattern::Line: return "line";
    case TrajectoryPattern::StarShaped: return "star";
    case TrajectoryPattern::Loop: return "loop";
  }
  return "unknown";
}

TrajectoryPattern trajectory_pattern_from_string(std::string_view name) {
  if (name == "line") return TrajectoryPattern::Line;
  if (name == "star") return TrajectoryPattern::StarShaped;
  if (name == "loop") return TrajectoryPattern::Loop;
  throw Error(ErrorCode::InvalidArgument, "unknown trajectory pattern '" + std::string(name) + "'");
}

ColorImage generate_canvas(const SceneSpec& scene) {
  if (scene.canvas_width < 16 || scene.canvas_height < 16) {
    throw Error(ErrorCode::InvalidArgument, "canvas too small");
  }
  std::mt19937_64 rng(scene.seed);
  const int w = scene.canvas_width;
  const int h = scene.canvas_height;
  Image t = 0.2 * value_noise(w, h, 48.0, rng) + 0.4 * value_noise(w, h, 16.0, rng) +
            0.4 * value_noise(w, h, 6.0, rng);
  const Image dark = render_vessels(scene, rng);

  ColorImage out;
  out.r = (0.45 + 0.50 * t) * (1.0 - 0.45 * dark);
  out.g = (0.10 + 0.75 * t) * (1.0 - 0.60 * dark);
  out.b = (0.08 + 0.55 * t) * (1.0 - 0.60 * dark);
  return out;
}

Mask default_fov_mask(int width, int height) {
  return circular_mask(width, height, 0.5 * (width - 1), 0.5 * (height - 1),
                       0.5 * std::min(width, height) - 0.5);
}

std::vector<WarpParams> generate_poses(const TrajectorySpec& traj, int canvas_width,
                                       int canvas_height) {
  if (traj.num_frames < 1) throw Error(ErrorCode::InvalidArgument, "need at least one frame");
  std::mt19937_64 rng(traj.seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  const double deg = std::numbers::pi / 180.0;
  const int n = traj.num_frames;
  const Eigen::Vector2d canvas_center(0.5 * (canvas_width - 1), 0.5 * (canvas_height - 1));

  std::vector<Eigen::Vector2d> centers(n);
  switch (traj.pattern) {
    case TrajectoryPattern::Line: {
      const Eigen::Vector2d dir(std::cos(traj.line_angle_deg * deg),
                                std::sin(traj.line_angle_deg * deg));
      const double half = 0.5 * (n - 1) * traj.max_translation;
      for (int i = 0; i < n; ++i) {
        centers[i] = canvas_center + (i * traj.max_translation - half) * dir;
      }
      break;
    }
    case TrajectoryPattern::StarShaped: {
      const int branches = std::max(1, traj.num_branches);
      const double offset = 0.3 * sym(rng);
      centers[0] = canvas_center;
      int i = 1;
      for (int b = 0; b < branches && i < n; ++b) {
        const int steps = (n - 1) / branches + (b < (n - 1) % branches ? 1 : 0);
        const int out_steps = (steps + 1) / 2;
        const int back_steps = steps - out_steps;
        const double angle = offset + 2.0 * std::numbers::pi * b / branches;
        const Eigen::Vector2d dir(std::cos(angle), std::sin(angle));
        const Eigen::Vector2d normal(-dir.y(), dir.x());
        for (int k = 1; k <= out_steps && i < n; ++k, ++i) {
          centers[i] = canvas_center + k * traj.max_translation * dir;
        }
        const double tip = out_steps * traj.max_translation;
        for (int k = 1; k <= back_steps && i < n; ++k, ++i) {
          const double along = tip * (1.0 - static_cast<double>(k) / back_steps);
          centers[i] = canvas_center + along * dir + traj.lateral_jitter * sym(rng) * normal;
        }
      }
      break;
    }
    case TrajectoryPattern::Loop: {
      const double radius = n * traj.max_translation / (2.0 * std::numbers::pi);
      for (int i = 0; i < n; ++i) {
        const double a = 2.0 * std::numbers::pi * i / n;
        centers[i] = canvas_center + radius * Eigen::Vector2d(std::cos(a) - 1.0, std::sin(a));
      }
      // Keep the circle centred on the canvas.
      for (auto& c : centers) c.x() += radius;
      break;
    }
  }

  const Eigen::Vector2d frame_center(0.5 * (traj.frame_width - 1), 0.5 * (traj.frame_height - 1));
  std::vector<WarpParams> poses;
  poses.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double angle = traj.max_rotation_deg * deg * sym(rng);
    const double scale = 1.0 + traj.max_scale_jitter * sym(rng);
    const Eigen::Rotation2Dd rot(angle);
    const Eigen::Vector2d t = centers[i] - scale * (rot * frame_center);
    const WarpParams c = WarpParams::similarity(scale, angle, t.x(), t.y());
    check_inside(c, traj.frame_width, traj.frame_height, canvas_width, canvas_height, i);
    poses.push_back(c);
  }
  return poses;
}

std::vector<std::pair<int, int>> revisit_schedule(const std::vector<WarpParams>& frame_to_canvas,
                                                  int frame_width, int frame_height,
                                                  int min_gap, double radius) {
  const Point2 center(0.5 * (frame_width - 1), 0.5 * (frame_height - 1));
  std::vector<Point2> c;
  c.reserve(frame_to_canvas.size());
  for (const auto& w : frame_to_canvas) c.push_back(apply_warp(w, center));
  std::vector<std::pair<int, int>> out;
  const int n = static_cast<int>(c.size());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i + min_gap <= j; ++i) {
      if ((c[j] - c[i]).norm() <= radius) out.emplace_back(j, i);
    }
  }
  return out;
}

Ellipse random_occluder(int width, int height, double min_area, double max_area,
                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double area = (min_area + (max_area - min_area) * uni(rng)) * width * height;
  const double ratio = 0.5 + 0.5 * uni(rng);
  Ellipse e;
  e.semi_major = std::sqrt(area / (std::numbers::pi * ratio));
  e.semi_minor = ratio * e.semi_major;
  e.angle = uni(rng) * std::numbers::pi;
  e.center = Eigen::Vector2d((0.2 + 0.6 * uni(rng)) * width, (0.2 + 0.6 * uni(rng)) * height);
  const double base = 0.35 + 0.6 * uni(rng);
  e.color = Eigen::Vector3d(base, base * (0.8 + 0.2 * uni(rng)), base * (0.6 + 0.3 * uni(rng)));
  const double slope = 0.3 / std::max(e.semi_major, 1.0);
  const double dir = uni(rng) * 2.0 * std::numbers::pi;
  e.shading = slope * Eigen::Vector2d(std::cos(dir), std::sin(dir));
  return e;
}

FramePerturbation draw_perturbation(const PerturbationSpec& spec, int width, int height,
                                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  FramePerturbation p;
  if (uni(rng) < spec.occlusion_rate) {
    p.occluder = random_occluder(width, height, spec.occlusion_min_area, spec.occlusion_max_area, rng);
  }
  if (spec.contrast_drift) {
    p.contrast_a = spec.contrast_min + (spec.contrast_max - spec.contrast_min) * uni(rng);
    p.contrast_b = spec.brightness_range * (2.0 * uni(rng) - 1.0);
  }
  p.noise_sigma = spec.noise_sigma;
  p.noise_seed = rng();
  return p;
}

Frame render_frame(const ColorImage& canvas, const WarpParams& frame_to_canvas, int width,
                   int height, int id, const Mask& fov, const FramePerturbation& perturbation) {
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3);
  std::mt19937_64 noise_rng(perturbation.noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const Image* channels[3] = {&canvas.r, &canvas.g, &canvas.b};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Point2 c = apply_warp(frame_to_canvas, Point2(x, y));
      Eigen::Vector3d v(bilinear(*channels[0], c.x(), c.y()), bilinear(*channels[1], c.x(), c.y()),
                        bilinear(*channels[2], c.x(), c.y()));
      if (perturbation.occluder) {
        const Ellipse& e = *perturbation.occluder;
        const Eigen::Vector2d d = Eigen::Vector2d(x, y) - e.center;
        const double ca = std::cos(e.angle);
        const double sa = std::sin(e.angle);
        const double u = (ca * d.x() + sa * d.y()) / e.semi_major;
        const double w = (-sa * d.x() + ca * d.y()) / e.semi_minor;
        const double rho = std::sqrt(u * u + w * w);
        const double signed_dist = (rho - 1.0) * e.semi_minor;
        const double alpha = std::clamp(0.5 - signed_dist, 0.0, 1.0);
        if (alpha > 0.0) {
          const Eigen::Vector3d col = e.color * (1.0 + e.shading.dot(d));
          v = (1.0 - alpha) * v + alpha * col;
        }
      }
      v = perturbation.contrast_a * v.array() + perturbation.contrast_b;
      const std::size_t base = (static_cast<std::size_t>(y) * width + x) * 3;
      for (int k = 0; k < 3; ++k) {
        double val = v(k);
        if (perturbation.noise_sigma > 0.0) val += perturbation.noise_sigma * noise(noise_rng);
        val = std::clamp(val, 0.0, 1.0);
        rgb[base + k] = fov(y, x) ? static_cast<std::uint8_t>(std::lround(255.0 * val)) : 0;
      }
    }
  }
  return Frame::create(id, width, height, std::move(rgb), fov);
}

SyntheticSequence generate_sequence(const ColorImage& canvas, const TrajectorySpec& traj,
                                    const PerturbationSpec& perturb) {
  if (canvas.width() < 4 * traj.frame_width || canvas.height() < 4 * traj.frame_height) {
    throw Error(ErrorCode::InvalidArgument, "canvas must be at least 4x the frame size");
  }
  if (perturb.occlusion_rate < 0.0 || perturb.occlusion_rate > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "occlusion rate outside [0,1]");
  }
  SyntheticSequence seq;
  seq.frame_to_canvas = generate_poses(traj, canvas.width(), canvas.height());
  seq.fov = default_fov_mask(traj.frame_width, traj.frame_height);
  seq.revisits = revisit_schedule(seq.frame_to_canvas, traj.frame_width, traj.frame_height,
                                  traj.min_revisit_gap,
                                  traj.revisit_radius_fraction * traj.frame_width);
  std::mt19937_64 rng(perturb.seed);
  const WarpParams c0 = seq.frame_to_canvas.front();
  for (int i = 0; i < traj.num_frames; ++i) {
    const FramePerturbation p = draw_perturbation(perturb, traj.frame_width, traj.frame_height, rng);
    seq.frames.push_back(render_frame(canvas, seq.frame_to_canvas[i], traj.frame_width,
                                      traj.frame_height, i, seq.fov, p));
    seq.truth.push_back(i == 0 ? WarpParams::identity()
                               : compose(invert(seq.frame_to_canvas[i]), c0));
  }
  return seq;
}

SyntheticSequence generate_sequence(const SceneSpec& scene, const TrajectorySpec& traj,
                                    const PerturbationSpec& perturb) {
  return generate_sequence(generate_canvas(scene), traj, perturb);
}

std::vector<double> ground_truth_error(const std::vector<WarpParams>& globals,
                                       const std::vector<WarpParams>& truth,
                                       const RefGrid& grid) {
  if (globals.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "globals and truth differ in length");
  }
  std::vector<double> err(globals.size());
  for (std::size_t i = 0; i < globals.size(); ++i) {
    err[i] = warp_distance(globals[i], truth[i], grid);
  }
  return err;
}

}  // namespace fetomosaic
