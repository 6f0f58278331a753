#include "fetomosaic/serialize.hpp"

#include <fstream>
#include <initializer_list>
#include <string>

#include "fetomosaic/error.hpp"

namespace fetomosaic {

namespace {

void expect_object(const json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, std::string(where) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known |= it.key() == k;
    if (!known) {
      throw Error(ErrorCode::InvalidArgument,
                  "unknown key '" + it.key() + "' in " + std::string(where));
    }
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "bad value for '" + std::string(key) + "': " + e.what());
  }
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  get(j, key, v);
  out = v;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

// Enum fields are stored as their string names.
template <typename E, typename Parse>
void get_enum(const json& j, const char* key, E& out, Parse parse) {
  if (!j.contains(key)) return;
  std::string name;
  get(j, key, name);
  out = parse(name);
}

std::string_view fov_mode_name(FovConfig::Mode m) {
  switch (m) {
    case FovConfig::Mode::Full: return "full";
    case FovConfig::Mode::Circle: return "circle";
    case FovConfig::Mode::File: return "file";
  }
  return "full";
}

FovConfig::Mode fov_mode_from_string(std::string_view name) {
  if (name == "full") return FovConfig::Mode::Full;
  if (name == "circle") return FovConfig::Mode::Circle;
  if (name == "file") return FovConfig::Mode::File;
  throw Error(ErrorCode::InvalidArgument, "unknown fov mode '" + std::string(name) + "'");
}

json frame_entry(int index, const WarpParams& w) {
  json f = w;
  f["index"] = index;
  return f;
}

}  // namespace

void to_json(json& j, const WarpParams& w) {
  j = json{{"p", std::vector<double>(w.params().data(), w.params().data() + 8)},
           {"kind", to_string(w.kind())}};
}

void from_json(const json& j, WarpParams& w) {
  if (!j.is_object() || !j.contains("p")) {
    throw Error(ErrorCode::InvalidArgument, "warp needs a 'p' array");
  }
  const auto p = j.at("p").get<std::vector<double>>();
  if (p.size() != 8) throw Error(ErrorCode::InvalidArgument, "warp 'p' must have 8 entries");
  WarpKind kind = WarpKind::Affine;
  get_enum(j, "kind", kind, warp_kind_from_string);
  w = WarpParams(WarpParams::Params(p.data()), kind);
}

void to_json(json& j, const CostOptions& c) {
  j = json{{"grad_eps", c.grad_eps},
           {"min_coherence", c.min_coherence},
           {"min_overlap_fraction", c.min_overlap_fraction}};
}

void from_json(const json& j, CostOptions& c) {
  expect_object(j, {"grad_eps", "min_coherence", "min_overlap_fraction"}, "cost");
  get(j, "grad_eps", c.grad_eps);
  get(j, "min_coherence", c.min_coherence);
  get(j, "min_overlap_fraction", c.min_overlap_fraction);
}

void to_json(json& j, const GateConfig& c) {
  j = json{{"max_identity_distance", optional_json(c.max_identity_distance)},
           {"max_identity_fraction", c.max_identity_fraction},
           {"num_random_warps", c.num_random_warps},
           {"random_translation_sigma", c.random_translation_sigma},
           {"random_linear_sigma", c.random_linear_sigma},
           {"cost_quantile", c.cost_quantile},
           {"cost_margin", c.cost_margin},
           {"min_coherence", c.min_coherence}};
}

void from_json(const json& j, GateConfig& c) {
  expect_object(j,
                {"max_identity_distance", "max_identity_fraction", "num_random_warps",
                 "random_translation_sigma", "random_linear_sigma", "cost_quantile",
                 "cost_margin", "min_coherence"},
                "gate");
  get_optional(j, "max_identity_distance", c.max_identity_distance);
  get(j, "max_identity_fraction", c.max_identity_fraction);
  get(j, "num_random_warps", c.num_random_warps);
  get(j, "random_translation_sigma", c.random_translation_sigma);
  get(j, "random_linear_sigma", c.random_linear_sigma);
  get(j, "cost_quantile", c.cost_quantile);
  get(j, "cost_margin", c.cost_margin);
  get(j, "min_coherence", c.min_coherence);
}

void to_json(json& j, const RegistrationConfig& c) {
  j = json{{"num_levels", c.num_levels},
           {"max_iters_per_level", c.max_iters_per_level},
           {"param_tol", c.param_tol},
           {"cost_tol", c.cost_tol},
           {"warp_kind", to_string(c.warp_kind)},
           {"bidirectional", c.bidirectional},
           {"objective", to_string(c.objective)},
           {"cost", c.cost},
           {"initial_damping", c.initial_damping},
           {"gate_each_level", c.gate_each_level}};
}

void from_json(const json& j, RegistrationConfig& c) {
  expect_object(j,
                {"num_levels", "max_iters_per_level", "param_tol", "cost_tol", "warp_kind",
                 "bidirectional", "objective", "cost", "initial_damping", "gate_each_level"},
                "registration");
  get(j, "num_levels", c.num_levels);
  get(j, "max_iters_per_level", c.max_iters_per_level);
  get(j, "param_tol", c.param_tol);
  get(j, "cost_tol", c.cost_tol);
  get_enum(j, "warp_kind", c.warp_kind, warp_kind_from_string);
  get(j, "bidirectional", c.bidirectional);
  get_enum(j, "objective", c.objective, objective_from_string);
  if (j.contains("cost")) from_json(j.at("cost"), c.cost);
  get(j, "initial_damping", c.initial_damping);
  get(j, "gate_each_level", c.gate_each_level);
}

void to_json(json& j, const LmConfig& c) {
  j = json{{"max_iterations", c.max_iterations},
           {"relative_cost_tol", c.relative_cost_tol},
           {"step_tol", c.step_tol},
           {"initial_damping", c.initial_damping},
           {"divergence_cost", c.divergence_cost},
           {"solver_grid_step", c.solver_grid_step},
           {"global_kind", to_string(c.global_kind)},
           {"require_connected", c.require_connected}};
}

void from_json(const json& j, LmConfig& c) {
  expect_object(j,
                {"max_iterations", "relative_cost_tol", "step_tol", "initial_damping",
                 "divergence_cost", "solver_grid_step", "global_kind", "require_connected"},
                "bundle");
  get(j, "max_iterations", c.max_iterations);
  get(j, "relative_cost_tol", c.relative_cost_tol);
  get(j, "step_tol", c.step_tol);
  get(j, "initial_damping", c.initial_damping);
  get(j, "divergence_cost", c.divergence_cost);
  get(j, "solver_grid_step", c.solver_grid_step);
  get_enum(j, "global_kind", c.global_kind, warp_kind_from_string);
  get(j, "require_connected", c.require_connected);
}

void to_json(json& j, const RetrievalConfig& c) {
  j = json{{"enabled", c.enabled},
           {"vocabulary_size", c.vocabulary_size},
           {"keypoint_step", c.keypoint_step},
           {"threshold", c.threshold},
           {"budget", optional_json(c.budget)},
           {"min_gap", c.min_gap}};
}

void from_json(const json& j, RetrievalConfig& c) {
  expect_object(j, {"enabled", "vocabulary_size", "keypoint_step", "threshold", "budget", "min_gap"},
                "retrieval");
  get(j, "enabled", c.enabled);
  get(j, "vocabulary_size", c.vocabulary_size);
  get(j, "keypoint_step", c.keypoint_step);
  get(j, "threshold", c.threshold);
  get_optional(j, "budget", c.budget);
  get(j, "min_gap", c.min_gap);
}

void to_json(json& j, const CompositorConfig& c) {
  j = json{{"mode", to_string(c.mode)}, {"stride", c.stride}};
}

void from_json(const json& j, CompositorConfig& c) {
  expect_object(j, {"mode", "stride"}, "compositor");
  get_enum(j, "mode", c.mode, blend_mode_from_string);
  get(j, "stride", c.stride);
}

void to_json(json& j, const FovConfig& c) {
  j = json{{"mode", fov_mode_name(c.mode)},
           {"center", c.center ? json{c.center->x(), c.center->y()} : json(nullptr)},
           {"radius", optional_json(c.radius)},
           {"path", c.path.string()}};
}

void from_json(const json& j, FovConfig& c) {
  expect_object(j, {"mode", "center", "radius", "path"}, "fov");
  get_enum(j, "mode", c.mode, fov_mode_from_string);
  if (j.contains("center")) {
    if (j.at("center").is_null()) {
      c.center.reset();
    } else {
      const auto v = j.at("center").get<std::vector<double>>();
      if (v.size() != 2) throw Error(ErrorCode::InvalidArgument, "fov center needs [x, y]");
      c.center = Point2(v[0], v[1]);
    }
  }
  get_optional(j, "radius", c.radius);
  std::string path = c.path.string();
  get(j, "path", path);
  c.path = path;
}

void to_json(json& j, const PipelineConfig& c) {
  j = json{{"frames_dir", c.frames_dir.string()},
           {"output_dir", c.output_dir.string()},
           {"seed", c.seed},
           {"workers", c.workers},
           {"fov", c.fov},
           {"registration", c.registration},
           {"gate", c.gate},
           {"retrieval", c.retrieval},
           {"bundle", c.bundle},
           {"compositor", c.compositor}};
}

void from_json(const json& j, PipelineConfig& c) {
  expect_object(j,
                {"frames_dir", "output_dir", "seed", "workers", "fov", "registration", "gate",
                 "retrieval", "bundle", "compositor"},
                "config");
  std::string frames = c.frames_dir.string();
  std::string out = c.output_dir.string();
  get(j, "frames_dir", frames);
  get(j, "output_dir", out);
  c.frames_dir = frames;
  c.output_dir = out;
  get(j, "seed", c.seed);
  get(j, "workers", c.workers);
  if (j.contains("fov")) from_json(j.at("fov"), c.fov);
  if (j.contains("registration")) from_json(j.at("registration"), c.registration);
  if (j.contains("gate")) from_json(j.at("gate"), c.gate);
  if (j.contains("retrieval")) from_json(j.at("retrieval"), c.retrieval);
  if (j.contains("bundle")) from_json(j.at("bundle"), c.bundle);
  if (j.contains("compositor")) from_json(j.at("compositor"), c.compositor);
}

void to_json(json& j, const SceneSpec& s) {
  j = json{{"canvas_width", s.canvas_width},         {"canvas_height", s.canvas_height},
           {"num_vessels", s.num_vessels},           {"min_vessel_width", s.min_vessel_width},
           {"max_vessel_width", s.max_vessel_width}, {"seed", s.seed}};
}

void from_json(const json& j, SceneSpec& s) {
  expect_object(j,
                {"canvas_width", "canvas_height", "num_vessels", "min_vessel_width",
                 "max_vessel_width", "seed"},
                "scene");
  get(j, "canvas_width", s.canvas_width);
  get(j, "canvas_height", s.canvas_height);
  get(j, "num_vessels", s.num_vessels);
  get(j, "min_vessel_width", s.min_vessel_width);
  get(j, "max_vessel_width", s.max_vessel_width);
  get(j, "seed", s.seed);
}

void to_json(json& j, const TrajectorySpec& s) {
  j = json{{"num_frames", s.num_frames},
           {"pattern", to_string(s.pattern)},
           {"frame_width", s.frame_width},
           {"frame_height", s.frame_height},
           {"max_translation", s.max_translation},
           {"max_rotation_deg", s.max_rotation_deg},
           {"max_scale_jitter", s.max_scale_jitter},
           {"line_angle_deg", s.line_angle_deg},
           {"num_branches", s.num_branches},
           {"lateral_jitter", s.lateral_jitter},
           {"min_revisit_gap", s.min_revisit_gap},
           {"revisit_radius_fraction", s.revisit_radius_fraction},
           {"seed", s.seed}};
}

void from_json(const json& j, TrajectorySpec& s) {
  expect_object(j,
                {"num_frames", "pattern", "frame_width", "frame_height", "max_translation",
                 "max_rotation_deg", "max_scale_jitter", "line_angle_deg", "num_branches",
                 "lateral_jitter", "min_revisit_gap", "revisit_radius_fraction", "seed"},
                "trajectory");
  get(j, "num_frames", s.num_frames);
  get_enum(j, "pattern", s.pattern, trajectory_pattern_from_string);
  get(j, "frame_width", s.frame_width);
  get(j, "frame_height", s.frame_height);
  get(j, "max_translation", s.max_translation);
  get(j, "max_rotation_deg", s.max_rotation_deg);
  get(j, "max_scale_jitter", s.max_scale_jitter);
  get(j, "line_angle_deg", s.line_angle_deg);
  get(j, "num_branches", s.num_branches);
  get(j, "lateral_jitter", s.lateral_jitter);
  get(j, "min_revisit_gap", s.min_revisit_gap);
  get(j, "revisit_radius_fraction", s.revisit_radius_fraction);
  get(j, "seed", s.seed);
}

void to_json(json& j, const PerturbationSpec& s) {
  j = json{{"occlusion_rate", s.occlusion_rate},
           {"occlusion_min_area", s.occlusion_min_area},
           {"occlusion_max_area", s.occlusion_max_area},
           {"contrast_drift", s.contrast_drift},
           {"contrast_min", s.contrast_min},
           {"contrast_max", s.contrast_max},
           {"brightness_range", s.brightness_range},
           {"noise_sigma", s.noise_sigma},
           {"seed", s.seed}};
}

void from_json(const json& j, PerturbationSpec& s) {
  expect_object(j,
                {"occlusion_rate", "occlusion_min_area", "occlusion_max_area", "contrast_drift",
                 "contrast_min", "contrast_max", "brightness_range", "noise_sigma", "seed"},
                "perturbation");
  get(j, "occlusion_rate", s.occlusion_rate);
  get(j, "occlusion_min_area", s.occlusion_min_area);
  get(j, "occlusion_max_area", s.occlusion_max_area);
  get(j, "contrast_drift", s.contrast_drift);
  get(j, "contrast_min", s.contrast_min);
  get(j, "contrast_max", s.contrast_max);
  get(j, "brightness_range", s.brightness_range);
  get(j, "noise_sigma", s.noise_sigma);
  get(j, "seed", s.seed);
}

void to_json(json& j, const GateVerdict& v) {
  j = json{{"accepted", v.accepted},
           {"reason", to_string(v.reason)},
           {"registration_cost", v.registration_cost},
           {"random_cost_quantile", v.random_cost_quantile_value},
           {"identity_distance", v.identity_distance}};
}

void to_json(json& j, const LevelDiagnostics& d) {
  j = json{{"level", d.level}, {"iterations", d.iterations}, {"cost", d.cost}, {"accepted", d.accepted}};
}

void to_json(json& j, const RegistrationResult& r) {
  j = json{{"warp", r.warp},
           {"final_cost", r.final_cost},
           {"num_valid_pixels", r.num_valid_pixels},
           {"direction", to_string(r.direction)},
           {"objective", to_string(r.objective)},
           {"per_level", r.per_level},
           {"forward_warp", r.forward_warp ? json(*r.forward_warp) : json(nullptr)},
           {"backward_warp", r.backward_warp ? json(*r.backward_warp) : json(nullptr)},
           {"forward_cost", optional_json(r.forward_cost)},
           {"backward_cost", optional_json(r.backward_cost)}};
}

void to_json(json& j, const PairRecord& r) {
  j = json{{"fixed", r.fixed},
           {"moving", r.moving},
           {"retrieved", r.retrieved},
           {"similarity", optional_json(r.similarity)},
           {"registration", r.result ? json(*r.result) : json(nullptr)},
           {"gate", r.verdict},
           {"error", r.error.empty() ? json(nullptr) : json(r.error)}};
}

json pose_graph_json(const PoseGraph& g, const std::vector<std::string>& frame_files) {
  json frames = json::array();
  for (int i = 0; i < g.num_frames; ++i) {
    json f = frame_entry(i, g.globals[i]);
    if (i < static_cast<int>(frame_files.size())) f["file"] = frame_files[i];
    f["bridged"] = !g.bridged.empty() && g.bridged[i];
    f["excluded"] = !g.excluded.empty() && g.excluded[i];
    frames.push_back(f);
  }
  json constraints = json::array();
  for (const auto& c : g.constraints) {
    constraints.push_back(json{{"i", c.i},
                               {"j", c.j},
                               {"warp", c.warp},
                               {"accepted", c.accepted},
                               {"reason", to_string(c.reason)},
                               {"distance", optional_json(c.distance)}});
  }
  return json{{"num_frames", g.num_frames}, {"frames", frames}, {"constraints", constraints}};
}

json globals_json(const std::vector<WarpParams>& globals) {
  json frames = json::array();
  for (std::size_t i = 0; i < globals.size(); ++i) {
    frames.push_back(frame_entry(static_cast<int>(i), globals[i]));
  }
  return json{{"num_frames", globals.size()}, {"frames", frames}};
}

std::vector<WarpParams> globals_from_json(const json& j) {
  std::vector<WarpParams> out;
  for (const auto& f : j.at("frames")) out.push_back(f.get<WarpParams>());
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace fetomosaic
