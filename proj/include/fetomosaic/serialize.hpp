#pragma once

// JSON schemas for configs and results. Config readers accept partial
// objects (missing keys keep their defaults) and reject unknown keys.

#include <json.hpp>

#include <filesystem>

#include "fetomosaic/pipeline.hpp"
#include "fetomosaic/synth.hpp"

namespace fetomosaic {

using nlohmann::json;

void to_json(json& j, const WarpParams& w);
void from_json(const json& j, WarpParams& w);

void to_json(json& j, const CostOptions& c);
void from_json(const json& j, CostOptions& c);

// The gate seed is not part of the schema; it comes from the pipeline seed.
void to_json(json& j, const GateConfig& c);
void from_json(const json& j, GateConfig& c);

void to_json(json& j, const RegistrationConfig& c);
void from_json(const json& j, RegistrationConfig& c);

void to_json(json& j, const LmConfig& c);
void from_json(const json& j, LmConfig& c);

void to_json(json& j, const RetrievalConfig& c);
void from_json(const json& j, RetrievalConfig& c);

void to_json(json& j, const CompositorConfig& c);
void from_json(const json& j, CompositorConfig& c);

void to_json(json& j, const FovConfig& c);
void from_json(const json& j, FovConfig& c);

void to_json(json& j, const PipelineConfig& c);
void from_json(const json& j, PipelineConfig& c);

void to_json(json& j, const SceneSpec& s);
void from_json(const json& j, SceneSpec& s);

void to_json(json& j, const TrajectorySpec& s);
void from_json(const json& j, TrajectorySpec& s);

void to_json(json& j, const PerturbationSpec& s);
void from_json(const json& j, PerturbationSpec& s);

void to_json(json& j, const GateVerdict& v);
void to_json(json& j, const LevelDiagnostics& d);
void to_json(json& j, const RegistrationResult& r);
void to_json(json& j, const PairRecord& r);

// {"num_frames", "frames": [{index, p, kind, bridged, excluded}], "constraints": [...]}
json pose_graph_json(const PoseGraph& g, const std::vector<std::string>& frame_files = {});
// Globals only, same per-frame layout as pose_graph_json.
json globals_json(const std::vector<WarpParams>& globals);
std::vector<WarpParams> globals_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace fetomosaic
