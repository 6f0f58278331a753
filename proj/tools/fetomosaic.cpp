// fetomosaic: command line front end.
//
//   fetomosaic config-init [--synth] -o config.json
//   fetomosaic synth [--spec spec.json] --out dir
//   fetomosaic register-pair --fixed a.png --moving b.png [--out result.json]
//   fetomosaic similarity --frames dir --out dir
//   fetomosaic pipeline --config config.json [--frames dir] [--out dir]
//
// --config, --workers and --seed are accepted by every subcommand.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "fetomosaic/io.hpp"
#include "fetomosaic/pipeline.hpp"
#include "fetomosaic/serialize.hpp"
#include "fetomosaic/synth.hpp"

namespace fs = std::filesystem;
using namespace fetomosaic;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

PipelineConfig load_config(const GlobalOptions& g) {
  PipelineConfig cfg;
  if (!g.config.empty()) {
    from_json(read_json_file(g.config), cfg);
    // Relative paths in the config are taken from the config's directory.
    const fs::path base = fs::path(g.config).parent_path();
    if (!cfg.frames_dir.empty() && cfg.frames_dir.is_relative()) cfg.frames_dir = base / cfg.frames_dir;
    if (!cfg.output_dir.empty() && cfg.output_dir.is_relative()) cfg.output_dir = base / cfg.output_dir;
    if (cfg.fov.mode == FovConfig::Mode::File && cfg.fov.path.is_relative()) {
      cfg.fov.path = base / cfg.fov.path;
    }
  }
  if (g.workers) cfg.workers = *g.workers;
  if (g.seed) cfg.seed = *g.seed;
  cfg.apply_seed();
  return cfg;
}

struct SynthSpec {
  SceneSpec scene;
  TrajectorySpec trajectory;
  PerturbationSpec perturbation;
};

json synth_spec_json(const SynthSpec& s) {
  return json{{"scene", s.scene}, {"trajectory", s.trajectory}, {"perturbation", s.perturbation}};
}

SynthSpec load_synth_spec(const std::string& path) {
  SynthSpec s;
  if (path.empty()) return s;
  const json j = read_json_file(path);
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "synth spec must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "scene") {
      from_json(it.value(), s.scene);
    } else if (it.key() == "trajectory") {
      from_json(it.value(), s.trajectory);
    } else if (it.key() == "perturbation") {
      from_json(it.value(), s.perturbation);
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown key '" + it.key() + "' in synth spec");
    }
  }
  return s;
}

std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.png", i);
  return buf;
}

void cmd_config_init(const std::string& out, bool synth) {
  const json j = synth ? synth_spec_json(SynthSpec{}) : json(PipelineConfig{});
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(out, j);
  }
}

void cmd_synth(const std::string& spec_path, const fs::path& out, const GlobalOptions& g) {
  SynthSpec s = load_synth_spec(spec_path);
  if (g.seed) {
    s.scene.seed = *g.seed;
    s.trajectory.seed = *g.seed;
    s.perturbation.seed = *g.seed;
  }
  const SyntheticSequence seq = generate_sequence(s.scene, s.trajectory, s.perturbation);
  fs::create_directories(out / "frames");
  json files = json::array();
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const std::string name = frame_name(static_cast<int>(i));
    write_frame_png(out / "frames" / name, seq.frames[i]);
    files.push_back(name);
  }
  write_mask_png(out / "mask.png", seq.fov);
  json truth = globals_json(seq.truth);
  for (std::size_t i = 0; i < seq.truth.size(); ++i) truth["frames"][i]["file"] = files[i];
  json revisits = json::array();
  for (const auto& [a, b] : seq.revisits) revisits.push_back({a, b});
  truth["revisits"] = revisits;
  truth["spec"] = synth_spec_json(s);
  write_json_file(out / "truth.json", truth);
}

void cmd_register_pair(const fs::path& fixed_path, const fs::path& moving_path,
                       const std::string& out, const GlobalOptions& g) {
  const PipelineConfig cfg = load_config(g);
  cfg.validate();
  Frame a = read_frame_png(fixed_path, 0);
  Frame b = read_frame_png(moving_path, 1);
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorCode::LengthMismatch, "frames differ in size");
  }
  const Mask mask = cfg.fov.make(a.width, a.height);
  a.mask = mask;
  b.mask = mask;
  const auto& reg = cfg.registration;
  const Pyramid pa = build_pyramid(a, reg.num_levels, reg.cost.grad_eps);
  const Pyramid pb = build_pyramid(b, reg.num_levels, reg.cost.grad_eps);
  const PairRecord rec = register_and_gate(pa, pb, 0, 1, reg, cfg.gate);
  const json j = rec;
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(out, j);
  }
  if (!rec.result) throw Error(ErrorCode::InvalidArgument, "registration failed: " + rec.error);
}

void cmd_similarity(const fs::path& frames_dir, const fs::path& out, const GlobalOptions& g) {
  const PipelineConfig cfg = load_config(g);
  cfg.validate();
  std::vector<std::string> names;
  const auto frames = load_frames(frames_dir, cfg.fov, &names);
  const RetrievalOutput r = run_retrieval(frames, cfg.retrieval, cfg.seed, cfg.workers);
  fs::create_directories(out);

  const auto n = r.similarity.rows();
  std::ofstream csv(out / "similarity.csv");
  if (!csv) throw Error(ErrorCode::Io, "cannot write similarity.csv");
  csv << std::setprecision(17);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) csv << (j ? "," : "") << r.similarity(i, j);
    csv << '\n';
  }

  // Nearest-neighbour upscaled so short sequences stay visible.
  const int cell = std::max<int>(1, static_cast<int>(512 / std::max<Eigen::Index>(n, 1)));
  const int side = static_cast<int>(n) * cell;
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double v = std::clamp(r.similarity(y / cell, x / cell), 0.0, 1.0);
      gray[static_cast<std::size_t>(y) * side + x] = static_cast<std::uint8_t>(std::lround(255 * v));
    }
  }
  write_gray_png(out / "similarity.png", side, side, gray);

  json pairs = json::array();
  for (const auto& [i, j] : r.pairs) pairs.push_back({{"i", i}, {"j", j}, {"similarity", r.similarity(i, j)}});
  write_json_file(out / "retrieved.json", json{{"frames", names},
                                               {"vocabulary_size", r.vocabulary_size},
                                               {"num_descriptors", r.num_descriptors},
                                               {"pairs", pairs}});
}

void cmd_pipeline(const std::string& frames, const std::string& out, const GlobalOptions& g) {
  PipelineConfig cfg = load_config(g);
  if (!frames.empty()) cfg.frames_dir = frames;
  if (!out.empty()) cfg.output_dir = out;
  if (cfg.frames_dir.empty() || cfg.output_dir.empty()) {
    throw Error(ErrorCode::InvalidArgument, "pipeline needs frames_dir and output_dir");
  }
  const PipelineOutput res = run_pipeline_on_disk(cfg);
  int accepted = 0;
  for (const auto& p : res.pairs) accepted += p.verdict.accepted;
  std::cout << res.bundle.graph.num_frames << " frames, " << accepted << "/" << res.pairs.size()
            << " pairs accepted, bundle cost " << res.bundle.final_cost << '\n';
}

void print_error(const std::string& stage, const Error& e) {
  std::cerr << json{{"stage", stage}, {"code", to_string(e.code())}, {"message", e.what()}}.dump()
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar mosaicking of video frames"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "Pipeline config (JSON)");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Overrides every seed in the config");

  std::string out, spec, fixed, moving, frames;
  bool synth_spec = false;

  auto* init = app.add_subcommand("config-init", "Write a config with every default");
  init->add_option("-o,--out", out, "Output file (stdout if omitted)");
  init->add_flag("--synth", synth_spec, "Write a synth spec instead");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence");
  synth->add_option("--spec", spec, "Synth spec (JSON); defaults if omitted");
  synth->add_option("--out", out, "Output directory")->required();

  auto* pair = app.add_subcommand("register-pair", "Register two frames and gate the result");
  pair->add_option("--fixed", fixed, "Fixed frame (PNG)")->required()->check(CLI::ExistingFile);
  pair->add_option("--moving", moving, "Moving frame (PNG)")->required()->check(CLI::ExistingFile);
  pair->add_option("--out", out, "Output JSON (stdout if omitted)");

  auto* sim = app.add_subcommand("similarity", "Bag-of-words similarity matrix");
  sim->add_option("--frames", frames, "Frame directory")->required()->check(CLI::ExistingDirectory);
  sim->add_option("--out", out, "Output directory")->required();

  auto* pipe = app.add_subcommand("pipeline", "Full mosaicking pipeline");
  pipe->add_option("--frames", frames, "Frame directory (overrides config)");
  pipe->add_option("--out", out, "Output directory (overrides config)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*init) cmd_config_init(out, synth_spec);
    if (*synth) cmd_synth(spec, out, g);
    if (*pair) cmd_register_pair(fixed, moving, out, g);
    if (*sim) cmd_similarity(frames, out, g);
    if (*pipe) cmd_pipeline(frames, out, g);
  } catch (const StageError& e) {
    print_error(e.stage, e);
    return 1;
  } catch (const Error& e) {
    print_error(app.get_subcommands().front()->get_name(), e);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"stage", app.get_subcommands().front()->get_name()},
                      {"code", "Internal"},
                      {"message", e.what()}}
                     .dump()
              << '\n';
    return 1;
  }
  return 0;
}
