#include "fetomosaic/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

#include "fetomosaic/io.hpp"
#include "fetomosaic/serialize.hpp"

namespace fetomosaic {

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
auto run_stage(const char* name, std::vector<StageTiming>& timing, F&& fn) {
  const auto start = Clock::now();
  auto record = [&] {
    timing.push_back({name, std::chrono::duration<double>(Clock::now() - start).count()});
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record();
    } else {
      auto out = fn();
      record();
      return out;
    }
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

// Number of distinct rows; k-means cannot place more centroids than that.
int distinct_rows(const Eigen::MatrixXd& data) {
  std::vector<std::vector<double>> rows(data.rows());
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    rows[r].assign(data.cols(), 0.0);
    for (Eigen::Index c = 0; c < data.cols(); ++c) rows[r][c] = data(r, c);
  }
  std::sort(rows.begin(), rows.end());
  return static_cast<int>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

}  // namespace

void RetrievalConfig::validate() const {
  const bool ok = vocabulary_size >= 1 && keypoint_step >= 1 && threshold >= 0.0 &&
                  (!budget || *budget >= 0) && min_gap >= 2;
  if (!ok) throw Error(ErrorCode::InvalidArgument, "invalid retrieval configuration");
}

Mask FovConfig::make(int width, int height) const {
  switch (mode) {
    case Mode::Full:
      return full_mask(width, height);
    case Mode::Circle: {
      const Point2 c = center.value_or(Point2(0.5 * (width - 1), 0.5 * (height - 1)));
      const double r = radius.value_or(0.5 * std::min(width, height) - 0.5);
      if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "fov radius must be positive");
      return circular_mask(width, height, c.x(), c.y(), r);
    }
    case Mode::File: {
      Mask m = read_mask_png(path);
      if (m.cols() != width || m.rows() != height) {
        throw Error(ErrorCode::LengthMismatch, "fov mask size differs from the frames");
      }
      return m;
    }
  }
  return full_mask(width, height);
}

void PipelineConfig::apply_seed() {
  gate.rng_seed = seed;
  registration.level_gate = gate;
}

void PipelineConfig::validate() const {
  registration.validate();
  gate.validate();
  retrieval.validate();
  bundle.validate();
  if (compositor.stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
  if (workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int count = std::clamp(workers, 1, n);
  if (count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::optional<Constraint> PairRecord::constraint() const {
  if (!result) return std::nullopt;
  Constraint c;
  c.i = moving;
  c.j = fixed;
  c.warp = result->warp;
  c.accepted = verdict.accepted;
  c.reason = verdict.reason;
  return c;
}

PairRecord register_and_gate(const Pyramid& fixed, const Pyramid& moving, int fixed_index,
                             int moving_index, const RegistrationConfig& reg,
                             const GateConfig& gate) {
  PairRecord rec;
  rec.fixed = fixed_index;
  rec.moving = moving_index;
  try {
    rec.result = register_pair(fixed, moving, reg);
    const auto& l0 = fixed.levels.front();
    rec.verdict =
        gate_registration(*rec.result, fixed, moving, RefGrid(l0.width(), l0.height(), 3), gate,
                          reg.cost);
  } catch (const Error& e) {
    rec.result.reset();
    rec.verdict = failed_verdict();
    rec.error = e.what();
  }
  return rec;
}

RetrievalOutput run_retrieval(const std::vector<Frame>& frames, const RetrievalConfig& cfg,
                              std::uint64_t seed, int workers) {
  cfg.validate();
  const int n = static_cast<int>(frames.size());
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "retrieval needs at least two frames");

  std::vector<std::vector<Descriptor>> per_frame(n);
  parallel_for(n, workers, [&](int i) {
    per_frame[i] = extract_descriptors(to_grayscale(frames[i]), frames[i].mask, cfg.keypoint_step);
  });
  std::vector<Descriptor> all;
  for (const auto& d : per_frame) all.insert(all.end(), d.begin(), d.end());
  if (all.empty()) throw Error(ErrorCode::TooFewDescriptors, "no descriptor in any frame");

  const Eigen::MatrixXd data = descriptor_matrix(all);
  const int k = std::min(cfg.vocabulary_size, distinct_rows(data));
  const Vocabulary vocab = build_vocabulary(data, k, seed);

  std::vector<Signature> sigs(n);
  parallel_for(n, workers, [&](int i) { sigs[i] = compute_signature(per_frame[i], vocab); });

  RetrievalOutput out;
  out.similarity = build_similarity_matrix(sigs);
  out.vocabulary_size = vocab.size();
  out.num_descriptors = static_cast<int>(all.size());
  out.pairs = select_pairs(out.similarity, cfg.threshold, cfg.budget_for(n), cfg.min_gap);
  return out;
}

PipelineOutput run_pipeline(const std::vector<Frame>& frames, const PipelineConfig& config) {
  PipelineConfig cfg = config;
  cfg.apply_seed();
  PipelineOutput out;
  auto& timing = out.timing;

  run_stage("config", timing, [&] {
    cfg.validate();
    if (frames.size() < 2) throw Error(ErrorCode::InvalidArgument, "pipeline needs >= 2 frames");
    for (const auto& f : frames) {
      if (f.width != frames[0].width || f.height != frames[0].height) {
        throw Error(ErrorCode::LengthMismatch, "frames differ in size");
      }
    }
  });
  const int n = static_cast<int>(frames.size());
  const int width = frames[0].width;
  const int height = frames[0].height;

  std::vector<Pyramid> pyramids(n);
  run_stage("pyramids", timing, [&] {
    parallel_for(n, cfg.workers, [&](int i) {
      pyramids[i] = build_pyramid(frames[i], cfg.registration.num_levels,
                                  cfg.registration.cost.grad_eps);
    });
  });

  run_stage("consecutive", timing, [&] {
    std::vector<PairRecord> recs(n - 1);
    parallel_for(n - 1, cfg.workers, [&](int k) {
      recs[k] = register_and_gate(pyramids[k], pyramids[k + 1], k, k + 1, cfg.registration,
                                  cfg.gate);
    });
    out.pairs = std::move(recs);
  });

  const bool retrieve = cfg.retrieval.enabled && cfg.retrieval.budget_for(n) > 0 &&
                        n > cfg.retrieval.min_gap;
  if (retrieve) {
    out.retrieval = run_stage("retrieval", timing, [&] {
      return run_retrieval(frames, cfg.retrieval, cfg.seed, cfg.workers);
    });
    run_stage("retrieved", timing, [&] {
      const auto& pairs = out.retrieval.pairs;
      std::vector<PairRecord> recs(pairs.size());
      parallel_for(static_cast<int>(pairs.size()), cfg.workers, [&](int k) {
        const auto [i, j] = pairs[k];
        recs[k] = register_and_gate(pyramids[i], pyramids[j], i, j, cfg.registration, cfg.gate);
        recs[k].retrieved = true;
        recs[k].similarity = out.retrieval.similarity(i, j);
      });
      out.pairs.insert(out.pairs.end(), recs.begin(), recs.end());
    });
  }

  PoseGraph graph;
  run_stage("chain", timing, [&] {
    graph.num_frames = n;
    for (const auto& r : out.pairs) {
      if (auto c = r.constraint()) graph.constraints.push_back(*c);
    }
    out.chain = sequential_chain(n, graph.constraints);
    graph.globals = out.chain.globals;
    graph.bridged = out.chain.bridged;
  });

  out.bundle = run_stage("bundle", timing,
                         [&] { return bundle_adjust(graph, RefGrid(width, height, 3), cfg.bundle); });

  out.mosaic = run_stage("composite", timing, [&] {
    std::vector<bool> include(n);
    for (int i = 0; i < n; ++i) include[i] = !out.bundle.graph.excluded[i];
    return composite(frames, out.bundle.graph.globals, cfg.compositor.mode, cfg.compositor.stride,
                     include);
  });
  return out;
}

std::vector<Frame> load_frames(const std::filesystem::path& dir, const FovConfig& fov,
                               std::vector<std::string>* names) {
  const auto files = list_frame_files(dir);
  if (files.empty()) throw Error(ErrorCode::Io, "no PNG frames in " + dir.string());
  std::vector<Frame> frames;
  Mask mask;
  for (std::size_t i = 0; i < files.size(); ++i) {
    Frame f = read_frame_png(files[i], static_cast<int>(i));
    if (i == 0) mask = fov.make(f.width, f.height);
    if (f.width != mask.cols() || f.height != mask.rows()) {
      throw Error(ErrorCode::LengthMismatch, files[i].string() + " differs in size");
    }
    f.mask = mask;
    frames.push_back(std::move(f));
    if (names) names->push_back(files[i].filename().string());
  }
  return frames;
}

namespace {

json report_json(const PipelineOutput& out) {
  int consecutive = 0, retrieved = 0, accepted = 0, rejected = 0, failed = 0;
  for (const auto& r : out.pairs) {
    (r.retrieved ? retrieved : consecutive)++;
    if (!r.result) {
      ++failed;
    } else if (r.verdict.accepted) {
      ++accepted;
    } else {
      ++rejected;
    }
  }
  const auto& g = out.bundle.graph;
  const auto count = [](const std::vector<bool>& v) {
    return static_cast<int>(std::count(v.begin(), v.end(), true));
  };
  json timing = json::object();
  for (const auto& t : out.timing) timing[t.stage] = t.seconds;
  json mosaic = nullptr;
  if (out.mosaic) mosaic = json{{"width", out.mosaic->width()}, {"height", out.mosaic->height()}};
  return json{{"num_frames", g.num_frames},
              {"pairs",
               {{"consecutive", consecutive},
                {"retrieved", retrieved},
                {"accepted", accepted},
                {"rejected", rejected},
                {"failed", failed}}},
              {"bridged", count(g.bridged)},
              {"excluded", count(g.excluded)},
              {"retrieval",
               {{"vocabulary_size", out.retrieval.vocabulary_size},
                {"num_descriptors", out.retrieval.num_descriptors}}},
              {"bundle",
               {{"initial_cost", out.bundle.initial_cost},
                {"final_cost", out.bundle.final_cost},
                {"iterations", out.bundle.iterations},
                {"converged", out.bundle.converged}}},
              {"mosaic", mosaic},
              {"timing", timing}};
}

void write_error(const std::filesystem::path& dir, const std::string& stage, const Error& e) {
  try {
    std::filesystem::create_directories(dir);
    write_json_file(dir / "error.json", json{{"stage", stage},
                                             {"code", to_string(e.code())},
                                             {"message", e.what()}});
  } catch (...) {
    // The original error is what matters.
  }
}

}  // namespace

PipelineOutput run_pipeline_on_disk(const PipelineConfig& cfg) {
  std::vector<std::string> names;
  std::vector<Frame> frames;
  try {
    frames = load_frames(cfg.frames_dir, cfg.fov, &names);
  } catch (const Error& e) {
    write_error(cfg.output_dir, "load", e);
    throw StageError("load", e);
  }

  PipelineOutput out;
  try {
    out = run_pipeline(frames, cfg);
  } catch (const StageError& e) {
    write_error(cfg.output_dir, e.stage, e);
    throw;
  }
  out.frame_files = names;

  try {
    std::filesystem::create_directories(cfg.output_dir);
    write_json_file(cfg.output_dir / "pairs.json", json{{"pairs", out.pairs}});
    write_json_file(cfg.output_dir / "posegraph.json", pose_graph_json(out.bundle.graph, names));
    if (out.mosaic) {
      write_rgba_png(cfg.output_dir / "mosaic.png", out.mosaic->width(), out.mosaic->height(),
                     out.mosaic->rgba());
    }
    write_json_file(cfg.output_dir / "report.json", report_json(out));
  } catch (const Error& e) {
    write_error(cfg.output_dir, "output", e);
    throw StageError("output", e);
  }
  return out;
}

}  // namespace fetomosaic
