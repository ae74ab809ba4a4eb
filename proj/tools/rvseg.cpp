// Command-line front end: projection statistics, label refinement, metrics,
// synthetic sequence generation, and timing.

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rvseg/dataio.hpp"
#include "rvseg/eval.hpp"
#include "rvseg/geometry.hpp"
#include "rvseg/rangeview.hpp"
#include "rvseg/refine.hpp"
#include "rvseg/synth.hpp"
#include "rvseg/tca.hpp"
#include "rvseg/types.hpp"

namespace fs = std::filesystem;
using namespace rvseg;

namespace {

struct CommonOpts {
  std::string data_root;
  std::string sequence = "00";
  int start_frame = 0;
  int end_frame = -1;  // inclusive; -1 = all available
  std::string remap_path;
  std::string out_path;
};

void add_data_opts(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--data", o.data_root,
                  "dataset root (fallback: RVSEG_DATA_ROOT env var)");
  cmd->add_option("--seq", o.sequence, "sequence id, e.g. 00");
  cmd->add_option("--start", o.start_frame, "first frame (inclusive)");
  cmd->add_option("--end", o.end_frame, "last frame (inclusive, -1 = all)");
  cmd->add_option("--remap", o.remap_path, "label remap config file");
}

std::string resolved_root(const CommonOpts& o) {
  if (!o.data_root.empty()) return o.data_root;
  if (const char* env = std::getenv("RVSEG_DATA_ROOT")) return env;
  throw std::invalid_argument("no dataset root: pass --data or set RVSEG_DATA_ROOT");
}

std::vector<int> frame_list(const SequencePaths& paths, const CommonOpts& o) {
  const fs::path dir = paths.seq_dir() / "velodyne";
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("missing scan directory " + dir.string());
  }
  int last = o.end_frame;
  if (last < 0) {
    last = -1;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".bin") {
        last = std::max(last, std::stoi(e.path().stem().string()));
      }
    }
  }
  std::vector<int> frames;
  for (int f = o.start_frame; f <= last; ++f) {
    if (fs::exists(paths.scan(f))) frames.push_back(f);
  }
  if (frames.empty()) throw std::runtime_error("empty frame range");
  return frames;
}

std::optional<LabelMap> load_remap(const CommonOpts& o) {
  if (o.remap_path.empty()) return std::nullopt;
  return LabelMap::load(o.remap_path);
}

void emit(std::ostream& os, const std::string& key, double value) {
  os << key << "=" << value << "\n";
}

struct Reporter {
  std::ofstream file;
  explicit Reporter(const std::string& path) {
    if (!path.empty()) {
      file.open(path, std::ios::trunc);
      if (!file) throw std::runtime_error("cannot open report file " + path);
    }
  }
  template <typename T>
  void line(const std::string& key, const T& value) {
    std::cout << key << "=" << value << "\n";
    if (file.is_open()) file << key << "=" << value << "\n";
  }
};

// ----------------------------------------------------------------------------

int cmd_project(const CommonOpts& o, const ProjectionConfig& cfg, int frame,
                const std::string& dump_path) {
  const SequencePaths paths{fs::path(resolved_root(o)), o.sequence};
  const auto scan = read_scan(paths.scan(frame).string());
  const auto ri = project(scan, cfg);
  if (!dump_path.empty()) write_range_image(dump_path, ri);
  const auto s = occlusion_stats(ri);
  Reporter rep(o.out_path);
  rep.line("frame", frame);
  rep.line("total_points", s.total_points);
  rep.line("projected_points", s.projected_points);
  rep.line("occluded_points", s.occluded_points);
  rep.line("occluded_fraction", s.occluded_fraction);
  rep.line("pixels_multi", s.pixels_multi);
  rep.line("clamped_points", s.clamped_points);
  return 0;
}

int cmd_stats(const CommonOpts& o, const ProjectionConfig& cfg) {
  const SequencePaths paths{fs::path(resolved_root(o)), o.sequence};
  const auto frames = frame_list(paths, o);
  Reporter rep(o.out_path);
  OcclusionStats agg;
  for (int f : frames) {
    const auto scan = read_scan(paths.scan(f).string());
    const auto s = occlusion_stats(project(scan, cfg));
    rep.line("frame_" + SequencePaths::frame_name(f) + "_occluded_fraction",
             s.occluded_fraction);
    agg.total_points += s.total_points;
    agg.projected_points += s.projected_points;
    agg.occluded_points += s.occluded_points;
    agg.pixels_multi += s.pixels_multi;
    agg.clamped_points += s.clamped_points;
  }
  agg.occluded_fraction =
      agg.total_points ? double(agg.occluded_points) / double(agg.total_points) : 0.0;
  rep.line("frames", frames.size());
  rep.line("total_points", agg.total_points);
  rep.line("projected_points", agg.projected_points);
  rep.line("occluded_points", agg.occluded_points);
  rep.line("occluded_fraction", agg.occluded_fraction);
  rep.line("pixels_multi", agg.pixels_multi);
  rep.line("clamped_points", agg.clamped_points);
  return 0;
}

struct RefineOpts {
  std::string method = "mvp";
  std::string pred_dir;  // defaults to the sequence labels directory
  RefineParams params;
  int knn_k = 5;
  int knn_window = 5;
  double knn_cutoff = 1.0;
  int nla_patch = 7;
  double nla_tau = 1.0;
};

/// Streaming MVP over one sequence: frame t is refined using frames
/// max(0, t-L+1)..t aligned into frame t; causal by construction.
class MvpPipeline {
 public:
  MvpPipeline(const RefineParams& params, std::vector<RigidTransform> relative)
      : params_(params), relative_(std::move(relative)) {}

  std::vector<std::uint32_t> process(int frame_idx, LabeledScan scan) {
    history_.push_back(std::move(scan));
    if (history_.size() > params_.window_scans) history_.pop_front();

    // reference frame is the newest scan, so re-accumulate the whole window
    SparseVoteGrid grid(params_.voxel_resolution, params_.num_classes,
                        params_.ignore_label);
    grid.reserve(history_.size() * history_.back().size() / 4 + 1);
    const std::size_t t = static_cast<std::size_t>(frame_idx) + 1;  // 1-based
    ScanWindow window(params_.window_scans);
    for (std::size_t k = 0; k < history_.size(); ++k) {
      const std::size_t j = t - history_.size() + 1 + k;
      const auto chain = compose_chain(relative_, j, t);
      window.push(grid, k + 1 == history_.size()
                            ? history_.back()
                            : transform_cloud(history_[k], chain));
    }
    return mvp_refine(grid, history_.back(), params_);
  }

 private:
  RefineParams params_;
  std::vector<RigidTransform> relative_;
  std::deque<LabeledScan> history_;
};

int cmd_refine(const CommonOpts& o, const RefineOpts& r, const ProjectionConfig& cfg) {
  if (o.out_path.empty()) throw std::invalid_argument("refine: --out directory required");
  const SequencePaths paths{fs::path(resolved_root(o)), o.sequence};
  const auto frames = frame_list(paths, o);
  const auto remap = load_remap(o);
  const LabelMap* map = remap ? &*remap : nullptr;
  const fs::path pred_dir =
      r.pred_dir.empty() ? paths.seq_dir() / "labels" : fs::path(r.pred_dir);
  fs::create_directories(o.out_path);

  std::optional<MvpPipeline> mvp;
  if (r.method == "mvp") {
    const auto poses =
        read_poses(paths.poses().string(),
                   fs::exists(paths.calib()) ? paths.calib().string() : "");
    if (poses.size() < static_cast<std::size_t>(frames.back()) + 1) {
      throw std::runtime_error("pose count does not cover the frame range");
    }
    std::vector<RigidTransform> rel;
    for (std::size_t j = 1; j < poses.size(); ++j) {
      rel.push_back(relative_transform(poses[j - 1], poses[j]));
    }
    mvp.emplace(r.params, std::move(rel));
  }

  for (int f : frames) {
    LabeledScan scan = read_scan(paths.scan(f).string());
    const auto pred_path = pred_dir / (SequencePaths::frame_name(f) + ".label");
    scan.labels = read_labels(pred_path.string(), map);
    if (scan.labels.size() != scan.points.size()) {
      throw std::runtime_error("prediction length mismatch at frame " +
                               std::to_string(f));
    }
    std::vector<std::uint32_t> refined;
    if (r.method == "mvp") {
      refined = mvp->process(f, scan);
    } else {
      const auto ri = project(scan, cfg);
      const auto img = winner_label_map(ri, scan.labels, r.params.ignore_label);
      if (r.method == "knn") {
        refined = knn_refine(ri, img, scan, r.knn_k, r.knn_window, r.knn_cutoff,
                             r.params.ignore_label);
      } else if (r.method == "nla") {
        refined = nla_refine(ri, img, scan, r.nla_patch, r.nla_tau,
                             r.params.ignore_label);
      } else {
        throw std::invalid_argument("unknown method " + r.method);
      }
    }
    const fs::path out =
        fs::path(o.out_path) / (SequencePaths::frame_name(f) + ".label");
    write_labels(out.string(), refined, map);
  }
  return 0;
}

int cmd_eval(const std::string& gt_dir, const std::string& pred_dir,
             std::uint32_t num_classes, bool include_absent, const CommonOpts& o) {
  const auto remap = load_remap(o);
  const LabelMap* map = remap ? &*remap : nullptr;
  ConfusionMatrix cm(num_classes);
  bool any = false;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(gt_dir)) {
    if (e.path().extension() == ".label") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& gt_path : files) {
    const fs::path pred_path = fs::path(pred_dir) / gt_path.filename();
    if (!fs::exists(pred_path)) {
      throw std::runtime_error("missing prediction " + pred_path.string());
    }
    cm.accumulate(read_labels(gt_path.string(), map),
                  read_labels(pred_path.string(), map));
    any = true;
  }
  if (!any) throw std::runtime_error("no .label files in " + gt_dir);
  Reporter rep(o.out_path);
  const auto report = cm.iou(include_absent);
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    if (report.included[c]) rep.line("iou_" + std::to_string(c), report.per_class[c]);
  }
  rep.line("miou", report.miou);
  return 0;
}

int cmd_synth(const CommonOpts& o, int frames, double step, int densify,
              const ProjectionConfig& cfg, double max_range, bool predictions,
              bool enclosed) {
  if (o.out_path.empty()) throw std::invalid_argument("synth: --out directory required");
  SensorModel model;
  model.cfg = cfg;
  model.max_range = max_range;
  const auto seq = generate_sequence(billboard_terrain_scene(enclosed),
                                     straight_trajectory(frames, step), model, densify);
  const SequencePaths paths{fs::path(o.out_path), o.sequence};
  write_sequence(paths, seq);
  if (predictions) {
    // ground truth corrupted only by range-image re-projection: the input the
    // refinement experiments expect
    fs::create_directories(paths.seq_dir() / "predictions");
    for (std::size_t f = 0; f < seq.scans.size(); ++f) {
      const auto ri = project(seq.scans[f], cfg);
      const auto img = winner_label_map(ri, seq.scans[f].labels);
      const auto pred = unproject_labels(img, ri, seq.scans[f]);
      write_labels((paths.seq_dir() / "predictions" /
                    (SequencePaths::frame_name(static_cast<int>(f)) + ".label"))
                       .string(),
                   pred);
    }
  }
  std::size_t points = 0, occluded = 0;
  for (std::size_t f = 0; f < seq.scans.size(); ++f) {
    points += seq.scans[f].size();
    occluded += seq.occluded[f].size();
  }
  std::cout << "frames=" << seq.scans.size() << "\n"
            << "points=" << points << "\n"
            << "occluded_points=" << occluded << "\n";
  return 0;
}

int cmd_bench(const CommonOpts& o, const RefineOpts& r, const ProjectionConfig& cfg) {
  const SequencePaths paths{fs::path(resolved_root(o)), o.sequence};
  const auto frames = frame_list(paths, o);
  const auto remap = load_remap(o);
  const LabelMap* map = remap ? &*remap : nullptr;
  const auto poses = read_poses(paths.poses().string(),
                                fs::exists(paths.calib()) ? paths.calib().string() : "");
  std::vector<RigidTransform> rel;
  for (std::size_t j = 1; j < poses.size(); ++j) {
    rel.push_back(relative_transform(poses[j - 1], poses[j]));
  }
  MvpPipeline mvp(r.params, std::move(rel));

  using clock = std::chrono::steady_clock;
  double project_ms = 0.0, refine_ms = 0.0;
  std::size_t points = 0;
  for (int f : frames) {
    LabeledScan scan = read_scan(paths.scan(f).string());
    scan.labels =
        read_labels((paths.seq_dir() / "labels" /
                     (SequencePaths::frame_name(f) + ".label")).string(), map);
    points += scan.size();

    auto t0 = clock::now();
    const auto ri = project(scan, cfg);
    auto t1 = clock::now();
    const auto refined = mvp.process(f, std::move(scan));
    auto t2 = clock::now();
    (void)ri;
    (void)refined;
    project_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    refine_ms += std::chrono::duration<double, std::milli>(t2 - t1).count();
  }
  Reporter rep(o.out_path);
  rep.line("frames", frames.size());
  rep.line("points_per_frame", points / frames.size());
  rep.line("project_ms_per_frame", project_ms / frames.size());
  rep.line("refine_ms_per_frame", refine_ms / frames.size());
  rep.line("total_ms_per_frame", (project_ms + refine_ms) / frames.size());
  return 0;
}

int cmd_tca_demo(std::uint64_t seed, const CommonOpts& o) {
  const int d = 4, hidden = 16;
  const auto params = AttentionParams::random(d, hidden, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  FeatureGrid f_t(3, 3, d), f_prev(3, 3, d);
  for (auto& v : f_t.data) v = dist(rng);
  for (auto& v : f_prev.data) v = dist(rng);

  Reporter rep(o.out_path);
  const auto w = attention_weights(f_t, f_prev, params);
  double worst_row = 0.0;
  for (std::size_t i = 0; i < f_t.cells(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < f_prev.cells(); ++j) sum += w[i * f_prev.cells() + j];
    worst_row = std::max(worst_row, std::abs(sum - 1.0));
  }
  rep.line("rows_sum_to_one", worst_row < 1e-6 ? "pass" : "fail");

  const auto zero = feed_forward(f_t, AttentionParams::zeros(d, hidden));
  rep.line("zero_ffn_identity", zero.data == f_t.data ? "pass" : "fail");

  FeatureGrid constant(3, 3, d);
  for (std::size_t i = 0; i < constant.cells(); ++i) {
    for (int c = 0; c < d; ++c) constant.data[i * d + c] = 0.5 * (c + 1);
  }
  const auto through = cross_attention(
      f_t, constant, AttentionParams::identity_projections(d, hidden));
  double worst_const = 0.0;
  for (std::size_t i = 0; i < through.cells(); ++i) {
    for (int c = 0; c < d; ++c) {
      worst_const =
          std::max(worst_const, std::abs(through.data[i * d + c] - 0.5 * (c + 1)));
    }
  }
  rep.line("constant_value_passthrough", worst_const < 1e-6 ? "pass" : "fail");

  const auto out = cross_attention(f_t, f_prev, params);
  const auto ffn = feed_forward(out, params);
  bool finite = true;
  for (auto v : ffn.data) finite = finite && std::isfinite(v);
  rep.line("forward_pass_finite", finite ? "pass" : "fail");
  return worst_row < 1e-6 && zero.data == f_t.data && worst_const < 1e-6 && finite
             ? 0
             : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal range-image LiDAR segmentation toolkit"};
  app.require_subcommand(1);

  CommonOpts common;
  ProjectionConfig cfg;
  RefineOpts refine_opts;
  int frame = 0;
  int synth_frames = 20;
  double synth_step = 0.5;
  int synth_densify = 2;
  double synth_max_range = 400.0;
  std::string dump_path, gt_dir, pred_dir;
  std::uint32_t num_classes = 20;
  bool include_absent = false;
  std::uint64_t tca_seed = 7;

  auto add_projection_opts = [&](CLI::App* cmd) {
    cmd->add_option("--height", cfg.height, "range image height (beams)");
    cmd->add_option("--width", cfg.width, "range image width (azimuth bins)");
    cmd->add_option("--fov-up", cfg.fov_up_deg, "upper field of view, degrees");
    cmd->add_option("--fov-down", cfg.fov_down_deg, "lower field of view, degrees");
    cmd->add_flag("--drop-out-of-fov", cfg.drop_out_of_fov,
                  "drop out-of-FOV points instead of clamping");
  };
  auto add_refine_opts = [&](CLI::App* cmd) {
    cmd->add_option("--method", refine_opts.method, "mvp | knn | nla");
    cmd->add_option("--pred", refine_opts.pred_dir,
                    "directory of prediction .label files");
    cmd->add_option("--voxel", refine_opts.params.voxel_resolution,
                    "voxel resolution, meters");
    cmd->add_option("--window-scans", refine_opts.params.window_scans,
                    "sliding window length L");
    cmd->add_option("--classes", refine_opts.params.num_classes, "class count");
    cmd->add_option("--knn-k", refine_opts.knn_k, "k for knn refinement");
    cmd->add_option("--knn-window", refine_opts.knn_window, "knn patch size");
    cmd->add_option("--knn-cutoff", refine_opts.knn_cutoff, "knn range cutoff, meters");
    cmd->add_option("--nla-patch", refine_opts.nla_patch, "nla patch size");
    cmd->add_option("--nla-tau", refine_opts.nla_tau, "nla occlusion threshold, meters");
  };

  auto* project_cmd = app.add_subcommand("project", "project one scan, print stats");
  add_data_opts(project_cmd, common);
  add_projection_opts(project_cmd);
  project_cmd->add_option("--frame", frame, "frame index");
  project_cmd->add_option("--dump", dump_path, "write range image dump (RNGI)");
  project_cmd->add_option("--out", common.out_path, "report file");

  auto* stats_cmd = app.add_subcommand("stats", "occlusion statistics over frames");
  add_data_opts(stats_cmd, common);
  add_projection_opts(stats_cmd);
  stats_cmd->add_option("--out", common.out_path, "report file");

  auto* refine_cmd = app.add_subcommand("refine", "post-process predicted labels");
  add_data_opts(refine_cmd, common);
  add_projection_opts(refine_cmd);
  add_refine_opts(refine_cmd);
  refine_cmd->add_option("--out", common.out_path, "output directory for .label files")
      ->required();

  auto* eval_cmd = app.add_subcommand("eval", "IoU / mIoU between label directories");
  eval_cmd->add_option("--gt", gt_dir, "ground-truth label directory")->required();
  eval_cmd->add_option("--pred", pred_dir, "prediction label directory")->required();
  eval_cmd->add_option("--classes", num_classes, "class count");
  eval_cmd->add_option("--remap", common.remap_path, "label remap config file");
  eval_cmd->add_flag("--include-absent-classes", include_absent,
                     "count zero-union classes as IoU 0");
  eval_cmd->add_option("--out", common.out_path, "report file");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic sequence");
  synth_cmd->add_option("--out", common.out_path, "output dataset root")->required();
  synth_cmd->add_option("--seq", common.sequence, "sequence id");
  add_projection_opts(synth_cmd);
  synth_cmd->add_option("--frames", synth_frames, "number of frames");
  synth_cmd->add_option("--step", synth_step, "ego motion per frame, meters");
  synth_cmd->add_option("--densify", synth_densify, "sub-rays per pixel");
  synth_cmd->add_option("--max-range", synth_max_range, "sensor max range, meters");
  bool synth_predictions = false;
  synth_cmd->add_flag("--predictions", synth_predictions,
                      "also write re-projection-corrupted predictions");
  bool synth_enclosed = false;
  synth_cmd->add_flag("--walls", synth_enclosed,
                      "enclose the scene so every ray returns a point");

  auto* bench_cmd = app.add_subcommand("bench", "per-frame timing of project + mvp");
  add_data_opts(bench_cmd, common);
  add_projection_opts(bench_cmd);
  add_refine_opts(bench_cmd);
  bench_cmd->add_option("--out", common.out_path, "report file");

  auto* tca_cmd = app.add_subcommand("tca-demo", "cross-attention invariant checks");
  tca_cmd->add_option("--seed", tca_seed, "weight seed");
  tca_cmd->add_option("--out", common.out_path, "report file");

  try {
    app.parse(argc, argv);
    if (project_cmd->parsed()) return cmd_project(common, cfg, frame, dump_path);
    if (stats_cmd->parsed()) return cmd_stats(common, cfg);
    if (refine_cmd->parsed()) return cmd_refine(common, refine_opts, cfg);
    if (eval_cmd->parsed()) {
      return cmd_eval(gt_dir, pred_dir, num_classes, include_absent, common);
    }
    if (synth_cmd->parsed()) {
      return cmd_synth(common, synth_frames, synth_step, synth_densify, cfg,
                       synth_max_range, synth_predictions, synth_enclosed);
    }
    if (bench_cmd->parsed()) return cmd_bench(common, refine_opts, cfg);
    if (tca_cmd->parsed()) return cmd_tca_demo(tca_seed, common);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
