#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rvseg/dataio.hpp"
#include "rvseg/geometry.hpp"
#include "rvseg/rangeview.hpp"
#include "rvseg/types.hpp"

namespace rvseg {

// Synthetic class ids (train ids, no remapping).
inline constexpr std::uint32_t kSynthTerrain = 1;
inline constexpr std::uint32_t kSynthBillboard = 2;
inline constexpr std::uint32_t kSynthPole = 3;
inline constexpr std::uint32_t kSynthWall = 4;
inline constexpr std::uint32_t kSynthNumClasses = 5;

/// Horizontal plane z = height.
struct GroundPlane {
  double height = 0.0;
  std::uint32_t label = kSynthTerrain;
};

/// Vertical rectangle perpendicular to the x or y axis.
struct VerticalRect {
  int normal_axis = 0;  // 0: plane x = offset, 1: plane y = offset
  double offset = 0.0;
  double lo = 0.0, hi = 0.0;    // extent along the in-plane horizontal axis
  double z_lo = 0.0, z_hi = 0.0;
  std::uint32_t label = kSynthBillboard;
};

/// Vertical cylinder (pole).
struct VerticalCylinder {
  double cx = 0.0, cy = 0.0;
  double radius = 0.1;
  double z_lo = 0.0, z_hi = 0.0;
  std::uint32_t label = kSynthPole;
};

using Primitive = std::variant<GroundPlane, VerticalRect, VerticalCylinder>;

struct Scene {
  std::vector<Primitive> primitives;
};

struct SensorModel {
  ProjectionConfig cfg;
  double max_range = 120.0;
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  std::uint32_t label = kIgnoreLabel;
};

namespace detail {

inline std::optional<double> hit_ground(const GroundPlane& g,
                                        const Eigen::Vector3d& o,
                                        const Eigen::Vector3d& d) {
  if (std::abs(d.z()) < 1e-12) return std::nullopt;
  const double t = (g.height - o.z()) / d.z();
  return t > 1e-9 ? std::optional<double>(t) : std::nullopt;
}

inline std::optional<double> hit_rect(const VerticalRect& r, const Eigen::Vector3d& o,
                                      const Eigen::Vector3d& d) {
  const int a = r.normal_axis;
  if (std::abs(d[a]) < 1e-12) return std::nullopt;
  const double t = (r.offset - o[a]) / d[a];
  if (t <= 1e-9) return std::nullopt;
  const int b = 1 - a;
  const double u = o[b] + t * d[b];
  const double z = o.z() + t * d.z();
  if (u < r.lo || u > r.hi || z < r.z_lo || z > r.z_hi) return std::nullopt;
  return t;
}

inline std::optional<double> hit_cylinder(const VerticalCylinder& c,
                                          const Eigen::Vector3d& o,
                                          const Eigen::Vector3d& d) {
  const double ox = o.x() - c.cx, oy = o.y() - c.cy;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a < 1e-12) return std::nullopt;
  const double b = 2.0 * (ox * d.x() + oy * d.y());
  const double q = ox * ox + oy * oy - c.radius * c.radius;
  const double disc = b * b - 4.0 * a * q;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
    if (t <= 1e-9) continue;
    const double z = o.z() + t * d.z();
    if (z >= c.z_lo && z <= c.z_hi) return t;
  }
  return std::nullopt;
}

}  // namespace detail

/// First hit along the world-frame ray o + t*d (d unit length), or infinity.
inline Hit cast_ray(const Scene& scene, const Eigen::Vector3d& origin,
                    const Eigen::Vector3d& dir) {
  Hit hit;
  for (const auto& prim : scene.primitives) {
    std::optional<double> t;
    std::uint32_t label = kIgnoreLabel;
    if (const auto* g = std::get_if<GroundPlane>(&prim)) {
      t = detail::hit_ground(*g, origin, dir);
      label = g->label;
    } else if (const auto* r = std::get_if<VerticalRect>(&prim)) {
      t = detail::hit_rect(*r, origin, dir);
      label = r->label;
    } else if (const auto* c = std::get_if<VerticalCylinder>(&prim)) {
      t = detail::hit_cylinder(*c, origin, dir);
      label = c->label;
    }
    if (t && *t < hit.t) {
      hit.t = *t;
      hit.label = label;
    }
  }
  return hit;
}

/// Distance from a world point to the nearest surface carrying `label`; used
/// as the exact-geometry check for pose-chain alignment.
inline double surface_distance(const Scene& scene, const Eigen::Vector3d& p,
                               std::uint32_t label) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& prim : scene.primitives) {
    double d = std::numeric_limits<double>::infinity();
    if (const auto* g = std::get_if<GroundPlane>(&prim)) {
      if (g->label != label) continue;
      d = std::abs(p.z() - g->height);
    } else if (const auto* r = std::get_if<VerticalRect>(&prim)) {
      if (r->label != label) continue;
      d = std::abs(p[r->normal_axis] - r->offset);
    } else if (const auto* c = std::get_if<VerticalCylinder>(&prim)) {
      if (c->label != label) continue;
      d = std::abs(std::hypot(p.x() - c->cx, p.y() - c->cy) - c->radius);
    }
    best = std::min(best, d);
  }
  return best;
}

struct OccludedPoint {
  std::uint32_t point_index = 0;
  std::uint32_t true_label = kIgnoreLabel;
};

struct RaycastResult {
  LabeledScan scan;                     // sensor frame
  std::vector<PixelCoord> pixels;       // exact (row, col) per emitted point
  std::vector<OccludedPoint> occluded;  // losers of the per-pixel competition
  std::vector<Eigen::Vector3d> exact_points;  // pre-quantization double hits
};

namespace detail {

/// Sub-pixel angular offsets in pixel units; deterministic, within +-0.25 of
/// the pixel center so densified rays stay inside the same pixel.
inline std::vector<double> densify_offsets(int densify) {
  if (densify <= 1) return {0.0};
  std::vector<double> off(densify);
  for (int i = 0; i < densify; ++i) {
    off[i] = -0.25 + 0.5 * i / (densify - 1);
  }
  return off;
}

}  // namespace detail

/// Casts one ray per (beam, azimuth) at the exact angles the spherical
/// projection inverts; with densify > 1, `densify` diagonally offset sub-rays
/// per pixel create controlled many-to-one collisions. Points are emitted
/// beam-major in sensor coordinates; misses are omitted.
inline RaycastResult raycast_scan(const Scene& scene, const RigidTransform& sensor_pose,
                                  const SensorModel& model, int densify = 1) {
  model.cfg.check();
  if (densify < 1) throw std::invalid_argument("raycast_scan: densify must be >= 1");
  const ProjectionConfig& cfg = model.cfg;
  const double fov_down = cfg.fov_down_deg * std::numbers::pi / 180.0;
  const double fov_up = cfg.fov_up_deg * std::numbers::pi / 180.0;
  const double fov = fov_up - fov_down;
  const Eigen::Matrix3d rot = sensor_pose.rotation();
  const Eigen::Vector3d origin = sensor_pose.translation_vector();
  const auto offsets = detail::densify_offsets(densify);

  RaycastResult out;
  // winner bookkeeping per pixel within this scan
  std::vector<std::int64_t> pixel_winner(
      static_cast<std::size_t>(cfg.height) * cfg.width, -1);
  std::vector<double> pixel_range(pixel_winner.size(), 0.0);

  for (int row = 0; row < cfg.height; ++row) {
    for (int col = 0; col < cfg.width; ++col) {
      for (double off : offsets) {
        // invert col = floor(0.5*(1 - yaw/pi)*W), row = floor((1-(pitch-fd)/fov)*H)
        const double yaw =
            std::numbers::pi * (1.0 - 2.0 * (col + 0.5 + off) / cfg.width);
        const double pitch = fov_down + fov * (1.0 - (row + 0.5 + off) / cfg.height);
        const Eigen::Vector3d dir_sensor(std::cos(pitch) * std::cos(yaw),
                                         std::cos(pitch) * std::sin(yaw),
                                         std::sin(pitch));
        const Hit hit = cast_ray(scene, origin, rot * dir_sensor);
        if (!(hit.t <= model.max_range)) continue;

        const Eigen::Vector3d p = dir_sensor * hit.t;
        const std::uint32_t idx = static_cast<std::uint32_t>(out.scan.points.size());
        const Point stored{static_cast<float>(p.x()), static_cast<float>(p.y()),
                           static_cast<float>(p.z()), 0.1f * static_cast<float>(hit.label)};
        out.scan.points.push_back(stored);
        out.scan.labels.push_back(hit.label);
        out.pixels.push_back(PixelCoord{row, col});
        out.exact_points.push_back(p);

        // compare with the range of the float32-stored point, the same value
        // the projection sees, so winner choice agrees even on near-ties
        const double stored_range =
            std::sqrt(double(stored.x) * stored.x + double(stored.y) * stored.y +
                      double(stored.z) * stored.z);
        const std::size_t pix = static_cast<std::size_t>(row) * cfg.width + col;
        if (pixel_winner[pix] < 0 || stored_range < pixel_range[pix]) {
          if (pixel_winner[pix] >= 0) {
            out.occluded.push_back(
                OccludedPoint{static_cast<std::uint32_t>(pixel_winner[pix]),
                              out.scan.labels[pixel_winner[pix]]});
          }
          pixel_winner[pix] = idx;
          pixel_range[pix] = stored_range;
        } else {
          out.occluded.push_back(OccludedPoint{idx, hit.label});
        }
      }
    }
  }
  return out;
}

struct SyntheticSequence {
  std::vector<LabeledScan> scans;                    // sensor frame per scan
  std::vector<RigidTransform> poses;                 // frame -> world
  std::vector<std::vector<OccludedPoint>> occluded;  // per frame, index-sorted
  std::vector<std::vector<PixelCoord>> pixels;
  std::vector<std::vector<Eigen::Vector3d>> exact_points;
};

inline SyntheticSequence generate_sequence(const Scene& scene,
                                           const std::vector<RigidTransform>& trajectory,
                                           const SensorModel& model, int densify = 1) {
  if (trajectory.empty()) {
    throw std::invalid_argument("generate_sequence: empty trajectory");
  }
  SyntheticSequence seq;
  for (std::size_t f = 0; f < trajectory.size(); ++f) {
    RaycastResult r = raycast_scan(scene, trajectory[f], model, densify);
    std::sort(r.occluded.begin(), r.occluded.end(),
              [](const OccludedPoint& a, const OccludedPoint& b) {
                return a.point_index < b.point_index;
              });
    r.scan.frame_id = static_cast<int>(f);
    seq.scans.push_back(std::move(r.scan));
    seq.occluded.push_back(std::move(r.occluded));
    seq.pixels.push_back(std::move(r.pixels));
    seq.exact_points.push_back(std::move(r.exact_points));
    seq.poses.push_back(trajectory[f]);
  }
  return seq;
}

/// Reference scenario: terrain plane, a billboard ahead of the sensor
/// path, and two poles. With `enclosed`, four distant walls terminate the
/// horizon rays so every ray returns a point (useful for throughput runs).
inline Scene billboard_terrain_scene(bool enclosed = false) {
  Scene s;
  s.primitives.push_back(GroundPlane{0.0, kSynthTerrain});
  s.primitives.push_back(VerticalRect{0, 12.0, -4.0, 4.0, 0.0, 4.0, kSynthBillboard});
  s.primitives.push_back(VerticalCylinder{7.0, 3.0, 0.15, 0.0, 4.0, kSynthPole});
  s.primitives.push_back(VerticalCylinder{7.0, -3.0, 0.15, 0.0, 4.0, kSynthPole});
  if (enclosed) {
    s.primitives.push_back(VerticalRect{0, 200.0, -200.0, 200.0, 0.0, 25.0, kSynthWall});
    s.primitives.push_back(VerticalRect{0, -200.0, -200.0, 200.0, 0.0, 25.0, kSynthWall});
    s.primitives.push_back(VerticalRect{1, 200.0, -200.0, 200.0, 0.0, 25.0, kSynthWall});
    s.primitives.push_back(VerticalRect{1, -200.0, -200.0, 200.0, 0.0, 25.0, kSynthWall});
  }
  return s;
}

/// Straight drive along +x at sensor height 2 m.
inline std::vector<RigidTransform> straight_trajectory(int frames, double step,
                                                       double height = 2.0) {
  std::vector<RigidTransform> t;
  for (int f = 0; f < frames; ++f) {
    t.push_back(RigidTransform::translation(step * f, 0.0, height));
  }
  return t;
}

/// Writes the sequence in SemanticKITTI layout plus per-frame oracle files
/// ("point_index true_label" per occluded point).
inline void write_sequence(const SequencePaths& paths, const SyntheticSequence& seq) {
  namespace fs = std::filesystem;
  fs::create_directories(paths.seq_dir() / "velodyne");
  fs::create_directories(paths.seq_dir() / "labels");
  fs::create_directories(paths.seq_dir() / "oracle");
  for (std::size_t f = 0; f < seq.scans.size(); ++f) {
    const int frame = static_cast<int>(f);
    write_scan(paths.scan(frame).string(), seq.scans[f]);
    write_labels(paths.label(frame).string(), seq.scans[f].labels);
    std::ofstream of(paths.oracle(frame));
    if (!of) throw std::runtime_error("cannot write " + paths.oracle(frame).string());
    for (const auto& o : seq.occluded[f]) {
      of << o.point_index << ' ' << o.true_label << '\n';
    }
  }
  write_poses(paths.poses().string(), seq.poses);
  write_identity_calibration(paths.calib().string());
}

inline std::vector<OccludedPoint> read_oracle(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open oracle " + path);
  std::vector<OccludedPoint> out;
  std::uint32_t idx, label;
  while (f >> idx >> label) out.push_back(OccludedPoint{idx, label});
  return out;
}

}  // namespace rvseg
