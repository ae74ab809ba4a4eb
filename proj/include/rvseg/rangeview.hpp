#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "rvseg/types.hpp"

namespace rvseg {

struct ProjectionConfig {
  int height = 64;         // beam count
  int width = 2048;        // azimuth bins
  double fov_up_deg = 3.0;     // HDL-64E default
  double fov_down_deg = -25.0;
  bool drop_out_of_fov = false;  // clamp by default

  void check() const {
    if (height < 1 || width < 1 || !(fov_up_deg > fov_down_deg)) {
      throw std::invalid_argument("ProjectionConfig: invalid geometry");
    }
  }
};

struct PixelCoord {
  int row = -1;
  int col = -1;
  bool valid() const { return row >= 0; }
};

inline constexpr std::int32_t kNoWinner = -1;

/// Result of spherically projecting one scan. Pixel channels are interleaved
/// (x, y, z, range, intensity) row-major; winner_index holds the index of the
/// nearest point mapping to each pixel.
struct RangeImage {
  int height = 0;
  int width = 0;
  std::vector<float> channels;           // H*W*5
  std::vector<std::uint8_t> valid_mask;  // H*W
  std::vector<std::int32_t> winner_index;
  std::vector<PixelCoord> point_pixel;   // per input point
  std::vector<std::uint8_t> point_occluded;
  std::size_t clamped_points = 0;        // out-of-FOV points clamped into the image
  std::size_t dropped_points = 0;        // skipped (range 0 or out-of-FOV when dropping)

  std::size_t pixel(int row, int col) const {
    return static_cast<std::size_t>(row) * width + col;
  }
  float range_at(int row, int col) const { return channels[pixel(row, col) * 5 + 3]; }
};

struct OcclusionStats {
  std::size_t total_points = 0;
  std::size_t projected_points = 0;
  std::size_t occluded_points = 0;
  double occluded_fraction = 0.0;
  std::size_t pixels_multi = 0;    // pixels receiving >= 2 points
  std::size_t clamped_points = 0;  // reported separately from strict occlusion
};

namespace detail {

struct PixelMapping {
  int row = -1;
  int col = -1;
  double range = 0.0;
  bool clamped = false;
};

/// yaw = atan2(y, x), pitch = asin(z / r); col left-to-right over [pi, -pi],
/// row top-to-bottom over [fov_up, fov_down].
inline PixelMapping map_point(double x, double y, double z,
                              const ProjectionConfig& cfg) {
  PixelMapping m;
  m.range = std::sqrt(x * x + y * y + z * z);
  if (m.range <= 0.0) return m;
  const double yaw = std::atan2(y, x);
  const double pitch = std::asin(z / m.range);
  const double fov_down = cfg.fov_down_deg * std::numbers::pi / 180.0;
  const double fov_up = cfg.fov_up_deg * std::numbers::pi / 180.0;
  const double fov = fov_up - fov_down;

  int col = static_cast<int>(
      std::floor(0.5 * (1.0 - yaw / std::numbers::pi) * cfg.width));
  int row = static_cast<int>(std::floor((1.0 - (pitch - fov_down) / fov) * cfg.height));

  if (pitch < fov_down || pitch > fov_up) m.clamped = true;
  if (col < 0) col = 0;
  if (col > cfg.width - 1) col = cfg.width - 1;
  if (row < 0) { row = 0; m.clamped = true; }
  if (row > cfg.height - 1) { row = cfg.height - 1; m.clamped = true; }
  m.row = row;
  m.col = col;
  return m;
}

}  // namespace detail

/// Projects a scan; per pixel the nearest point wins, ties go to the lowest
/// point index so the result does not depend on processing order.
inline RangeImage project(const LabeledScan& cloud, const ProjectionConfig& cfg) {
  cfg.check();
  if (cloud.points.empty()) {
    throw std::invalid_argument("project: empty cloud");
  }
  const std::size_t n = cloud.points.size();
  const std::size_t npix = static_cast<std::size_t>(cfg.height) * cfg.width;

  RangeImage ri;
  ri.height = cfg.height;
  ri.width = cfg.width;
  ri.channels.assign(npix * 5, 0.f);
  ri.valid_mask.assign(npix, 0);
  ri.winner_index.assign(npix, kNoWinner);
  ri.point_pixel.assign(n, PixelCoord{});
  ri.point_occluded.assign(n, 0);

  std::vector<double> ranges(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = cloud.points[i];
    const auto m = detail::map_point(p.x, p.y, p.z, cfg);
    if (m.range <= 0.0 || (m.clamped && cfg.drop_out_of_fov)) {
      ++ri.dropped_points;
      continue;
    }
    if (m.clamped) ++ri.clamped_points;
    ri.point_pixel[i] = PixelCoord{m.row, m.col};
    ranges[i] = m.range;

    const std::size_t pix = ri.pixel(m.row, m.col);
    const std::int32_t w = ri.winner_index[pix];
    if (w == kNoWinner || ranges[static_cast<std::size_t>(w)] > m.range) {
      ri.winner_index[pix] = static_cast<std::int32_t>(i);
    }
  }

  for (std::size_t pix = 0; pix < npix; ++pix) {
    const std::int32_t w = ri.winner_index[pix];
    if (w == kNoWinner) continue;
    ri.valid_mask[pix] = 1;
    const Point& p = cloud.points[static_cast<std::size_t>(w)];
    float* ch = &ri.channels[pix * 5];
    ch[0] = p.x;
    ch[1] = p.y;
    ch[2] = p.z;
    ch[3] = static_cast<float>(ranges[static_cast<std::size_t>(w)]);
    ch[4] = p.intensity;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!ri.point_pixel[i].valid()) continue;
    const std::size_t pix = ri.pixel(ri.point_pixel[i].row, ri.point_pixel[i].col);
    ri.point_occluded[i] = ri.winner_index[pix] != static_cast<std::int32_t>(i);
  }
  return ri;
}

/// Assigns every point the label of its pixel, occluded points included; this
/// intentionally reproduces the many-to-one error of range-image re-projection.
/// Points without a valid pixel receive `ignore_label`.
inline std::vector<std::uint32_t> unproject_labels(
    const std::vector<std::uint32_t>& image_labels, const RangeImage& ri,
    const LabeledScan& cloud, std::uint32_t ignore_label = kIgnoreLabel) {
  const std::size_t npix = static_cast<std::size_t>(ri.height) * ri.width;
  if (image_labels.size() != npix) {
    throw std::invalid_argument("unproject_labels: label map size mismatch");
  }
  if (cloud.points.size() != ri.point_pixel.size()) {
    throw std::invalid_argument("unproject_labels: cloud does not match range image");
  }
  std::vector<std::uint32_t> out(cloud.points.size(), ignore_label);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const PixelCoord& pc = ri.point_pixel[i];
    if (pc.valid()) out[i] = image_labels[ri.pixel(pc.row, pc.col)];
  }
  return out;
}

/// Per-pixel winner labels from per-point ground truth; pixels with no point
/// get `ignore_label`.
inline std::vector<std::uint32_t> winner_label_map(
    const RangeImage& ri, const std::vector<std::uint32_t>& point_labels,
    std::uint32_t ignore_label = kIgnoreLabel) {
  const std::size_t npix = static_cast<std::size_t>(ri.height) * ri.width;
  std::vector<std::uint32_t> out(npix, ignore_label);
  for (std::size_t pix = 0; pix < npix; ++pix) {
    const std::int32_t w = ri.winner_index[pix];
    if (w != kNoWinner) out[pix] = point_labels[static_cast<std::size_t>(w)];
  }
  return out;
}

inline OcclusionStats occlusion_stats(const RangeImage& ri) {
  OcclusionStats s;
  s.total_points = ri.point_pixel.size();
  s.clamped_points = ri.clamped_points;
  std::size_t winners = 0;
  for (const auto w : ri.winner_index) winners += (w != kNoWinner);
  for (const auto& pc : ri.point_pixel) s.projected_points += pc.valid();
  s.occluded_points = s.projected_points - winners;
  s.occluded_fraction =
      s.total_points ? static_cast<double>(s.occluded_points) / s.total_points : 0.0;

  std::vector<std::uint32_t> per_pixel(static_cast<std::size_t>(ri.height) * ri.width, 0);
  for (const auto& pc : ri.point_pixel) {
    if (pc.valid()) ++per_pixel[ri.pixel(pc.row, pc.col)];
  }
  for (const auto c : per_pixel) s.pixels_multi += (c >= 2);
  return s;
}

/// Debug dump: "RNGI", u32 H, u32 W (little-endian), then H*W*5 float32.
inline void write_range_image(const std::string& path, const RangeImage& ri) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_range_image: cannot open " + path);
  const char magic[4] = {'R', 'N', 'G', 'I'};
  const std::uint32_t h = static_cast<std::uint32_t>(ri.height);
  const std::uint32_t w = static_cast<std::uint32_t>(ri.width);
  bool ok = std::fwrite(magic, 1, 4, f) == 4 &&
            std::fwrite(&h, 4, 1, f) == 1 && std::fwrite(&w, 4, 1, f) == 1 &&
            std::fwrite(ri.channels.data(), 4, ri.channels.size(), f) ==
                ri.channels.size();
  std::fclose(f);
  if (!ok) throw std::runtime_error("write_range_image: short write to " + path);
}

}  // namespace rvseg
