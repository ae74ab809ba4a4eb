#pragma once

#include <cstdint>
#include <vector>

namespace rvseg {

/// Default label id excluded from voting and metric accumulation.
inline constexpr std::uint32_t kIgnoreLabel = 0;

struct Point {
  float x = 0.f;
  float y = 0.f;
  float z = 0.f;
  float intensity = 0.f;
};

/// A LiDAR sweep in its own sensor frame. Labels are optional; when present
/// their length equals the point count.
struct LabeledScan {
  std::vector<Point> points;
  std::vector<std::uint32_t> labels;
  int frame_id = 0;

  std::size_t size() const { return points.size(); }
  bool has_labels() const { return !labels.empty(); }
};

}  // namespace rvseg
