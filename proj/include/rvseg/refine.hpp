#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "rvseg/rangeview.hpp"
#include "rvseg/types.hpp"

namespace rvseg {

struct RefineParams {
  double voxel_resolution = 0.10;  // meters
  std::size_t window_scans = 10;   // sliding-window length L
  std::uint32_t num_classes = 20;  // train ids 0..C-1, ignore included
  std::uint32_t ignore_label = kIgnoreLabel;

  void check() const {
    if (!(voxel_resolution > 0.0) || window_scans < 1 || num_classes < 2) {
      throw std::invalid_argument("RefineParams: invalid values");
    }
  }
};

struct VoxelKey {
  std::int64_t x = 0, y = 0, z = 0;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 0x100000001b3ull;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Sparse accumulator of per-class vote counts, keyed by quantized position.
/// Only non-empty cells are stored; a cell is erased when its total count
/// returns to zero. Votes for the ignore class are not recorded.
class SparseVoteGrid {
 public:
  SparseVoteGrid(double resolution, std::uint32_t num_classes,
                 std::uint32_t ignore_label = kIgnoreLabel)
      : resolution_(resolution), num_classes_(num_classes), ignore_(ignore_label) {
    if (!(resolution > 0.0)) {
      throw std::invalid_argument("SparseVoteGrid: resolution must be positive");
    }
  }

  VoxelKey key_for(float x, float y, float z) const {
    return VoxelKey{static_cast<std::int64_t>(std::floor(x / resolution_)),
                    static_cast<std::int64_t>(std::floor(y / resolution_)),
                    static_cast<std::int64_t>(std::floor(z / resolution_))};
  }

  void add_scan(const LabeledScan& scan) { apply(scan, +1); }
  void remove_scan(const LabeledScan& scan) { apply(scan, -1); }

  const std::vector<std::uint32_t>* find(const VoxelKey& k) const {
    auto it = cells_.find(k);
    return it == cells_.end() ? nullptr : &it->second;
  }

  std::size_t cell_count() const { return cells_.size(); }
  double resolution() const { return resolution_; }
  std::uint32_t num_classes() const { return num_classes_; }
  std::uint32_t ignore_label() const { return ignore_; }

  const std::unordered_map<VoxelKey, std::vector<std::uint32_t>, VoxelKeyHash>&
  cells() const {
    return cells_;
  }

  void reserve(std::size_t n) { cells_.reserve(n); }

 private:
  void apply(const LabeledScan& scan, int sign) {
    if (!scan.has_labels() || scan.labels.size() != scan.points.size()) {
      throw std::invalid_argument("SparseVoteGrid: scan must carry per-point labels");
    }
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
      const std::uint32_t label = scan.labels[i];
      if (label >= num_classes_) {
        throw std::invalid_argument("SparseVoteGrid: label out of range");
      }
      if (label == ignore_) continue;
      const Point& p = scan.points[i];
      const VoxelKey k = key_for(p.x, p.y, p.z);
      if (sign > 0) {
        auto& hist = cells_[k];
        if (hist.empty()) hist.assign(num_classes_, 0);
        if (hist[label] != std::numeric_limits<std::uint32_t>::max()) ++hist[label];
      } else {
        auto it = cells_.find(k);
        if (it == cells_.end() || it->second[label] == 0) {
          throw std::logic_error("SparseVoteGrid: removing votes that were never added");
        }
        --it->second[label];
        bool empty = std::all_of(it->second.begin(), it->second.end(),
                                 [](std::uint32_t c) { return c == 0; });
        if (empty) cells_.erase(it);
      }
    }
  }

  double resolution_;
  std::uint32_t num_classes_;
  std::uint32_t ignore_;
  std::unordered_map<VoxelKey, std::vector<std::uint32_t>, VoxelKeyHash> cells_;
};

/// FIFO of the last L aligned labeled scans; push feeds the grid incrementally
/// and evicts the oldest scan's votes once the window is full.
class ScanWindow {
 public:
  explicit ScanWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("ScanWindow: capacity must be >= 1");
  }

  void push(SparseVoteGrid& grid, LabeledScan scan) {
    grid.add_scan(scan);
    entries_.push_back(std::move(scan));
    if (entries_.size() > capacity_) {
      grid.remove_scan(entries_.front());
      entries_.pop_front();
    }
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<LabeledScan>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::deque<LabeledScan> entries_;
};

/// Max-vote argmax with the documented tie-break: keep `current` when it is
/// among the maxima, otherwise the smallest class id wins. The ignore class
/// never wins.
inline std::uint32_t vote_argmax(const std::vector<std::uint32_t>& hist,
                                 std::uint32_t current, std::uint32_t ignore_label) {
  std::uint32_t best = 0;
  std::uint32_t best_class = current;
  bool any = false;
  for (std::uint32_t c = 0; c < hist.size(); ++c) {
    if (c == ignore_label || hist[c] == 0) continue;
    if (!any || hist[c] > best) {
      best = hist[c];
      best_class = c;
      any = true;
    }
  }
  if (!any) return current;
  if (current != ignore_label && current < hist.size() && hist[current] == best) {
    return current;
  }
  return best_class;
}

/// Relabels each point of the current scan with its voxel's majority class.
/// Points in voxels absent from the grid, and points labeled ignore, pass
/// through unchanged. The grid must already contain the current scan's votes.
inline std::vector<std::uint32_t> mvp_refine(const SparseVoteGrid& grid,
                                             const LabeledScan& current_scan,
                                             const RefineParams& params) {
  params.check();
  if (!current_scan.has_labels()) {
    throw std::invalid_argument("mvp_refine: scan must carry labels");
  }
  std::vector<std::uint32_t> out = current_scan.labels;
  for (std::size_t i = 0; i < current_scan.points.size(); ++i) {
    if (out[i] == params.ignore_label) continue;
    const Point& p = current_scan.points[i];
    const auto* hist = grid.find(grid.key_for(p.x, p.y, p.z));
    if (!hist) continue;
    out[i] = vote_argmax(*hist, out[i], params.ignore_label);
  }
  return out;
}

/// RangeNet-style k-NN smoothing: each point votes over the k patch pixels
/// closest to it in absolute range, subject to a range cutoff; with no
/// candidate inside the cutoff the point keeps its own pixel label.
inline std::vector<std::uint32_t> knn_refine(
    const RangeImage& ri, const std::vector<std::uint32_t>& image_labels,
    const LabeledScan& cloud, int k, int window, double cutoff,
    std::uint32_t ignore_label = kIgnoreLabel) {
  if (k < 1 || window < 1 || window % 2 == 0) {
    throw std::invalid_argument("knn_refine: k >= 1 and odd window required");
  }
  const std::size_t npix = static_cast<std::size_t>(ri.height) * ri.width;
  if (image_labels.size() != npix) {
    throw std::invalid_argument("knn_refine: label map size mismatch");
  }
  std::vector<std::uint32_t> out(cloud.points.size(), ignore_label);
  const int half = window / 2;
  struct Cand {
    double diff;
    int row, col;
    std::uint32_t label;
  };
  std::vector<Cand> cands;
  cands.reserve(static_cast<std::size_t>(window) * window);
  std::vector<std::uint32_t> votes;

  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const PixelCoord& pc = ri.point_pixel[i];
    if (!pc.valid()) {
      out[i] = cloud.has_labels() ? cloud.labels[i] : ignore_label;
      continue;
    }
    const Point& p = cloud.points[i];
    const double prange = std::sqrt(double(p.x) * p.x + double(p.y) * p.y +
                                    double(p.z) * p.z);
    cands.clear();
    for (int dr = -half; dr <= half; ++dr) {
      const int r = pc.row + dr;
      if (r < 0 || r >= ri.height) continue;
      for (int dc = -half; dc <= half; ++dc) {
        const int c = pc.col + dc;
        if (c < 0 || c >= ri.width) continue;
        const std::size_t pix = ri.pixel(r, c);
        if (!ri.valid_mask[pix]) continue;
        cands.push_back(Cand{std::abs(double(ri.range_at(r, c)) - prange), r, c,
                             image_labels[pix]});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.diff != b.diff) return a.diff < b.diff;
      if (a.row != b.row) return a.row < b.row;
      return a.col < b.col;
    });

    std::uint32_t max_label = 0;
    for (const auto& c : cands) max_label = std::max(max_label, c.label);
    votes.assign(static_cast<std::size_t>(max_label) + 1, 0);
    int taken = 0;
    for (const auto& c : cands) {
      if (taken >= k) break;
      if (c.diff > cutoff) break;  // sorted, nothing closer remains
      if (c.label == ignore_label) continue;
      ++votes[c.label];
      ++taken;
    }
    const std::uint32_t own = image_labels[ri.pixel(pc.row, pc.col)];
    if (taken == 0) {
      out[i] = own;
      continue;
    }
    std::uint32_t best_label = own;
    std::uint32_t best = 0;
    for (std::uint32_t l = 0; l < votes.size(); ++l) {
      if (l == ignore_label) continue;
      if (votes[l] > best) {
        best = votes[l];
        best_label = l;
      }
    }
    out[i] = best_label;
  }
  return out;
}

/// FIDNet-style nearest-label assignment: a point whose range differs from its
/// pixel's stored range by more than tau is treated as occluded and takes the
/// label of the patch pixel with the closest range.
inline std::vector<std::uint32_t> nla_refine(
    const RangeImage& ri, const std::vector<std::uint32_t>& image_labels,
    const LabeledScan& cloud, int patch, double tau,
    std::uint32_t ignore_label = kIgnoreLabel) {
  if (patch < 1 || patch % 2 == 0 || !(tau > 0.0)) {
    throw std::invalid_argument("nla_refine: odd patch and tau > 0 required");
  }
  const std::size_t npix = static_cast<std::size_t>(ri.height) * ri.width;
  if (image_labels.size() != npix) {
    throw std::invalid_argument("nla_refine: label map size mismatch");
  }
  std::vector<std::uint32_t> out(cloud.points.size(), ignore_label);
  const int half = patch / 2;

  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const PixelCoord& pc = ri.point_pixel[i];
    if (!pc.valid()) {
      out[i] = cloud.has_labels() ? cloud.labels[i] : ignore_label;
      continue;
    }
    const Point& p = cloud.points[i];
    const double prange = std::sqrt(double(p.x) * p.x + double(p.y) * p.y +
                                    double(p.z) * p.z);
    const std::size_t own_pix = ri.pixel(pc.row, pc.col);
    const double own_diff = std::abs(double(ri.range_at(pc.row, pc.col)) - prange);
    if (own_diff <= tau) {
      out[i] = image_labels[own_pix];
      continue;
    }
    double best_diff = std::numeric_limits<double>::infinity();
    std::uint32_t best_label = image_labels[own_pix];
    for (int dr = -half; dr <= half; ++dr) {
      const int r = pc.row + dr;
      if (r < 0 || r >= ri.height) continue;
      for (int dc = -half; dc <= half; ++dc) {
        const int c = pc.col + dc;
        if (c < 0 || c >= ri.width) continue;
        const std::size_t pix = ri.pixel(r, c);
        if (!ri.valid_mask[pix]) continue;
        const double diff = std::abs(double(ri.range_at(r, c)) - prange);
        if (diff < best_diff) {
          best_diff = diff;
          best_label = image_labels[pix];
        }
      }
    }
    out[i] = best_label;
  }
  return out;
}

}  // namespace rvseg
