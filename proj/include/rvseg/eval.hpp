#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rvseg/types.hpp"

namespace rvseg {

struct IouReport {
  std::vector<double> per_class;   // 0 for classes excluded from the mean
  std::vector<bool> included;      // whether the class enters the mean
  double miou = 0.0;
};

/// C x C count matrix, rows = ground truth, columns = prediction. Points whose
/// ground truth equals the ignore class are not accumulated.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::uint32_t num_classes,
                           std::uint32_t ignore_label = kIgnoreLabel)
      : num_classes_(num_classes), ignore_(ignore_label),
        counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
    if (num_classes < 2) {
      throw std::invalid_argument("ConfusionMatrix: need at least 2 classes");
    }
  }

  void accumulate(std::span<const std::uint32_t> gt,
                  std::span<const std::uint32_t> pred) {
    if (gt.size() != pred.size()) {
      throw std::invalid_argument("ConfusionMatrix: gt/pred length mismatch");
    }
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt[i] == ignore_) continue;
      if (gt[i] >= num_classes_ || pred[i] >= num_classes_) {
        throw std::invalid_argument("ConfusionMatrix: class id out of range");
      }
      ++counts_[static_cast<std::size_t>(gt[i]) * num_classes_ + pred[i]];
    }
  }

  void merge(const ConfusionMatrix& other) {
    if (other.num_classes_ != num_classes_ || other.ignore_ != ignore_) {
      throw std::invalid_argument("ConfusionMatrix: incompatible merge");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  }

  std::uint64_t at(std::uint32_t gt, std::uint32_t pred) const {
    return counts_[static_cast<std::size_t>(gt) * num_classes_ + pred];
  }
  std::uint64_t& at(std::uint32_t gt, std::uint32_t pred) {
    return counts_[static_cast<std::size_t>(gt) * num_classes_ + pred];
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }

  std::uint32_t num_classes() const { return num_classes_; }
  std::uint32_t ignore_label() const { return ignore_; }

  /// Per-class IoU = TP / (TP + FP + FN). Classes with zero union (never seen
  /// in gt or pred) are excluded from the mean unless `include_absent`.
  IouReport iou(bool include_absent = false) const {
    IouReport rep;
    rep.per_class.assign(num_classes_, 0.0);
    rep.included.assign(num_classes_, false);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::uint32_t c = 0; c < num_classes_; ++c) {
      if (c == ignore_) continue;
      std::uint64_t tp = at(c, c);
      std::uint64_t fp = 0, fn = 0;
      for (std::uint32_t o = 0; o < num_classes_; ++o) {
        if (o == c) continue;
        fp += at(o, c);
        fn += at(c, o);
      }
      // ignore-row predictions were never accumulated; ignore-column counts as fp
      const std::uint64_t uni = tp + fp + fn;
      if (uni == 0 && !include_absent) continue;
      rep.per_class[c] = uni ? static_cast<double>(tp) / static_cast<double>(uni) : 0.0;
      rep.included[c] = true;
      sum += rep.per_class[c];
      ++n;
    }
    if (n == 0) {
      throw std::domain_error("ConfusionMatrix::iou: no class has a nonzero union");
    }
    rep.miou = sum / static_cast<double>(n);
    return rep;
  }

 private:
  std::uint32_t num_classes_;
  std::uint32_t ignore_;
  std::vector<std::uint64_t> counts_;
};

/// Machine-readable report: one "iou_<c>=<v>" line per included class, then
/// "miou=<v>".
inline std::string format_report(const IouReport& rep) {
  std::string out;
  for (std::size_t c = 0; c < rep.per_class.size(); ++c) {
    if (!rep.included[c]) continue;
    out += "iou_" + std::to_string(c) + "=" + std::to_string(rep.per_class[c]) + "\n";
  }
  out += "miou=" + std::to_string(rep.miou) + "\n";
  return out;
}

}  // namespace rvseg
