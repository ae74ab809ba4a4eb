#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rvseg/geometry.hpp"
#include "rvseg/types.hpp"

namespace rvseg {

namespace detail {

inline std::uint32_t u32_from_le(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void u32_to_le(std::uint32_t v, unsigned char* b) {
  b[0] = v & 0xff;
  b[1] = (v >> 8) & 0xff;
  b[2] = (v >> 16) & 0xff;
  b[3] = (v >> 24) & 0xff;
}

inline float f32_from_le(const unsigned char* b) {
  return std::bit_cast<float>(u32_from_le(b));
}

inline void f32_to_le(float v, unsigned char* b) {
  u32_to_le(std::bit_cast<std::uint32_t>(v), b);
}

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  return buf;
}

inline void write_file(const std::string& path, const std::vector<unsigned char>& buf) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("short write to " + path);
}

}  // namespace detail

/// Raw 16-bit sensor label ids <-> contiguous train ids.
struct LabelMap {
  std::unordered_map<std::uint16_t, std::uint16_t> raw_to_train;
  std::unordered_map<std::uint16_t, std::uint16_t> train_to_raw;  // smallest raw wins

  static LabelMap identity(std::uint16_t num_ids) {
    LabelMap m;
    for (std::uint16_t i = 0; i < num_ids; ++i) {
      m.raw_to_train[i] = i;
      m.train_to_raw[i] = i;
    }
    return m;
  }

  /// Text config: "raw train" integer pairs, one per line, '#' comments.
  static LabelMap load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open label map " + path);
    LabelMap m;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      long raw, train;
      if (!(ss >> raw)) continue;  // blank line
      if (!(ss >> train) || raw < 0 || raw > 0xffff || train < 0 || train > 0xffff) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": expected 'raw train' pair");
      }
      m.raw_to_train[static_cast<std::uint16_t>(raw)] =
          static_cast<std::uint16_t>(train);
      auto [it, inserted] =
          m.train_to_raw.try_emplace(static_cast<std::uint16_t>(train),
                                     static_cast<std::uint16_t>(raw));
      if (!inserted && raw < it->second) it->second = static_cast<std::uint16_t>(raw);
    }
    return m;
  }
};

/// Velodyne .bin: consecutive little-endian float32 (x, y, z, intensity).
inline LabeledScan read_scan(const std::string& path) {
  const auto buf = detail::read_file(path);
  if (buf.size() % 16 != 0) {
    throw std::runtime_error("scan " + path + ": size not a multiple of 16 bytes");
  }
  LabeledScan scan;
  scan.points.resize(buf.size() / 16);
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const unsigned char* b = &buf[i * 16];
    scan.points[i] = Point{detail::f32_from_le(b), detail::f32_from_le(b + 4),
                           detail::f32_from_le(b + 8), detail::f32_from_le(b + 12)};
  }
  return scan;
}

inline void write_scan(const std::string& path, const LabeledScan& scan) {
  std::vector<unsigned char> buf(scan.points.size() * 16);
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    unsigned char* b = &buf[i * 16];
    detail::f32_to_le(scan.points[i].x, b);
    detail::f32_to_le(scan.points[i].y, b + 4);
    detail::f32_to_le(scan.points[i].z, b + 8);
    detail::f32_to_le(scan.points[i].intensity, b + 12);
  }
  detail::write_file(path, buf);
}

/// SemanticKITTI .label: u32 per point, semantic id in the lower 16 bits,
/// instance id (discarded) in the upper 16.
inline std::vector<std::uint32_t> read_labels(const std::string& path,
                                              const LabelMap* map = nullptr) {
  const auto buf = detail::read_file(path);
  if (buf.size() % 4 != 0) {
    throw std::runtime_error("labels " + path + ": size not a multiple of 4 bytes");
  }
  std::vector<std::uint32_t> out(buf.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint16_t raw =
        static_cast<std::uint16_t>(detail::u32_from_le(&buf[i * 4]) & 0xffff);
    if (!map) {
      out[i] = raw;
      continue;
    }
    auto it = map->raw_to_train.find(raw);
    if (it == map->raw_to_train.end()) {
      throw std::runtime_error("labels " + path + ": raw id " + std::to_string(raw) +
                               " missing from label map");
    }
    out[i] = it->second;
  }
  return out;
}

inline void write_labels(const std::string& path,
                         const std::vector<std::uint32_t>& train_ids,
                         const LabelMap* map = nullptr) {
  std::vector<unsigned char> buf(train_ids.size() * 4);
  for (std::size_t i = 0; i < train_ids.size(); ++i) {
    std::uint32_t raw = train_ids[i];
    if (map) {
      auto it = map->train_to_raw.find(static_cast<std::uint16_t>(train_ids[i]));
      if (it == map->train_to_raw.end()) {
        throw std::runtime_error("write_labels: train id " +
                                 std::to_string(train_ids[i]) + " has no raw id");
      }
      raw = it->second;
    }
    detail::u32_to_le(raw, &buf[i * 4]);
  }
  detail::write_file(path, buf);
}

namespace detail {

inline Eigen::Matrix4d parse_pose_row(const std::string& line, const std::string& src,
                                      int lineno) {
  std::istringstream ss(line);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (!(ss >> m(r, c))) {
        throw std::runtime_error(src + ":" + std::to_string(lineno) +
                                 ": expected 12 reals");
      }
    }
  }
  double extra;
  if (ss >> extra) {
    throw std::runtime_error(src + ":" + std::to_string(lineno) +
                             ": trailing values after 12 reals");
  }
  return m;
}

}  // namespace detail

/// Reads the "Tr:" (camera <- LiDAR) line of a KITTI calib file.
inline RigidTransform read_calibration(const std::string& calib_path) {
  std::ifstream f(calib_path);
  if (!f) throw std::runtime_error("cannot open " + calib_path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.rfind("Tr:", 0) == 0) {
      return RigidTransform(detail::parse_pose_row(line.substr(3), calib_path, lineno));
    }
  }
  throw std::runtime_error(calib_path + ": no 'Tr:' line found");
}

/// KITTI odometry poses (camera frame) converted to the LiDAR frame as
/// Tr^-1 * pose * Tr. Empty calib_path keeps poses as written.
inline std::vector<RigidTransform> read_poses(const std::string& poses_path,
                                              const std::string& calib_path = "") {
  RigidTransform tr = RigidTransform::identity();
  if (!calib_path.empty()) tr = read_calibration(calib_path);
  const RigidTransform tr_inv = tr.inverse();

  std::ifstream f(poses_path);
  if (!f) throw std::runtime_error("cannot open " + poses_path);
  std::vector<RigidTransform> poses;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const RigidTransform cam(detail::parse_pose_row(line, poses_path, lineno));
    poses.push_back(tr_inv * cam * tr);
  }
  return poses;
}

inline void write_poses(const std::string& path,
                        const std::vector<RigidTransform>& poses) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.precision(17);
  for (const auto& p : poses) {
    const auto& m = p.matrix();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) {
        f << m(r, c) << (r == 2 && c == 3 ? '\n' : ' ');
      }
    }
  }
}

inline void write_identity_calibration(const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "Tr: 1 0 0 0 0 1 0 0 0 0 1 0\n";
}

/// T_{j-1}^j: maps points of frame j-1 into frame j given the two absolute
/// poses (frame -> world).
inline RigidTransform relative_transform(const RigidTransform& pose_prev,
                                         const RigidTransform& pose_cur) {
  return pose_cur.inverse() * pose_prev;
}

/// sequences/NN/{velodyne,labels}/FFFFFF.{bin,label}
struct SequencePaths {
  std::filesystem::path root;
  std::string sequence;

  std::filesystem::path seq_dir() const { return root / "sequences" / sequence; }
  std::filesystem::path scan(int frame) const {
    return seq_dir() / "velodyne" / (frame_name(frame) + ".bin");
  }
  std::filesystem::path label(int frame) const {
    return seq_dir() / "labels" / (frame_name(frame) + ".label");
  }
  std::filesystem::path poses() const { return seq_dir() / "poses.txt"; }
  std::filesystem::path calib() const { return seq_dir() / "calib.txt"; }
  std::filesystem::path oracle(int frame) const {
    return seq_dir() / "oracle" / (frame_name(frame) + ".txt");
  }

  static std::string frame_name(int frame) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", frame);
    return buf;
  }
};

}  // namespace rvseg
