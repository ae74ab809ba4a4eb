#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "rvseg/types.hpp"

namespace rvseg {

/// SE(3) transform stored as a 4x4 homogeneous matrix. The rotation block is
/// checked for orthonormality on construction; all math runs in double even
/// when point payloads are float.
class RigidTransform {
 public:
  RigidTransform() : m_(Eigen::Matrix4d::Identity()) {}

  explicit RigidTransform(const Eigen::Matrix4d& m) : m_(m) { validate(); }

  static RigidTransform identity() { return RigidTransform(); }

  static RigidTransform from_rotation_translation(const Eigen::Matrix3d& r,
                                                  const Eigen::Vector3d& t) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = r;
    m.block<3, 1>(0, 3) = t;
    return RigidTransform(m);
  }

  static RigidTransform translation(double x, double y, double z) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m(0, 3) = x;
    m(1, 3) = y;
    m(2, 3) = z;
    return RigidTransform(m);
  }

  static RigidTransform rotation_z(double radians) {
    return from_rotation_translation(
        Eigen::AngleAxisd(radians, Eigen::Vector3d::UnitZ()).toRotationMatrix(),
        Eigen::Vector3d::Zero());
  }

  const Eigen::Matrix4d& matrix() const { return m_; }
  Eigen::Matrix3d rotation() const { return m_.block<3, 3>(0, 0); }
  Eigen::Vector3d translation_vector() const { return m_.block<3, 1>(0, 3); }

  /// Closed-form inverse: [R t]^-1 = [R^T, -R^T t].
  RigidTransform inverse() const {
    Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
    const Eigen::Matrix3d rt = rotation().transpose();
    inv.block<3, 3>(0, 0) = rt;
    inv.block<3, 1>(0, 3) = -rt * translation_vector();
    return RigidTransform(inv);
  }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return RigidTransform(m_ * rhs.m_);
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation() * p + translation_vector();
  }

 private:
  void validate() const {
    const Eigen::Matrix3d r = m_.block<3, 3>(0, 0);
    const double ortho_err =
        (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho_err >= 1e-6) {
      throw std::invalid_argument("RigidTransform: rotation block not orthonormal");
    }
    const double det = r.determinant();
    if (det < 1.0 - 1e-6 || det > 1.0 + 1e-6) {
      throw std::invalid_argument("RigidTransform: rotation determinant not +1");
    }
    if (m_(3, 0) != 0.0 || m_(3, 1) != 0.0 || m_(3, 2) != 0.0 || m_(3, 3) != 1.0) {
      throw std::invalid_argument("RigidTransform: last row must be [0,0,0,1]");
    }
  }

  Eigen::Matrix4d m_;
};

/// Chains consecutive relative transforms into T_j^t. `transforms[k]` maps
/// frame k+1 into frame k+2 (1-based frame indexing), so for a chain of n
/// relative transforms valid indices satisfy 1 <= j <= t <= n+1. Each step is
/// applied on the left of the running product; the result maps frame j into
/// frame t, and j == t yields the identity.
inline RigidTransform compose_chain(std::span<const RigidTransform> transforms,
                                    std::size_t j, std::size_t t) {
  if (j < 1 || j > t || t > transforms.size() + 1) {
    throw std::out_of_range("compose_chain: indices out of range");
  }
  Eigen::Matrix4d acc = Eigen::Matrix4d::Identity();
  for (std::size_t k = j + 1; k <= t; ++k) {
    acc = transforms[k - 2].matrix() * acc;
  }
  return RigidTransform(acc);
}

inline RigidTransform compose_chain(const std::vector<RigidTransform>& transforms,
                                    std::size_t j, std::size_t t) {
  return compose_chain(std::span<const RigidTransform>(transforms), j, t);
}

/// Maps every point through T; intensities, labels, and order are untouched.
inline LabeledScan transform_cloud(const LabeledScan& cloud, const RigidTransform& t) {
  if (cloud.points.empty()) {
    throw std::invalid_argument("transform_cloud: empty cloud");
  }
  LabeledScan out = cloud;
  const Eigen::Matrix3d r = t.rotation();
  const Eigen::Vector3d tr = t.translation_vector();
  for (auto& p : out.points) {
    const Eigen::Vector3d q = r * Eigen::Vector3d(p.x, p.y, p.z) + tr;
    p.x = static_cast<float>(q.x());
    p.y = static_cast<float>(q.y());
    p.z = static_cast<float>(q.z());
  }
  return out;
}

}  // namespace rvseg
