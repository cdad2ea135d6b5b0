#pragma once

#include <Eigen/Core>

namespace sfcb {

using Vec3 = Eigen::Vector3d;

/// Axis-aligned box [lo, hi].
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();

  Vec3 extent() const { return hi - lo; }
  double diagonal() const { return extent().norm(); }
};

}  // namespace sfcb
