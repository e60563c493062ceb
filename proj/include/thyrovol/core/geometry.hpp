#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace thyrovol {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

// Rigid transform x -> R x + t. Rotation is kept as a unit quaternion.
struct RigidTransform {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }

  Vec3 apply_vector(const Vec3& v) const { return rotation * v; }

  // (this ∘ rhs)(x) = this(rhs(x))
  RigidTransform compose(const RigidTransform& rhs) const {
    return {(rotation * rhs.rotation).normalized(), rotation * rhs.translation + translation};
  }

  RigidTransform inverse() const {
    const Quat inv = rotation.conjugate();
    return {inv, -(inv * translation)};
  }
};

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return a.compose(b);
}

// Rotation of `degrees` about `axis` (axis need not be normalized).
Quat axis_angle_deg(const Vec3& axis, double degrees);

// Geodesic angle between two rotations in degrees, sign of the quaternion ignored.
double rotation_angle_deg(const Quat& a, const Quat& b);

// Spherical linear interpolation along the shortest arc; s in [0,1].
Quat slerp_shortest(const Quat& a, const Quat& b, double s);

}  // namespace thyrovol
