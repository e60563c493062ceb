#include "thyrovol/core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace thyrovol {

Quat axis_angle_deg(const Vec3& axis, double degrees) {
  const double n = axis.norm();
  if (n == 0.0 || degrees == 0.0) return Quat::Identity();
  return Quat(Eigen::AngleAxisd(degrees * std::numbers::pi / 180.0, axis / n));
}

double rotation_angle_deg(const Quat& a, const Quat& b) {
  const double d = std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0);
  return 2.0 * std::acos(d) * 180.0 / std::numbers::pi;
}

Quat slerp_shortest(const Quat& a, const Quat& b, double s) {
  Eigen::Vector4d qa = a.coeffs();
  Eigen::Vector4d qb = b.coeffs();
  double d = qa.dot(qb);
  if (d < 0.0) {
    qb = -qb;
    d = -d;
  }
  Eigen::Vector4d out;
  if (d > 0.9999995) {
    // Nearly parallel: normalized lerp is accurate to well below 1e-12 here.
    out = (1.0 - s) * qa + s * qb;
  } else {
    const double theta = std::acos(std::min(d, 1.0));
    const double sin_theta = std::sin(theta);
    out = (std::sin((1.0 - s) * theta) / sin_theta) * qa + (std::sin(s * theta) / sin_theta) * qb;
  }
  Quat q;
  q.coeffs() = out.normalized();
  return q;
}

}  // namespace thyrovol
