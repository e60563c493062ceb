#include "thyrovol/trackio/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "thyrovol/core/error.hpp"

namespace thyrovol::trackio {

TimedPose::TimedPose(double t, const Quat& q, const Vec3& p) : t_(t) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("pose quaternion has zero or non-finite norm");
  if (!std::isfinite(t) || !p.allFinite()) throw DomainError("pose time/translation must be finite");
  pose_.rotation = Quat(q.coeffs() / n);
  pose_.translation = p;
}

std::uint8_t quantize_intensity(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

void Frame::validate() const {
  if (width < 1 || height < 1) throw DataError("frame must be at least 1x1 pixels");
  if (!(spacing_x > 0.0) || !(spacing_y > 0.0)) throw DataError("frame pixel spacing must be > 0");
  if (pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DataError("frame pixel buffer does not match width*height");
  }
}

const char* to_string(Lobe lobe) { return lobe == Lobe::Left ? "left" : "right"; }

Lobe parse_lobe(const std::string& s) {
  if (s == "left") return Lobe::Left;
  if (s == "right") return Lobe::Right;
  throw FormatError("lobe must be 'left' or 'right', got '" + s + "'");
}

bool strictly_increasing(std::span<const TimedPose> poses) {
  for (std::size_t i = 1; i < poses.size(); ++i) {
    if (!(poses[i].t() > poses[i - 1].t())) return false;
  }
  return true;
}

void Sweep::validate() const {
  if (frames.empty()) throw DataError("sweep has no frames");
  if (poses.empty()) throw DataError("sweep has no poses");
  const Frame& f0 = frames.front();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& f = frames[i];
    f.validate();
    if (f.width != f0.width || f.height != f0.height || f.spacing_x != f0.spacing_x ||
        f.spacing_y != f0.spacing_y) {
      std::ostringstream os;
      os << "frame " << i << " geometry differs from frame 0";
      throw DataError(os.str());
    }
  }
  if (!strictly_increasing(poses)) throw FormatError("pose timestamps must strictly increase");
}

RigidTransform interpolate_pose(std::span<const TimedPose> poses, double t) {
  if (poses.empty()) throw DegenerateStreamError("pose stream has no samples");
  if (t < poses.front().t() || t > poses.back().t()) {
    std::ostringstream os;
    os.precision(17);
    os << "t=" << t << " outside pose stream span [" << poses.front().t() << ", " << poses.back().t() << "]";
    throw OutOfRangeError(os.str());
  }
  auto it = std::lower_bound(poses.begin(), poses.end(), t,
                             [](const TimedPose& p, double v) { return p.t() < v; });
  if (it->t() == t) return it->pose();
  const TimedPose& b = *it;
  const TimedPose& a = *(it - 1);
  const double s = (t - a.t()) / (b.t() - a.t());
  RigidTransform out;
  out.translation = a.p() + s * (b.p() - a.p());
  out.rotation = slerp_shortest(a.q(), b.q(), s);
  return out;
}

std::vector<SyncedFrame> synchronize(const Sweep& sweep) {
  sweep.validate();
  const double first = sweep.frames.front().t;
  const double last = sweep.frames.back().t;
  if (sweep.poses.front().t() > first || sweep.poses.back().t() < last) {
    std::ostringstream os;
    os.precision(17);
    os << "pose stream [" << sweep.poses.front().t() << ", " << sweep.poses.back().t()
       << "] does not cover frame span [" << first << ", " << last << "]";
    throw OutOfRangeError(os.str());
  }
  std::vector<SyncedFrame> out;
  out.reserve(sweep.frames.size());
  for (const Frame& f : sweep.frames) {
    const RigidTransform sensor_to_world = interpolate_pose(sweep.poses, f.t);
    out.push_back({std::cref(f), sensor_to_world * sweep.calibration.image_to_sensor});
  }
  return out;
}

}  // namespace thyrovol::trackio
