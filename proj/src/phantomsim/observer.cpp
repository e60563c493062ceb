#include "thyrovol/phantomsim/observer.hpp"

#include <algorithm>
#include <random>

#include "thyrovol/core/error.hpp"

namespace thyrovol::phantomsim {

void ObserverModel::validate() const {
  if (!(axis_noise_sd >= 0) || !(jitter_translation_mm >= 0) || !(jitter_rotation_deg >= 0) ||
      !(pose_noise_mm >= 0) || !(pose_noise_deg >= 0)) {
    throw ConfigError("observer noise levels must be >= 0");
  }
  if (!(pose_noise_correlation_s > 0)) throw ConfigError("pose_noise_correlation_s must be > 0");
}

ObserverModel ObserverModel::noiseless() {
  ObserverModel m;
  m.axis_noise_sd = 0;
  m.jitter_translation_mm = 0;
  m.jitter_rotation_deg = 0;
  m.pose_noise_mm = 0;
  m.pose_noise_deg = 0;
  return m;
}

std::array<volumetry::LobeAxes, 2> virtual_observer_2d(const PhantomSpec& spec, const ObserverModel& observer) {
  spec.validate();
  observer.validate();
  std::mt19937_64 rng(observer.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto factor = [&] {
    // Draw unconditionally so the stream layout does not depend on the sd.
    const double eps = observer.axis_noise_sd * noise(rng);
    return 1.0 + std::max(eps, -0.9 + 1e-12);
  };
  std::array<volumetry::LobeAxes, 2> out;
  const LobeSpec* lobes[2] = {&spec.right, &spec.left};
  for (int i = 0; i < 2; ++i) {
    const Vec3& s = lobes[i]->semi_axes;
    out[i].length_cm = 2.0 * s.z() / 10.0 * factor();
    out[i].width_cm = 2.0 * s.x() / 10.0 * factor();
    out[i].depth_cm = 2.0 * s.y() / 10.0 * factor();
  }
  return out;
}

}  // namespace thyrovol::phantomsim
