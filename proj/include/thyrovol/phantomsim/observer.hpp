#pragma once

#include <array>
#include <cstdint>

#include "thyrovol/phantomsim/phantom.hpp"
#include "thyrovol/volumetry/volumetry.hpp"

namespace thyrovol::phantomsim {

struct ObserverModel {
  // 2D protocol: multiplicative Gaussian error per caliper axis.
  double axis_noise_sd = 0.08;
  // 3D protocol: how far the actual sweep strays from the planned one
  // (constant per sweep). Tracked correctly, so it moves sampling positions
  // but does not bias the reconstruction by itself.
  double jitter_translation_mm = 2.0;  // sd per axis
  double jitter_rotation_deg = 3.0;    // sd per axis
  // Tracker error on the reported poses: a stationary Ornstein-Uhlenbeck
  // drift with these total RMS values and correlation time.
  double pose_noise_mm = 1.40;
  double pose_noise_deg = 0.50;
  double pose_noise_correlation_s = 2.0;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError
  static ObserverModel noiseless();
};

// Caliper measurement of both lobes by one observer: true extents
// (2a, 2b, 2c in cm) each times (1 + eps), eps ~ N(0, axis_noise_sd)
// truncated at eps > -0.9. Axis order in LobeAxes: length = z, width = x,
// depth = y. Index 0 is the right lobe, 1 the left.
std::array<volumetry::LobeAxes, 2> virtual_observer_2d(const PhantomSpec& spec, const ObserverModel& observer);

}  // namespace thyrovol::phantomsim
