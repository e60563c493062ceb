#pragma once

#include <cstdint>
#include <vector>

#include "thyrovol/phantomsim/phantom.hpp"

namespace thyrovol::phantomsim {

// Subject generator. Total thyroid volumes follow a log-normal with the given
// mean and sd, redrawn until inside [min, max]; the calibration population
// ranged 2.8 to 16.7 ml (mean 7.4, sd 3.05).
struct PopulationConfig {
  double mean_volume_ml = 7.4;
  double sd_volume_ml = 3.05;
  double min_volume_ml = 2.8;
  double max_volume_ml = 16.7;
  double lobe_asymmetry_sd = 0.1;   // right share = 0.5 * (1 + N(0, sd))
  Vec3 axis_ratios = Vec3(1.0, 0.93, 2.7);  // lateral : depth : length
  double shape_jitter_sd = 0.08;    // log-normal per axis
  double max_rotation_deg = 5.0;    // uniform per axis
  double gap_mm = 9.0;              // between the lobes' medial edges and the midline
  double exponent_min = 2.0;        // superellipsoid exponent, uniform
  double exponent_max = 2.0;
  PhantomSpec appearance;           // intensity and noise settings copied to every subject

  void validate() const;  // ConfigError
};

// Subject i draws from derive_seed(seed, {i}) only, so any prefix of a
// population is itself a population.
PhantomSpec generate_subject(const PopulationConfig& cfg, std::uint64_t seed, int index);
std::vector<PhantomSpec> generate_population(const PopulationConfig& cfg, std::uint64_t seed, int count);

}  // namespace thyrovol::phantomsim
