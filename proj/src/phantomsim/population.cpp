#include "thyrovol/phantomsim/population.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "thyrovol/core/error.hpp"
#include "thyrovol/core/seed.hpp"

namespace thyrovol::phantomsim {

void PopulationConfig::validate() const {
  if (!(mean_volume_ml > 0) || !(sd_volume_ml >= 0)) throw ConfigError("population volume mean/sd invalid");
  if (!(min_volume_ml > 0) || !(max_volume_ml > min_volume_ml)) throw ConfigError("population volume range invalid");
  if (!(lobe_asymmetry_sd >= 0) || !(shape_jitter_sd >= 0) || !(max_rotation_deg >= 0)) {
    throw ConfigError("population spreads must be >= 0");
  }
  if (!(axis_ratios.minCoeff() > 0)) throw ConfigError("axis ratios must be > 0");
  if (!(gap_mm >= 0)) throw ConfigError("gap_mm must be >= 0");
  if (!(exponent_min >= 1.0) || !(exponent_max >= exponent_min)) throw ConfigError("exponent range invalid");
  appearance.validate();
}

PhantomSpec generate_subject(const PopulationConfig& cfg, std::uint64_t seed, int index) {
  cfg.validate();
  const std::uint64_t subject_seed = derive_seed(seed, {static_cast<std::uint64_t>(index)});
  std::mt19937_64 rng(subject_seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const double m = cfg.mean_volume_ml, s = cfg.sd_volume_ml;
  const double sigma2 = std::log(1.0 + s * s / (m * m));
  const double mu = std::log(m) - sigma2 / 2.0;
  double total = 0.0;
  do {
    total = std::exp(mu + std::sqrt(sigma2) * n01(rng));
  } while (total < cfg.min_volume_ml || total > cfg.max_volume_ml);

  const double share = std::clamp(0.5 * (1.0 + cfg.lobe_asymmetry_sd * n01(rng)), 0.3, 0.7);

  PhantomSpec spec = cfg.appearance;
  spec.seed = derive_seed(subject_seed, {0xA11});
  auto make_lobe = [&](double volume_ml, double side) {
    LobeSpec lobe;
    lobe.exponent = cfg.exponent_min + (cfg.exponent_max - cfg.exponent_min) * u01(rng);
    Vec3 shape = cfg.axis_ratios;
    for (int i = 0; i < 3; ++i) shape[i] *= std::exp(cfg.shape_jitter_sd * n01(rng));
    lobe.semi_axes = shape;
    lobe.semi_axes *= std::cbrt(volume_ml / lobe.volume_ml());
    Vec3 rot;
    for (int i = 0; i < 3; ++i) rot[i] = cfg.max_rotation_deg * (2.0 * u01(rng) - 1.0);
    lobe.rotation = (axis_angle_deg(Vec3::UnitX(), rot.x()) * axis_angle_deg(Vec3::UnitY(), rot.y()) *
                     axis_angle_deg(Vec3::UnitZ(), rot.z()))
                        .normalized();
    lobe.center = Vec3(side * (cfg.gap_mm + lobe.semi_axes.x()), 0.0, 0.0);
    return lobe;
  };
  spec.right = make_lobe(total * share, 1.0);
  spec.left = make_lobe(total * (1.0 - share), -1.0);
  return spec;
}

std::vector<PhantomSpec> generate_population(const PopulationConfig& cfg, std::uint64_t seed, int count) {
  if (count < 0) throw ConfigError("subject count must be >= 0");
  std::vector<PhantomSpec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(generate_subject(cfg, seed, i));
  return out;
}

}  // namespace thyrovol::phantomsim
