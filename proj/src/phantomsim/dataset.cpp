#include "thyrovol/phantomsim/dataset.hpp"

#include <algorithm>

#include "thyrovol/compounder/resample.hpp"
#include "thyrovol/core/error.hpp"
#include "thyrovol/core/seed.hpp"

namespace thyrovol::phantomsim {

namespace {

template <class T>
void mirror_x(Image<T>& img) {
  for (int y = 0; y < img.height; ++y) {
    std::reverse(img.data.begin() + y * img.width, img.data.begin() + (y + 1) * img.width);
  }
}

// Lobe interior at kIndicatorLevel, everything else 0, other lobe out of
// sight.
constexpr double kIndicatorLevel = 0.5;

PhantomField indicator_field(const LobeSpec& lobe) {
  LobeSpec away = lobe;
  away.center += Vec3(1e4, 0.0, 0.0);
  PhantomSpec s = clean_phantom(lobe, away);
  s.background_level = 0.0;
  s.contrast = 2.0 * kIndicatorLevel;
  return PhantomField(s);
}

}  // namespace

void SliceSetConfig::validate() const {
  if (canvas < 1) throw ConfigError("slice canvas must be >= 1");
  if (slices_per_sweep < 1) throw ConfigError("slices_per_sweep must be >= 1");
}

LabelledVolume labelled_volume(const PhantomField& field, trackio::Lobe lobe, const ObserverModel& observer,
                               const StudyConfig& study) {
  const LobeSpec& target = field.spec().lobe(lobe);
  const Trajectory plan = plan_sweep(target, study.protocol);
  const SimulatedSweep sim = simulate_sweep(field, plan, observer, study.protocol.probe);
  // Same seed, so the same path and the same reported poses.
  const SimulatedSweep label_sim = simulate_sweep(indicator_field(target), plan, observer, study.protocol.probe);
  compounder::CompoundingConfig cc = study.compounding;
  cc.threads = 1;
  LabelledVolume out;
  out.lobe = lobe;
  out.image = compounder::compound(trackio::synchronize(sim.sweep), cc);
  const VoxelGrid label_grid = compounder::compound(trackio::synchronize(label_sim.sweep), cc);
  out.mask = threshold_segment(label_grid, 0.5 * kIndicatorLevel);
  return out;
}

std::vector<neuralseg::TrainingSample> slices_from_volume(const LabelledVolume& volume, const SliceSetConfig& cfg) {
  cfg.validate();
  const GridGeometry& g = volume.image.geometry;
  if (volume.mask.geometry.dims != g.dims) throw ShapeError("mask and image lattices differ");
  VoxelGrid label_grid(g);
  std::transform(volume.mask.data.begin(), volume.mask.data.end(), label_grid.data.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  const auto img = compounder::resample_axial(volume.image, cfg.canvas, cfg.canvas);
  const auto lab = compounder::resample_axial(label_grid, cfg.canvas, cfg.canvas);
  const int nz = g.dims[2];
  std::vector<neuralseg::TrainingSample> out;
  for (int s = 0; s < cfg.slices_per_sweep; ++s) {
    // Centres of equal z bands.
    const int k = std::min(nz - 1, static_cast<int>((s + 0.5) * nz / cfg.slices_per_sweep));
    neuralseg::TrainingSample sample;
    sample.image = img.slices[static_cast<std::size_t>(k)];
    sample.mask = LabelSlice(cfg.canvas, cfg.canvas, 0);
    const Slice& l = lab.slices[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < l.data.size(); ++i) sample.mask.data[i] = l.data[i] >= 0.5f ? 1 : 0;
    if (volume.lobe == trackio::Lobe::Left) {
      mirror_x(sample.image);
      mirror_x(sample.mask);
    }
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<neuralseg::TrainingSample> make_training_slices(const std::vector<PhantomSpec>& phantoms,
                                                            const StudyConfig& study, const SliceSetConfig& cfg,
                                                            std::uint64_t seed) {
  study.validate();
  cfg.validate();
  std::vector<neuralseg::TrainingSample> out;
  for (std::size_t p = 0; p < phantoms.size(); ++p) {
    const PhantomField field(phantoms[p]);
    for (trackio::Lobe lobe : {trackio::Lobe::Right, trackio::Lobe::Left}) {
      if (lobe == trackio::Lobe::Left && !cfg.both_lobes) continue;
      ObserverModel obs = study.observer;
      obs.seed = derive_seed(seed, {p, lobe == trackio::Lobe::Right ? 0u : 1u});
      const auto slices = slices_from_volume(labelled_volume(field, lobe, obs, study), cfg);
      out.insert(out.end(), slices.begin(), slices.end());
    }
  }
  return out;
}

}  // namespace thyrovol::phantomsim
