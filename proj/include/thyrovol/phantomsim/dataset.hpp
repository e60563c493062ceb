#pragma once

#include <cstdint>
#include <vector>

#include "thyrovol/neuralseg/train.hpp"
#include "thyrovol/phantomsim/study.hpp"

namespace thyrovol::phantomsim {

struct SliceSetConfig {
  int canvas = 64;              // network input edge
  int slices_per_sweep = 5;     // evenly spaced through the compounded grid
  bool both_lobes = true;       // left lobes mirrored into right orientation

  void validate() const;  // ConfigError
};

// A compounded sweep and its label on the same lattice.
struct LabelledVolume {
  VoxelGrid image;
  LabelVolume mask;
  trackio::Lobe lobe = trackio::Lobe::Right;
};

// Simulates and compounds one sweep of `lobe` under `observer` (seed
// included). The mask comes from a second sweep of the bare lobe indicator
// along the same path with the same reported poses, compounded the same way
// and cut at one half, so it carries the tracker distortion of the image.
// Its volume stays close to the analytic one.
LabelledVolume labelled_volume(const PhantomField& field, trackio::Lobe lobe, const ObserverModel& observer,
                               const StudyConfig& study);

// Axial slices at the centres of equal z bands, resampled to the canvas.
// Left lobes are mirrored into right-lobe orientation.
std::vector<neuralseg::TrainingSample> slices_from_volume(const LabelledVolume& volume, const SliceSetConfig& cfg);

// One labelled sweep per lobe of every phantom under the study's observer
// noise, cut into slices. Observer seeds derive from `seed`.
std::vector<neuralseg::TrainingSample> make_training_slices(const std::vector<PhantomSpec>& phantoms,
                                                            const StudyConfig& study, const SliceSetConfig& cfg,
                                                            std::uint64_t seed);

}  // namespace thyrovol::phantomsim
