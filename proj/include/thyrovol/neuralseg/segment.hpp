#pragma once

#include <vector>

#include "thyrovol/core/grid.hpp"
#include "thyrovol/neuralseg/network.hpp"

namespace thyrovol::neuralseg {

// Per-pixel argmax labels (thyroid where p1 > p0) for slices of one size,
// evaluated in inference mode in batches.
std::vector<LabelSlice> segment_slices(Network& net, const std::vector<Slice>& slices, int batch_size = 8);

struct SegmentOptions {
  // Flip x before inference and back afterwards, so a left lobe is seen in
  // the right-lobe orientation the network was trained on.
  bool mirror = false;
  int batch_size = 8;
};

// resample_axial onto the network's input canvas, slice-wise inference, then
// nearest-neighbour labels back on the grid's own lattice.
LabelVolume segment_volume(Network& net, const VoxelGrid& grid, const SegmentOptions& opt = {});

}  // namespace thyrovol::neuralseg
