#pragma once

#include <vector>

#include "thyrovol/core/grid.hpp"

namespace thyrovol::compounder {

// How the in-plane content of a z-plane was placed into a target canvas.
// Output pixel (u, v) has its centre at in-plane physical offset
//   x = (u + 0.5 - offset_u) * pixel_size - spacing_x / 2   (relative to the grid origin)
// and likewise for v / y.
struct AxialMapping {
  int target_width = 0;
  int target_height = 0;
  double pixel_size = 1.0;  // mm per output pixel (isotropic)
  double offset_u = 0.0;    // canvas pixels before the content starts
  double offset_v = 0.0;
  GridGeometry source;
};

struct AxialStack {
  std::vector<Slice> slices;  // one per z-plane, index = k
  double pixel_area_mm2 = 1.0;
  double slice_thickness_mm = 1.0;
  AxialMapping mapping;
};

AxialMapping axial_mapping(const GridGeometry& geometry, int target_width, int target_height);

// Extracts fixed-z planes, rescales them isotropically (bilinear) to fit the
// target canvas keeping the aspect ratio, centres them and zero-pads the rest.
AxialStack resample_axial(const VoxelGrid& grid, int target_width, int target_height);

// Maps per-slice labels back onto the source lattice (nearest neighbour).
LabelVolume labels_to_grid(const std::vector<LabelSlice>& labels, const AxialMapping& mapping);

}  // namespace thyrovol::compounder
