#pragma once

#include <span>
#include <vector>

#include "thyrovol/core/grid.hpp"
#include "thyrovol/trackio/sweep.hpp"

namespace thyrovol::compounder {

enum class SplatKernel { Nearest, Trilinear };

const char* to_string(SplatKernel k);
SplatKernel parse_kernel(const std::string& s);

struct CompoundingConfig {
  double voxel_spacing = 0.5;  // mm, isotropic
  SplatKernel splat_kernel = SplatKernel::Trilinear;
  int hole_fill_radius = 1;  // voxels
  double padding = 2.0;      // mm around the sweep bounding box
  int threads = 1;           // output is identical for any value

  void validate() const;
};

struct Box {
  Vec3 min_corner;
  Vec3 max_corner;
};

// Axis-aligned box around the world positions of the four corner pixels of
// every frame, grown by `padding` mm on every side.
Box bounding_box(std::span<const trackio::SyncedFrame> synced, double padding = 0.0);

// Lattice with origin at box.min_corner covering the box at the given spacing.
GridGeometry grid_for_box(const Box& box, double spacing);

// Forward-compounding accumulator: per voxel sum of weights and of weighted
// intensities.
class AccumulatorGrid {
 public:
  explicit AccumulatorGrid(const GridGeometry& geometry);

  const GridGeometry& geometry() const { return geometry_; }
  std::span<const double> weights() const { return weight_; }
  std::span<const double> weighted_sums() const { return weighted_; }

  // Splats every pixel of every frame, frames in order and pixels row-major.
  // Work is split into z-slabs, so each voxel sees its contributions in the
  // same order whatever the worker count.
  void splat(std::span<const trackio::SyncedFrame> synced, SplatKernel kernel, int threads = 1);

  // Weighted average where weight > 0, one pass of neighbourhood hole filling
  // within `hole_fill_radius` voxels (Chebyshev), zero elsewhere. When
  // `filled` is given it receives 1 for every voxel that got a value.
  VoxelGrid finalize(int hole_fill_radius, std::vector<std::uint8_t>* filled = nullptr) const;

  // Voxels with nonzero weight.
  std::size_t filled_count() const;

 private:
  void splat_slab(std::span<const trackio::SyncedFrame> synced, SplatKernel kernel, int z_begin, int z_end);

  GridGeometry geometry_;
  std::vector<double> weight_;
  std::vector<double> weighted_;
};

// bounding_box + grid_for_box + splat + finalize.
VoxelGrid compound(std::span<const trackio::SyncedFrame> synced, const CompoundingConfig& config);

// Same, onto a caller-provided lattice.
VoxelGrid compound_onto(std::span<const trackio::SyncedFrame> synced, const GridGeometry& geometry,
                        const CompoundingConfig& config);

// Voxels holding a value after finalization (directly splatted or hole-filled).
std::size_t count_filled(std::span<const trackio::SyncedFrame> synced, const GridGeometry& geometry,
                         const CompoundingConfig& config);

}  // namespace thyrovol::compounder
