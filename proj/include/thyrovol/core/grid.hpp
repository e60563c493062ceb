#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "thyrovol/core/error.hpp"
#include "thyrovol/core/geometry.hpp"

namespace thyrovol {

// Axis-aligned voxel lattice. Voxel (i,j,k) sits at origin + (i*sx, j*sy, k*sz);
// storage is x-fastest.
struct GridGeometry {
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  std::array<int, 3> dims{1, 1, 1};

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }
  Vec3 position(int i, int j, int k) const {
    return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
  }
  double voxel_volume_mm3() const { return spacing.x() * spacing.y() * spacing.z(); }

  // Throws ConfigError when spacing or dims are degenerate.
  void validate() const;

  bool operator==(const GridGeometry& other) const {
    return origin == other.origin && spacing == other.spacing && dims == other.dims;
  }
};

template <class T>
struct Volume {
  GridGeometry geometry;
  std::vector<T> data;

  Volume() = default;
  explicit Volume(const GridGeometry& g, T fill = T{}) : geometry(g), data(g.voxel_count(), fill) {}

  T& at(int i, int j, int k) { return data[geometry.index(i, j, k)]; }
  const T& at(int i, int j, int k) const { return data[geometry.index(i, j, k)]; }
};

// Scalar volume with intensities in [0,1].
using VoxelGrid = Volume<float>;
// Per-voxel class labels, 0 background / 1 foreground.
using LabelVolume = Volume<std::uint8_t>;

template <class T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

using Slice = Image<float>;
using LabelSlice = Image<std::uint8_t>;

}  // namespace thyrovol
