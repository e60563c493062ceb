#include "thyrovol/compounder/resample.hpp"

#include <algorithm>
#include <cmath>

#include "thyrovol/core/error.hpp"

namespace thyrovol::compounder {

AxialMapping axial_mapping(const GridGeometry& geometry, int target_width, int target_height) {
  if (target_width < 1 || target_height < 1) throw ConfigError("axial target size must be at least 1x1");
  geometry.validate();
  AxialMapping m;
  m.target_width = target_width;
  m.target_height = target_height;
  m.source = geometry;
  const double extent_x = geometry.dims[0] * geometry.spacing.x();
  const double extent_y = geometry.dims[1] * geometry.spacing.y();
  // Canvas pixels per mm: the largest isotropic scale that still fits.
  const double scale = std::min(target_width / extent_x, target_height / extent_y);
  m.pixel_size = 1.0 / scale;
  m.offset_u = (target_width - extent_x * scale) / 2.0;
  m.offset_v = (target_height - extent_y * scale) / 2.0;
  return m;
}

AxialStack resample_axial(const VoxelGrid& grid, int target_width, int target_height) {
  const GridGeometry& g = grid.geometry;
  AxialStack out;
  out.mapping = axial_mapping(g, target_width, target_height);
  const AxialMapping& m = out.mapping;
  out.pixel_area_mm2 = m.pixel_size * m.pixel_size;
  out.slice_thickness_mm = g.spacing.z();

  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  const double sx = g.spacing.x(), sy = g.spacing.y();
  // Content region in canvas coordinates.
  const double u_lo = m.offset_u, u_hi = target_width - m.offset_u;
  const double v_lo = m.offset_v, v_hi = target_height - m.offset_v;

  // Per-column and per-row source coordinates are shared by every plane.
  struct Tap {
    int i0, i1;
    double f;
    bool inside;
  };
  auto taps = [](int n_out, double lo, double hi, double offset, double pixel, double spacing, int n_src) {
    std::vector<Tap> t(static_cast<std::size_t>(n_out));
    for (int u = 0; u < n_out; ++u) {
      const double centre = u + 0.5;
      Tap& tap = t[static_cast<std::size_t>(u)];
      tap.inside = centre > lo && centre < hi;
      double c = (centre - offset) * (pixel / spacing) - 0.5;
      if (std::abs(c - std::round(c)) < 1e-9) c = std::round(c);
      c = std::clamp(c, 0.0, static_cast<double>(n_src - 1));
      tap.i0 = static_cast<int>(std::floor(c));
      tap.i1 = std::min(tap.i0 + 1, n_src - 1);
      tap.f = c - tap.i0;
    }
    return t;
  };
  const auto tu = taps(target_width, u_lo, u_hi, m.offset_u, m.pixel_size, sx, nx);
  const auto tv = taps(target_height, v_lo, v_hi, m.offset_v, m.pixel_size, sy, ny);

  out.slices.reserve(static_cast<std::size_t>(nz));
  for (int k = 0; k < nz; ++k) {
    Slice s(target_width, target_height, 0.0f);
    for (int v = 0; v < target_height; ++v) {
      const Tap& ty = tv[static_cast<std::size_t>(v)];
      if (!ty.inside) continue;
      for (int u = 0; u < target_width; ++u) {
        const Tap& tx = tu[static_cast<std::size_t>(u)];
        if (!tx.inside) continue;
        const double a = grid.at(tx.i0, ty.i0, k), b = grid.at(tx.i1, ty.i0, k);
        const double c = grid.at(tx.i0, ty.i1, k), d = grid.at(tx.i1, ty.i1, k);
        const double top = a + tx.f * (b - a);
        const double bottom = c + tx.f * (d - c);
        s.at(u, v) = static_cast<float>(top + ty.f * (bottom - top));
      }
    }
    out.slices.push_back(std::move(s));
  }
  return out;
}

LabelVolume labels_to_grid(const std::vector<LabelSlice>& labels, const AxialMapping& m) {
  const GridGeometry& g = m.source;
  if (static_cast<int>(labels.size()) != g.dims[2]) {
    throw ShapeError("labels_to_grid: expected " + std::to_string(g.dims[2]) + " slices, got " +
                     std::to_string(labels.size()));
  }
  LabelVolume out(g, 0);
  const int nx = g.dims[0], ny = g.dims[1];
  std::vector<int> us(static_cast<std::size_t>(nx)), vs(static_cast<std::size_t>(ny));
  for (int i = 0; i < nx; ++i) {
    const double u = (i * g.spacing.x() + g.spacing.x() / 2.0) / m.pixel_size + m.offset_u - 0.5;
    us[static_cast<std::size_t>(i)] = std::clamp(static_cast<int>(std::lround(u)), 0, m.target_width - 1);
  }
  for (int j = 0; j < ny; ++j) {
    const double v = (j * g.spacing.y() + g.spacing.y() / 2.0) / m.pixel_size + m.offset_v - 0.5;
    vs[static_cast<std::size_t>(j)] = std::clamp(static_cast<int>(std::lround(v)), 0, m.target_height - 1);
  }
  for (int k = 0; k < g.dims[2]; ++k) {
    const LabelSlice& s = labels[static_cast<std::size_t>(k)];
    if (s.width != m.target_width || s.height != m.target_height) {
      throw ShapeError("labels_to_grid: slice size does not match the mapping canvas");
    }
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) out.at(i, j, k) = s.at(us[static_cast<std::size_t>(i)], vs[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

}  // namespace thyrovol::compounder
