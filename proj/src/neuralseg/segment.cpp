#include "thyrovol/neuralseg/segment.hpp"

#include <algorithm>

#include "thyrovol/compounder/resample.hpp"
#include "thyrovol/core/error.hpp"

namespace thyrovol::neuralseg {

std::vector<LabelSlice> segment_slices(Network& net, const std::vector<Slice>& slices, int batch_size) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<LabelSlice> out;
  out.reserve(slices.size());
  if (slices.empty()) return out;
  const int w = slices.front().width, h = slices.front().height;
  const std::size_t hw = static_cast<std::size_t>(w) * h;
  for (std::size_t b = 0; b < slices.size(); b += batch_size) {
    const std::size_t e = std::min(slices.size(), b + static_cast<std::size_t>(batch_size));
    Tensor4 x(static_cast<int>(e - b), 1, h, w);
    for (std::size_t j = b; j < e; ++j) {
      if (slices[j].width != w || slices[j].height != h) throw ShapeError("slices differ in size");
      std::copy(slices[j].data.begin(), slices[j].data.end(), x.value.begin() + static_cast<std::ptrdiff_t>((j - b) * hw));
    }
    const Tensor4& p = net.forward(x, false);
    for (std::size_t j = b; j < e; ++j) {
      LabelSlice m(w, h, 0);
      const double* p0 = p.value.data() + 2 * (j - b) * hw;
      const double* p1 = p0 + hw;
      for (std::size_t i = 0; i < hw; ++i) m.data[i] = p1[i] > p0[i] ? 1 : 0;
      out.push_back(std::move(m));
    }
  }
  return out;
}

LabelVolume segment_volume(Network& net, const VoxelGrid& grid, const SegmentOptions& opt) {
  grid.geometry.validate();
  const int n = net.spec().input_size;
  VoxelGrid src = grid;
  const int nx = grid.geometry.dims[0];
  auto flip = [&](auto& vol) {
    for (int k = 0; k < vol.geometry.dims[2]; ++k) {
      for (int j = 0; j < vol.geometry.dims[1]; ++j) {
        for (int i = 0; i < nx / 2; ++i) std::swap(vol.at(i, j, k), vol.at(nx - 1 - i, j, k));
      }
    }
  };
  if (opt.mirror) flip(src);
  const compounder::AxialStack stack = compounder::resample_axial(src, n, n);
  LabelVolume mask = compounder::labels_to_grid(segment_slices(net, stack.slices, opt.batch_size), stack.mapping);
  if (opt.mirror) flip(mask);
  mask.geometry = grid.geometry;
  return mask;
}

}  // namespace thyrovol::neuralseg
