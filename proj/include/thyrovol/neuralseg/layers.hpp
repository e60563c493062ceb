#pragma once

#include <cstddef>
#include <vector>

#include "thyrovol/neuralseg/tensor.hpp"

namespace thyrovol::neuralseg {

// 2x2 stride-2 max pooling of one plane of width `w`. Ties keep the first
// maximum in row-major window order; idx receives the flat input position.
void max_pool_plane(const double* in, int w, int out_h, int out_w, double* out, int* idx);
// Scatters `n` values to their recorded positions in a zeroed plane of out_n.
void max_unpool_plane(const double* in, const int* idx, std::size_t n, double* out, std::size_t out_n);

// Tensor versions; idx has one entry per output element.
Tensor4 max_pool_2x2(const Tensor4& x, std::vector<int>& idx);
Tensor4 max_unpool_2x2(const Tensor4& x, const std::vector<int>& idx, int out_h, int out_w);

}  // namespace thyrovol::neuralseg
