#include "thyrovol/neuralseg/layers.hpp"

#include <algorithm>

#include "thyrovol/core/error.hpp"

namespace thyrovol::neuralseg {

void max_pool_plane(const double* in, int w, int oh, int ow, double* out, int* idx) {
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      int best = (2 * y) * w + 2 * x;
      double bv = in[best];
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int p = (2 * y + dy) * w + 2 * x + dx;
          if (in[p] > bv) {
            bv = in[p];
            best = p;
          }
        }
      }
      out[y * ow + x] = bv;
      idx[y * ow + x] = best;
    }
  }
}

void max_unpool_plane(const double* in, const int* idx, std::size_t n, double* out, std::size_t out_n) {
  std::fill(out, out + out_n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out[idx[i]] = in[i];
}

Tensor4 max_pool_2x2(const Tensor4& x, std::vector<int>& idx) {
  x.validate();
  if (x.h % 2 != 0 || x.w % 2 != 0) throw ShapeError("max pooling needs even height and width, got " + x.shape_string());
  Tensor4 out(x.n, x.c, x.h / 2, x.w / 2);
  idx.assign(out.size(), 0);
  for (int b = 0; b < x.n; ++b) {
    for (int c = 0; c < x.c; ++c) {
      max_pool_plane(x.value.data() + x.offset(b, c, 0, 0), x.w, out.h, out.w, out.value.data() + out.offset(b, c, 0, 0),
                     idx.data() + out.offset(b, c, 0, 0));
    }
  }
  return out;
}

Tensor4 max_unpool_2x2(const Tensor4& x, const std::vector<int>& idx, int out_h, int out_w) {
  x.validate();
  if (idx.size() != x.size() || out_h != 2 * x.h || out_w != 2 * x.w) {
    throw ShapeError("unpooling " + x.shape_string() + " needs matching indices and a 2x output");
  }
  Tensor4 out(x.n, x.c, out_h, out_w);
  for (int b = 0; b < x.n; ++b) {
    for (int c = 0; c < x.c; ++c) {
      max_unpool_plane(x.value.data() + x.offset(b, c, 0, 0), idx.data() + x.offset(b, c, 0, 0), x.plane(),
                       out.value.data() + out.offset(b, c, 0, 0), out.plane());
    }
  }
  return out;
}

}  // namespace thyrovol::neuralseg
