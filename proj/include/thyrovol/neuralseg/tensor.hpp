#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace thyrovol::neuralseg {

// Dense NCHW tensor of doubles with an optional gradient of the same shape.
struct Tensor4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> value;
  std::vector<double> grad;  // empty unless requested

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_), value(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t offset(int b, int ch, int y, int x) const {
    return ((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x;
  }
  double& at(int b, int ch, int y, int x) { return value[offset(b, ch, y, x)]; }
  double at(int b, int ch, int y, int x) const { return value[offset(b, ch, y, x)]; }

  std::string shape_string() const;
  // ShapeError when the buffers disagree with the shape.
  void validate() const;
};

}  // namespace thyrovol::neuralseg
