#include "thyrovol/neuralseg/tensor.hpp"

#include "thyrovol/core/error.hpp"

namespace thyrovol::neuralseg {

std::string Tensor4::shape_string() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " + std::to_string(w) +
         ")";
}

void Tensor4::validate() const {
  if (n < 0 || c < 0 || h < 0 || w < 0) throw ShapeError("negative tensor dimension " + shape_string());
  if (value.size() != size()) {
    throw ShapeError("tensor " + shape_string() + " holds " + std::to_string(value.size()) + " values, expected " +
                     std::to_string(size()));
  }
  if (!grad.empty() && grad.size() != size()) {
    throw ShapeError("tensor " + shape_string() + " gradient holds " + std::to_string(grad.size()) + " values");
  }
}

}  // namespace thyrovol::neuralseg
