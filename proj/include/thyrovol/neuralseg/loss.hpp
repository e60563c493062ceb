#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "thyrovol/core/grid.hpp"
#include "thyrovol/neuralseg/tensor.hpp"

namespace thyrovol::neuralseg {

enum class Reduction { Mean, Sum };

struct LossConfig {
  double dice_weight = 1.0;
  double ce_weight = 1.0;
  double edge_weight_gain = 2.0;  // CE pixel weight = 1 + gain * edge
  double epsilon = 1e-6;          // soft dice denominator
  Reduction reduction = Reduction::Mean;  // over batch elements

  void validate() const;  // ConfigError
};

// Per-sample terms averaged over the batch (whatever the reduction); `total`
// follows the configured reduction.
struct LossValue {
  double total = 0.0;
  double dice_term = 0.0;
  double ce_term = 0.0;
  double soft_dice = 0.0;
};

// 1 where the 4-neighbourhood (including the pixel) holds both classes.
Image<double> edge_map(const LabelSlice& mask);

// Soft dice on the thyroid channel (1) of one sample.
double soft_dice(const Tensor4& probabilities, int sample, std::span<const std::uint8_t> target, double epsilon = 1e-6);

// Combined dice + edge-weighted cross entropy. `target` and `edge` hold n*h*w
// values in NCHW order without the channel axis. Writes dL/dp into `grad`
// when given. ShapeError on mismatched sizes.
LossValue combined_loss(const Tensor4& probabilities, std::span<const std::uint8_t> target,
                        std::span<const double> edge, const LossConfig& cfg, Tensor4* grad = nullptr);

}  // namespace thyrovol::neuralseg
