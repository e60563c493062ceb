#include "thyrovol/neuralseg/loss.hpp"

#include <algorithm>
#include <cmath>

#include "thyrovol/core/error.hpp"

namespace thyrovol::neuralseg {

namespace {

constexpr double kMinProb = 1e-12;

void check_shapes(const Tensor4& p, std::size_t target, std::size_t edge) {
  p.validate();
  if (p.c != 2) throw ShapeError("loss expects 2 probability channels, got " + p.shape_string());
  const std::size_t expected = static_cast<std::size_t>(p.n) * p.plane();
  if (target != expected) {
    throw ShapeError("target holds " + std::to_string(target) + " labels, expected " + std::to_string(expected) +
                     " for probabilities " + p.shape_string());
  }
  if (edge != expected) {
    throw ShapeError("edge map holds " + std::to_string(edge) + " values, expected " + std::to_string(expected));
  }
}

}  // namespace

void LossConfig::validate() const {
  if (!(dice_weight >= 0.0) || !(ce_weight >= 0.0)) throw ConfigError("loss weights must be >= 0");
  if (!(edge_weight_gain >= 0.0)) throw ConfigError("edge_weight_gain must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("dice epsilon must be > 0");
}

Image<double> edge_map(const LabelSlice& mask) {
  Image<double> out(mask.width, mask.height, 0.0);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const bool fg = mask.at(x, y) != 0;
      bool mixed = false;
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= mask.width || q[1] >= mask.height) continue;
        if ((mask.at(q[0], q[1]) != 0) != fg) mixed = true;
      }
      if (mixed) out.at(x, y) = 1.0;
    }
  }
  return out;
}

double soft_dice(const Tensor4& p, int sample, std::span<const std::uint8_t> target, double epsilon) {
  const std::size_t hw = p.plane();
  if (p.c != 2 || sample < 0 || sample >= p.n || target.size() < (static_cast<std::size_t>(sample) + 1) * hw) {
    throw ShapeError("soft_dice: sample " + std::to_string(sample) + " out of " + p.shape_string());
  }
  const double* fg = p.value.data() + p.offset(sample, 1, 0, 0);
  const std::uint8_t* g = target.data() + static_cast<std::size_t>(sample) * hw;
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < hw; ++i) {
    const double gi = g[i] ? 1.0 : 0.0;
    inter += fg[i] * gi;
    sp += fg[i];
    sg += gi;
  }
  return 2.0 * inter / (sp + sg + epsilon);
}

LossValue combined_loss(const Tensor4& p, std::span<const std::uint8_t> target, std::span<const double> edge,
                        const LossConfig& cfg, Tensor4* grad) {
  cfg.validate();
  check_shapes(p, target.size(), edge.size());
  const std::size_t hw = p.plane();
  const double N = static_cast<double>(hw);
  const double scale = cfg.reduction == Reduction::Mean ? 1.0 / p.n : 1.0;
  if (grad) *grad = Tensor4(p.n, p.c, p.h, p.w);

  LossValue out;
  for (int b = 0; b < p.n; ++b) {
    const double* p0 = p.value.data() + p.offset(b, 0, 0, 0);
    const double* p1 = p.value.data() + p.offset(b, 1, 0, 0);
    const std::uint8_t* g = target.data() + static_cast<std::size_t>(b) * hw;
    const double* e = edge.data() + static_cast<std::size_t>(b) * hw;

    double inter = 0.0, sp = 0.0, sg = 0.0, ce = 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      const double gi = g[i] ? 1.0 : 0.0;
      inter += p1[i] * gi;
      sp += p1[i];
      sg += gi;
      const double wi = 1.0 + cfg.edge_weight_gain * e[i];
      ce -= wi * std::log(std::max(g[i] ? p1[i] : p0[i], kMinProb));
    }
    ce /= N;
    const double S = sp + sg + cfg.epsilon;
    const double dice = 2.0 * inter / S;
    out.soft_dice += dice / p.n;
    out.dice_term += (1.0 - dice) / p.n;
    out.ce_term += ce / p.n;
    out.total += scale * (cfg.dice_weight * (1.0 - dice) + cfg.ce_weight * ce);

    if (!grad) continue;
    double* d0 = grad->value.data() + grad->offset(b, 0, 0, 0);
    double* d1 = grad->value.data() + grad->offset(b, 1, 0, 0);
    for (std::size_t i = 0; i < hw; ++i) {
      const double gi = g[i] ? 1.0 : 0.0;
      // d(1 - dice)/dp1 = -(2 g S - 2 I) / S^2
      d1[i] = -scale * cfg.dice_weight * (2.0 * gi * S - 2.0 * inter) / (S * S);
      const double wi = 1.0 + cfg.edge_weight_gain * e[i];
      if (g[i]) {
        d1[i] -= scale * cfg.ce_weight * wi / (std::max(p1[i], kMinProb) * N);
      } else {
        d0[i] = -scale * cfg.ce_weight * wi / (std::max(p0[i], kMinProb) * N);
      }
    }
  }
  return out;
}

}  // namespace thyrovol::neuralseg
