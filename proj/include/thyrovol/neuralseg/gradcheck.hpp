#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "thyrovol/neuralseg/loss.hpp"
#include "thyrovol/neuralseg/network.hpp"

namespace thyrovol::neuralseg {

struct GradcheckConfig {
  double step = 1e-4;
  double tolerance = 1e-3;
  // Relative error is |a - n| / max(|a|, |n|, floor); gradients below the
  // floor are compared absolutely against it.
  double floor = 1e-7;
  std::uint64_t dropout_seed = 0;
  int threads = 1;
  std::vector<std::size_t> indices;  // empty: every parameter
};

struct GradcheckEntry {
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool kink = false;  // the +-step evaluations crossed a ReLU or pooling switch
};

struct GradcheckReport {
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::size_t kinked = 0;          // parameters whose step crossed a kink
  std::size_t kinked_failures = 0;  // failures among those
  GradcheckEntry worst;
  std::vector<GradcheckEntry> failed;  // capped at 20
};

// Draws gamma ~ U(0.5, 1.5) and beta ~ U(-0.5, 0.5) for every batch norm.
// At the identity initialisation the bottleneck output has exactly zero batch
// mean, so the unpooled zeros normalise to 0 and sit on the ReLU kink, where
// finite differences and backprop legitimately disagree.
void randomize_batchnorm(Network& net, std::uint64_t seed);

// Compares backprop gradients of the training-mode loss with central finite
// differences, parameter by parameter. The network is left unchanged apart
// from its gradient buffer and running statistics.
GradcheckReport gradcheck(Network& net, const Tensor4& input, std::span<const std::uint8_t> target,
                          std::span<const double> edge, const LossConfig& loss, const GradcheckConfig& cfg);

}  // namespace thyrovol::neuralseg
