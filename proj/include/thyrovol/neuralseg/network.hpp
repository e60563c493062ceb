#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "thyrovol/neuralseg/tensor.hpp"

namespace thyrovol::neuralseg {

// Encoder-decoder layout. Every dense block is
//   BN -> ReLU -> conv kxk -> BN -> ReLU -> conv kxk -> BN -> ReLU -> conv 1x1
// followed by channel dropout. Encoders end in 2x2 max pooling whose indices
// drive the matching decoder's unpooling; the unpooled map is concatenated
// with the encoder output before the decoder block. The bottleneck is conv kxk
// + BN, the classifier conv 1x1 + softmax. Output channel c is the
// probability of label c (0 background, 1 thyroid).
struct ArchitectureSpec {
  int num_encoders = 4;
  int num_decoders = 4;
  int in_channels = 1;
  int channels = 16;
  int kernel_size = 5;
  int num_classes = 2;
  double dropout = 0.5;
  double bn_momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
  double bn_eps = 1e-5;
  int input_size = 64;  // canvas edge used by slice-wise inference

  void validate() const;  // ConfigError
  int divisor() const { return 1 << num_encoders; }
};

struct ParameterBlock {
  std::string name;  // e.g. "enc1.conv1.weight"
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Network with a flat parameter vector. Parameter order follows the layer
// order: for each conv its weights (out, in, ky, kx) then bias; for each batch
// norm gamma then beta. Running statistics are stored separately as mean then
// variance per batch norm.
class Network {
 public:
  Network(const ArchitectureSpec& spec, std::uint64_t init_seed);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  ~Network();

  const ArchitectureSpec& spec() const;

  std::span<double> parameters();
  std::span<const double> parameters() const;
  std::span<const double> gradients() const;
  std::span<double> running_stats();
  std::span<const double> running_stats() const;
  const std::vector<ParameterBlock>& layout() const;
  void zero_grad();

  // Per-pixel class probabilities, shape (n, num_classes, h, w). Training mode
  // uses batch statistics, updates the running statistics and applies dropout
  // with masks drawn from `dropout_seed`. ShapeError on a bad input shape.
  const Tensor4& forward(const Tensor4& input, bool training, std::uint64_t dropout_seed = 0);

  // Backpropagates dL/d(probabilities) from the last training forward and
  // accumulates into gradients(). StateError when there is no such forward.
  void backward(const Tensor4& grad_probabilities);

  // Probabilities with parameter `index` shifted by `delta`, computed from the
  // activations of the last training forward without touching the stored
  // state, parameters or running statistics. Only layers downstream of the
  // parameter are recomputed, and only the channels that actually change.
  const Tensor4& perturbed_forward(std::size_t index, double delta);
  // ReLU inputs that changed sign plus pooling windows whose argmax moved in
  // the last perturbed_forward. Nonzero means the loss is not smooth over the
  // step.
  std::size_t last_perturbation_kinks() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace thyrovol::neuralseg
