#pragma once

#include <span>
#include <string>
#include <vector>

namespace thyrovol::neuralseg {

enum class OptimizerKind { Sgd, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);  // ConfigError

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double learning_rate = 1e-5;
  double momentum = 0.9;  // SGD only
  double beta1 = 0.9;     // Adam
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;  // ConfigError
};

// Plain in-place update rule over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, std::size_t size);

  void step(std::span<double> params, std::span<const double> grads);
  long steps() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

}  // namespace thyrovol::neuralseg
