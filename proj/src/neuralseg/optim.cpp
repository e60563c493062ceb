#include "thyrovol/neuralseg/optim.hpp"

#include <cmath>

#include "thyrovol/core/error.hpp"

namespace thyrovol::neuralseg {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
}

Optimizer::Optimizer(const OptimizerConfig& cfg, std::size_t size) : cfg_(cfg), m_(size, 0.0) {
  cfg_.validate();
  if (cfg_.kind == OptimizerKind::Adam) v_.assign(size, 0.0);
}

void Optimizer::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("optimizer built for " + std::to_string(m_.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  ++t_;
  const double lr = cfg_.learning_rate;
  if (cfg_.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.momentum * m_[i] + grads[i];
      params[i] -= lr * m_[i];
    }
    return;
  }
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.adam_eps);
  }
}

}  // namespace thyrovol::neuralseg
