#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "thyrovol/core/grid.hpp"
#include "thyrovol/neuralseg/loss.hpp"
#include "thyrovol/neuralseg/network.hpp"
#include "thyrovol/neuralseg/optim.hpp"

namespace thyrovol::neuralseg {

struct TrainingSample {
  Slice image;  // intensities in [0, 1]
  LabelSlice mask;
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 4;
  double learning_rate = 1e-5;
  double dice_weight = 1.0;
  double ce_weight = 1.0;
  double edge_weight_gain = 2.0;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double momentum = 0.9;

  void validate() const;  // ConfigError
  LossConfig loss() const;
  OptimizerConfig optimizer_config() const;
};

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean of the step losses
  double val_loss = 0.0;
  double val_dice = 0.0;  // hard dice pooled over every validation pixel
};

struct TrainResult {
  Network model;  // parameters of the epoch with the best validation dice
  int best_epoch = 0;
  std::vector<EpochMetrics> epochs;
  std::vector<double> step_loss;  // per optimizer step, before the update
  std::vector<double> step_soft_dice;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Mini-batch training with a per-epoch shuffle and dropout streams derived
// from cfg.seed. With an empty validation set the training set is scored
// instead. DataError on empty or shape-inconsistent data.
TrainResult train(Network net, const std::vector<TrainingSample>& train_set,
                  const std::vector<TrainingSample>& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct Evaluation {
  double loss = 0.0;       // mean per-sample loss
  double hard_dice = 0.0;  // pooled
};

Evaluation evaluate(Network& net, const std::vector<TrainingSample>& samples, const LossConfig& loss,
                    int batch_size = 8);

void write_metrics_csv(const std::vector<EpochMetrics>& metrics, std::ostream& out);

}  // namespace thyrovol::neuralseg
