#include "thyrovol/neuralseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "thyrovol/core/error.hpp"
#include "thyrovol/core/seed.hpp"
#include "thyrovol/core/text.hpp"

namespace thyrovol::neuralseg {

namespace {

void check_dataset(const std::vector<TrainingSample>& set, const char* what, int divisor, int& w, int& h) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& s = set[i];
    if (w < 0) {
      w = s.image.width;
      h = s.image.height;
    }
    const std::string where = std::string(what) + " sample " + std::to_string(i);
    if (s.image.width != w || s.image.height != h) {
      throw DataError(where + " is " + std::to_string(s.image.width) + "x" + std::to_string(s.image.height) +
                      ", expected " + std::to_string(w) + "x" + std::to_string(h));
    }
    if (s.image.data.size() != static_cast<std::size_t>(w) * h || s.mask.width != w || s.mask.height != h ||
        s.mask.data.size() != s.image.data.size()) {
      throw DataError(where + ": mask does not match its image");
    }
    if (w % divisor != 0 || h % divisor != 0 || w == 0 || h == 0) {
      throw DataError(where + ": size must be a positive multiple of " + std::to_string(divisor));
    }
  }
}

// Packs samples[order[begin..end)] into network input, targets and edge maps.
void pack(const std::vector<TrainingSample>& set, const std::vector<std::size_t>& order, std::size_t begin,
          std::size_t end, Tensor4& x, std::vector<std::uint8_t>& target, std::vector<double>& edge) {
  const int w = set[order[begin]].image.width, h = set[order[begin]].image.height;
  const std::size_t hw = static_cast<std::size_t>(w) * h;
  x = Tensor4(static_cast<int>(end - begin), 1, h, w);
  target.resize((end - begin) * hw);
  edge.resize((end - begin) * hw);
  for (std::size_t j = begin; j < end; ++j) {
    const auto& s = set[order[j]];
    const std::size_t off = (j - begin) * hw;
    std::copy(s.image.data.begin(), s.image.data.end(), x.value.begin() + static_cast<std::ptrdiff_t>(off));
    for (std::size_t i = 0; i < hw; ++i) target[off + i] = s.mask.data[i] ? 1 : 0;
    const auto e = edge_map(s.mask);
    std::copy(e.data.begin(), e.data.end(), edge.begin() + static_cast<std::ptrdiff_t>(off));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  loss().validate();
  optimizer_config().validate();
}

LossConfig TrainConfig::loss() const {
  LossConfig l;
  l.dice_weight = dice_weight;
  l.ce_weight = ce_weight;
  l.edge_weight_gain = edge_weight_gain;
  return l;
}

OptimizerConfig TrainConfig::optimizer_config() const {
  OptimizerConfig o;
  o.kind = optimizer;
  o.learning_rate = learning_rate;
  o.momentum = momentum;
  return o;
}

Evaluation evaluate(Network& net, const std::vector<TrainingSample>& samples, const LossConfig& loss, int batch_size) {
  Evaluation ev;
  if (samples.empty()) return ev;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Tensor4 x;
  std::vector<std::uint8_t> target;
  std::vector<double> edge;
  double inter = 0.0, total = 0.0;
  LossConfig sum_cfg = loss;
  sum_cfg.reduction = Reduction::Sum;
  for (std::size_t b = 0; b < samples.size(); b += batch_size) {
    const std::size_t e = std::min(samples.size(), b + batch_size);
    pack(samples, order, b, e, x, target, edge);
    const Tensor4& p = net.forward(x, false);
    ev.loss += combined_loss(p, target, edge, sum_cfg).total;
    const std::size_t hw = p.plane();
    for (int s = 0; s < p.n; ++s) {
      for (std::size_t i = 0; i < hw; ++i) {
        const bool fg = p.value[(2 * static_cast<std::size_t>(s) + 1) * hw + i] > p.value[2 * s * hw + i];
        const bool g = target[s * hw + i] != 0;
        inter += fg && g;
        total += static_cast<double>(fg) + static_cast<double>(g);
      }
    }
  }
  ev.loss /= static_cast<double>(samples.size());
  ev.hard_dice = total > 0 ? 2.0 * inter / total : 1.0;
  return ev;
}

TrainResult train(Network net, const std::vector<TrainingSample>& train_set, const std::vector<TrainingSample>& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  int w = -1, h = -1;
  const int divisor = net.spec().divisor();
  check_dataset(train_set, "training", divisor, w, h);
  check_dataset(val_set, "validation", divisor, w, h);
  const auto& scored = val_set.empty() ? train_set : val_set;

  const LossConfig loss = cfg.loss();
  Optimizer opt(cfg.optimizer_config(), net.parameters().size());
  TrainResult result{net, 0, {}, {}, {}};
  double best_dice = -1.0;

  std::vector<std::size_t> order(train_set.size());
  Tensor4 x, grad;
  std::vector<std::uint8_t> target;
  std::vector<double> edge;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    int steps = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size, ++steps) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      pack(train_set, order, b, e, x, target, edge);
      const std::uint64_t dseed =
          derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(steps)});
      const Tensor4& p = net.forward(x, true, dseed);
      const LossValue lv = combined_loss(p, target, edge, loss, &grad);
      net.zero_grad();
      net.backward(grad);
      opt.step(net.parameters(), net.gradients());
      result.step_loss.push_back(lv.total);
      result.step_soft_dice.push_back(lv.soft_dice);
      epoch_loss += lv.total;
    }

    const Evaluation ev = evaluate(net, scored, loss);
    const EpochMetrics m{epoch, epoch_loss / steps, ev.loss, ev.hard_dice};
    result.epochs.push_back(m);
    if (ev.hard_dice > best_dice) {
      best_dice = ev.hard_dice;
      result.best_epoch = epoch;
      result.model = net;
    }
    if (on_epoch) on_epoch(m);
  }
  return result;
}

void write_metrics_csv(const std::vector<EpochMetrics>& metrics, std::ostream& out) {
  out << "epoch,train_loss,val_loss,val_dice\n";
  for (const auto& m : metrics) {
    out << m.epoch << ',' << format_double(m.train_loss) << ',' << format_double(m.val_loss) << ','
        << format_double(m.val_dice) << '\n';
  }
}

}  // namespace thyrovol::neuralseg
