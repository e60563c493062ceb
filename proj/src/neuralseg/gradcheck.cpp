#include "thyrovol/neuralseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "thyrovol/core/error.hpp"

namespace thyrovol::neuralseg {

void randomize_batchnorm(Network& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  auto params = net.parameters();
  for (const auto& b : net.layout()) {
    const bool gamma = b.name.ends_with(".gamma");
    if (!gamma && !b.name.ends_with(".beta")) continue;
    for (std::size_t i = 0; i < b.size; ++i) params[b.offset + i] = (gamma ? 1.0 : 0.0) + u(rng);
  }
}

GradcheckReport gradcheck(Network& net, const Tensor4& input, std::span<const std::uint8_t> target,
                          std::span<const double> edge, const LossConfig& loss, const GradcheckConfig& cfg) {
  if (!(cfg.step > 0.0) || !(cfg.tolerance > 0.0) || !(cfg.floor > 0.0) || cfg.threads < 1) {
    throw ConfigError("gradcheck needs positive step, tolerance, floor and threads");
  }
  net.zero_grad();
  Tensor4 dp;
  combined_loss(net.forward(input, true, cfg.dropout_seed), target, edge, loss, &dp);
  net.backward(dp);
  const std::vector<double> analytic(net.gradients().begin(), net.gradients().end());

  std::vector<std::size_t> indices = cfg.indices;
  if (indices.empty()) {
    indices.resize(analytic.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  }
  for (std::size_t i : indices) {
    if (i >= analytic.size()) throw OutOfRangeError("gradcheck index " + std::to_string(i) + " out of range");
  }

  std::vector<double> numeric(indices.size());
  std::vector<std::uint8_t> kinked(indices.size(), 0);
  auto work = [&](Network& local, std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const double up = combined_loss(local.perturbed_forward(indices[j], cfg.step), target, edge, loss).total;
      const bool k1 = local.last_perturbation_kinks() > 0;
      const double down = combined_loss(local.perturbed_forward(indices[j], -cfg.step), target, edge, loss).total;
      kinked[j] = k1 || local.last_perturbation_kinks() > 0;
      numeric[j] = (up - down) / (2.0 * cfg.step);
    }
  };

  const std::size_t workers = std::min<std::size_t>(cfg.threads, std::max<std::size_t>(1, indices.size()));
  if (workers == 1) {
    work(net, 0, indices.size());
  } else {
    // Each worker owns a copy carrying the same stored activations.
    std::vector<Network> copies(workers - 1, net);
    std::vector<std::thread> pool;
    const std::size_t chunk = (indices.size() + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
      const std::size_t b = std::min(indices.size(), w * chunk), e = std::min(indices.size(), (w + 1) * chunk);
      pool.emplace_back([&, w, b, e] { work(copies[w - 1], b, e); });
    }
    work(net, 0, std::min(indices.size(), chunk));
    for (auto& t : pool) t.join();
  }

  GradcheckReport report;
  report.checked = indices.size();
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const double a = analytic[indices[j]], n = numeric[j];
    const double denom = std::max({std::abs(a), std::abs(n), cfg.floor});
    const GradcheckEntry e{indices[j], a, n, std::abs(a - n) / denom, kinked[j] != 0};
    report.kinked += e.kink;
    if (j == 0 || e.rel_error > report.worst.rel_error) report.worst = e;
    if (e.rel_error > cfg.tolerance) {
      ++report.failures;
      report.kinked_failures += e.kink;
      if (report.failed.size() < 20) report.failed.push_back(e);
    }
  }
  return report;
}

}  // namespace thyrovol::neuralseg
