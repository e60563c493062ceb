#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "thyrovol/core/error.hpp"
#include "thyrovol/neuralseg/gradcheck.hpp"
#include "thyrovol/neuralseg/layers.hpp"
#include "thyrovol/neuralseg/loss.hpp"
#include "thyrovol/neuralseg/network.hpp"
#include "thyrovol/neuralseg/optim.hpp"

using namespace thyrovol;
using namespace thyrovol::neuralseg;

namespace {

Tensor4 random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  Tensor4 t(n, c, h, w);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : t.value) v = u(rng);
  return t;
}

ArchitectureSpec small_spec() {
  ArchitectureSpec s;
  s.num_encoders = 2;
  s.num_decoders = 2;
  s.channels = 4;
  s.kernel_size = 3;
  s.dropout = 0.0;
  return s;
}

// Disc target of n samples at h x w with radius r.
std::vector<std::uint8_t> disc_target(int n, int h, int w, double r) {
  std::vector<std::uint8_t> t(static_cast<std::size_t>(n) * h * w, 0);
  for (int b = 0; b < n; ++b) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dy = y + 0.5 - h / 2.0 - b, dx = x + 0.5 - w / 2.0;
        t[(static_cast<std::size_t>(b) * h + y) * w + x] = dx * dx + dy * dy < r * r;
      }
    }
  }
  return t;
}

std::vector<double> edges_of(const std::vector<std::uint8_t>& t, int n, int h, int w) {
  std::vector<double> e;
  for (int b = 0; b < n; ++b) {
    LabelSlice s(w, h);
    std::copy_n(t.begin() + static_cast<std::ptrdiff_t>(b) * h * w, h * w, s.data.begin());
    const auto m = edge_map(s);
    e.insert(e.end(), m.data.begin(), m.data.end());
  }
  return e;
}

}  // namespace

TEST(Architecture, Validation) {
  ArchitectureSpec s;
  EXPECT_NO_THROW(s.validate());
  s.num_decoders = 3;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.num_classes = 3;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.dropout = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.kernel_size = 4;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Network, DefaultParameterCount) {
  Network net(ArchitectureSpec{}, 1);
  EXPECT_EQ(net.parameters().size(), 131780u);
  std::size_t total = 0;
  for (const auto& b : net.layout()) {
    EXPECT_EQ(b.offset, total) << b.name;
    total += b.size;
  }
  EXPECT_EQ(total, net.parameters().size());
}

TEST(Network, ProbabilitiesSumToOne) {
  Network net(ArchitectureSpec{}, 3);
  const Tensor4 x = random_tensor(2, 1, 32, 48, 5);
  for (bool training : {true, false}) {
    const Tensor4& p = net.forward(x, training, 9);
    ASSERT_EQ(p.n, 2);
    ASSERT_EQ(p.c, 2);
    ASSERT_EQ(p.h, 32);
    ASSERT_EQ(p.w, 48);
    for (std::size_t i = 0; i < p.plane() * 2; ++i) {
      const std::size_t b = i / p.plane(), j = i % p.plane();
      const double a = p.value[b * 2 * p.plane() + j], c = p.value[(b * 2 + 1) * p.plane() + j];
      EXPECT_GT(a, 0.0);
      EXPECT_LT(a, 1.0);
      EXPECT_NEAR(a + c, 1.0, 1e-6);
    }
  }
}

TEST(Network, ZeroWeightsGiveHalf) {
  Network net(ArchitectureSpec{}, 3);
  for (const auto& b : net.layout()) {
    if (b.name.find(".weight") == std::string::npos) continue;
    std::fill_n(net.parameters().begin() + b.offset, b.size, 0.0);
  }
  const Tensor4& p = net.forward(random_tensor(1, 1, 32, 32, 2), false);
  for (double v : p.value) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Network, ShapeErrors) {
  Network net(ArchitectureSpec{}, 3);
  EXPECT_THROW(net.forward(Tensor4(1, 1, 24, 32), false), ShapeError);
  EXPECT_THROW(net.forward(Tensor4(1, 2, 32, 32), false), ShapeError);
  Tensor4 bad(1, 1, 32, 32);
  bad.value.pop_back();
  EXPECT_THROW(net.forward(bad, false), ShapeError);
}

TEST(Network, BackwardNeedsTrainingForward) {
  Network net(small_spec(), 3);
  EXPECT_THROW(net.backward(Tensor4(1, 2, 8, 8)), StateError);
  net.forward(random_tensor(1, 1, 8, 8, 1), false);
  EXPECT_THROW(net.backward(Tensor4(1, 2, 8, 8)), StateError);
  net.forward(random_tensor(1, 1, 8, 8, 1), true);
  EXPECT_THROW(net.backward(Tensor4(1, 2, 4, 8)), ShapeError);
  EXPECT_NO_THROW(net.backward(Tensor4(1, 2, 8, 8)));
}

TEST(Network, SameSeedSameInit) {
  Network a(ArchitectureSpec{}, 11), b(ArchitectureSpec{}, 11), c(ArchitectureSpec{}, 12);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

TEST(Network, InferenceIsDeterministicAndPerSample) {
  Network net(ArchitectureSpec{}, 4);
  const Tensor4 x = random_tensor(3, 1, 32, 32, 8);
  const std::vector<double> first = net.forward(x, false).value;
  EXPECT_EQ(net.forward(x, false).value, first);
  // Eval mode treats samples independently.
  Tensor4 one(1, 1, 32, 32);
  std::copy_n(x.value.begin() + 1024, 1024, one.value.begin());
  const std::vector<double> single = net.forward(one, false).value;
  for (std::size_t i = 0; i < single.size(); ++i) EXPECT_EQ(single[i], first[2048 + i]);
}

TEST(Network, DropoutOnlyWhenTraining) {
  ArchitectureSpec s = small_spec();
  s.dropout = 0.5;
  Network net(s, 4);
  const Tensor4 x = random_tensor(2, 1, 8, 8, 8);
  const auto e1 = net.forward(x, false).value;
  const auto e2 = net.forward(x, false, 123).value;
  EXPECT_EQ(e1, e2);
  const auto t1 = net.forward(x, true, 1).value;
  const auto t2 = net.forward(x, true, 1).value;
  const auto t3 = net.forward(x, true, 2).value;
  EXPECT_EQ(t1, t2);
  EXPECT_NE(t1, t3);
}

TEST(Pooling, UnpoolKeepsArgmaxOnly) {
  const Tensor4 x = random_tensor(2, 3, 8, 6, 21);
  std::vector<int> idx;
  const Tensor4 p = max_pool_2x2(x, idx);
  const Tensor4 u = max_unpool_2x2(p, idx, 8, 6);
  std::size_t nonzero = 0;
  for (int b = 0; b < 2; ++b) {
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < 4; ++y) {
        for (int xx = 0; xx < 3; ++xx) {
          // Brute-force window maximum.
          double best = -1;
          int by = 0, bx = 0;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const double v = x.at(b, c, 2 * y + dy, 2 * xx + dx);
              if (v > best) {
                best = v;
                by = 2 * y + dy;
                bx = 2 * xx + dx;
              }
            }
          }
          EXPECT_EQ(p.at(b, c, y, xx), best);
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const int yy = 2 * y + dy, xq = 2 * xx + dx;
              EXPECT_EQ(u.at(b, c, yy, xq), (yy == by && xq == bx) ? best : 0.0);
            }
          }
        }
      }
    }
  }
  for (double v : u.value) nonzero += v != 0.0;
  EXPECT_LE(nonzero * 4, u.size());
  std::vector<int> idx2;
  EXPECT_EQ(max_pool_2x2(u, idx2).value, p.value);
}

TEST(Pooling, OddShapeRejected) {
  std::vector<int> idx;
  EXPECT_THROW(max_pool_2x2(Tensor4(1, 1, 5, 4), idx), ShapeError);
}

TEST(EdgeMap, Examples) {
  LabelSlice bg(6, 5, 0);
  for (double v : edge_map(bg).data) EXPECT_EQ(v, 0.0);
  LabelSlice one(6, 5, 0);
  one.at(2, 2) = 1;
  const auto e = edge_map(one);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) {
      const bool flagged = std::abs(x - 2) + std::abs(y - 2) <= 1;
      EXPECT_EQ(e.at(x, y), flagged ? 1.0 : 0.0) << x << "," << y;
    }
  }
  LabelSlice full(4, 4, 1);
  for (double v : edge_map(full).data) EXPECT_EQ(v, 0.0);
}

TEST(EdgeMap, NonzeroIffNonConstant) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    LabelSlice m(7, 6, 0);
    const int count = trial % 5;
    for (int i = 0; i < count; ++i) m.data[rng() % m.data.size()] = 1;
    const auto e = edge_map(m);
    double sum = 0;
    for (double v : e.data) sum += v;
    bool constant = std::all_of(m.data.begin(), m.data.end(), [&](auto v) { return v == m.data[0]; });
    EXPECT_EQ(sum > 0, !constant);
    EXPECT_LE(sum, 42);
  }
}

TEST(Loss, PerfectPredictionIsZero) {
  const int h = 16, w = 16;
  const auto t = disc_target(1, h, w, 5);
  Tensor4 p(1, 2, h, w);
  for (int i = 0; i < h * w; ++i) {
    p.value[i] = t[i] ? 0.0 : 1.0;
    p.value[h * w + i] = t[i] ? 1.0 : 0.0;
  }
  const std::vector<double> e(h * w, 0.0);
  const auto l = combined_loss(p, t, e, {});
  EXPECT_NEAR(l.dice_term, 0.0, 1e-5);
  EXPECT_NEAR(l.ce_term, 0.0, 1e-12);
  EXPECT_NEAR(l.total, 0.0, 1e-5);
  EXPECT_NEAR(soft_dice(p, 0, t), 1.0, 1e-5);
}

TEST(Loss, UniformHalfOnHalfTarget) {
  const int h = 8, w = 8;
  std::vector<std::uint8_t> t(h * w, 0);
  for (int i = 0; i < h * w / 2; ++i) t[i] = 1;
  const Tensor4 p(1, 2, h, w, 0.5);
  const std::vector<double> e(h * w, 0.0);
  const auto l = combined_loss(p, t, e, {});
  EXPECT_NEAR(l.soft_dice, 0.5, 1e-7);
  EXPECT_NEAR(l.dice_term, 0.5, 1e-7);
  EXPECT_NEAR(l.ce_term, std::log(2.0), 1e-12);
}

TEST(Loss, EdgeGainIncreasesCrossEntropy) {
  const int h = 16, w = 16;
  const auto t = disc_target(1, h, w, 4);
  const auto e = edges_of(t, 1, h, w);
  const Tensor4 p = random_tensor(1, 2, h, w, 4);
  Tensor4 q = p;
  for (int i = 0; i < h * w; ++i) {
    const double s = q.value[i] + q.value[h * w + i];
    q.value[i] /= s;
    q.value[h * w + i] /= s;
  }
  LossConfig a, b;
  a.edge_weight_gain = 2.0;
  b.edge_weight_gain = 4.0;
  EXPECT_GT(combined_loss(q, t, e, b).ce_term, combined_loss(q, t, e, a).ce_term);
}

TEST(Loss, ShapeErrors) {
  const Tensor4 p(1, 2, 4, 4, 0.5);
  std::vector<std::uint8_t> t(15, 0);
  std::vector<double> e(16, 0.0);
  EXPECT_THROW(combined_loss(p, t, e, {}), ShapeError);
  t.resize(16);
  e.resize(17);
  EXPECT_THROW(combined_loss(p, t, e, {}), ShapeError);
  EXPECT_THROW(combined_loss(Tensor4(1, 3, 4, 4), t, std::vector<double>(16), {}), ShapeError);
}

TEST(Loss, SoftDiceBounded) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor4 p = random_tensor(1, 2, 8, 8, trial);
    for (int i = 0; i < 64; ++i) p.value[i] = 1.0 - p.value[64 + i];
    std::vector<std::uint8_t> t(64);
    for (auto& v : t) v = rng() % 2;
    const double d = soft_dice(p, 0, t);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}

TEST(Loss, GradientMatchesFiniteDifference) {
  const int h = 8, w = 8;
  const auto t = disc_target(2, h, w, 3);
  const auto e = edges_of(t, 2, h, w);
  Tensor4 p = random_tensor(2, 2, h, w, 6);
  for (auto& v : p.value) v = 0.05 + 0.9 * v;
  for (Reduction r : {Reduction::Mean, Reduction::Sum}) {
    LossConfig cfg;
    cfg.reduction = r;
    Tensor4 g;
    combined_loss(p, t, e, cfg, &g);
    for (std::size_t i = 0; i < p.size(); i += 7) {
      Tensor4 a = p, b = p;
      a.value[i] += 1e-6;
      b.value[i] -= 1e-6;
      const double fd = (combined_loss(a, t, e, cfg).total - combined_loss(b, t, e, cfg).total) / 2e-6;
      EXPECT_NEAR(g.value[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Loss, DuplicateSampleDoublesGradientUnderSum) {
  const int h = 8, w = 8;
  const auto t1 = disc_target(1, h, w, 3);
  const Tensor4 p1 = [&] {
    Tensor4 p = random_tensor(1, 2, h, w, 2);
    for (int i = 0; i < h * w; ++i) p.value[h * w + i] = 1.0 - p.value[i];
    return p;
  }();
  Tensor4 p2(2, 2, h, w);
  std::copy(p1.value.begin(), p1.value.end(), p2.value.begin());
  std::copy(p1.value.begin(), p1.value.end(), p2.value.begin() + p1.size());
  std::vector<std::uint8_t> t2 = t1;
  t2.insert(t2.end(), t1.begin(), t1.end());
  const auto e1 = edges_of(t1, 1, h, w);
  auto e2 = e1;
  e2.insert(e2.end(), e1.begin(), e1.end());

  LossConfig cfg;
  cfg.reduction = Reduction::Sum;
  Tensor4 g1, g2;
  const double l1 = combined_loss(p1, t1, e1, cfg, &g1).total;
  const double l2 = combined_loss(p2, t2, e2, cfg, &g2).total;
  EXPECT_DOUBLE_EQ(l2, 2 * l1);

  // Pull both back through the same network: duplicate input, doubled gradient.
  Network a(small_spec(), 7);
  randomize_batchnorm(a, 8);
  Network b = a;
  a.forward(random_tensor(1, 1, h, w, 3), true);
  Tensor4 x2(2, 1, h, w);
  const Tensor4 x1 = random_tensor(1, 1, h, w, 3);
  std::copy(x1.value.begin(), x1.value.end(), x2.value.begin());
  std::copy(x1.value.begin(), x1.value.end(), x2.value.begin() + x1.size());
  Tensor4 ga, gb;
  combined_loss(a.forward(x1, true), t1, e1, cfg, &ga);
  a.backward(ga);
  combined_loss(b.forward(x2, true), t2, e2, cfg, &gb);
  b.backward(gb);
  for (std::size_t i = 0; i < a.gradients().size(); ++i) {
    EXPECT_NEAR(b.gradients()[i], 2 * a.gradients()[i], 1e-9 * std::max(1.0, std::abs(a.gradients()[i])));
  }
}

TEST(Optimizer, ZeroLearningRateIsNoop) {
  for (OptimizerKind k : {OptimizerKind::Sgd, OptimizerKind::Adam}) {
    OptimizerConfig cfg;
    cfg.kind = k;
    cfg.learning_rate = 0.0;
    Optimizer opt(cfg, 3);
    std::vector<double> p{1, 2, 3};
    const std::vector<double> g{0.5, -1, 2};
    opt.step(p, g);
    EXPECT_EQ(p, (std::vector<double>{1, 2, 3}));
  }
}

TEST(Optimizer, SgdAndAdamSteps) {
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.5;
  Optimizer sgd(cfg, 1);
  std::vector<double> p{1.0};
  sgd.step(p, std::vector<double>{2.0});
  EXPECT_DOUBLE_EQ(p[0], 0.8);
  sgd.step(p, std::vector<double>{2.0});
  EXPECT_DOUBLE_EQ(p[0], 0.8 - 0.1 * 3.0);
  cfg.kind = OptimizerKind::Adam;
  Optimizer adam(cfg, 1);
  p = {1.0};
  adam.step(p, std::vector<double>{-4.0});
  EXPECT_NEAR(p[0], 1.1, 1e-8);  // first Adam step moves by lr against the gradient sign
  EXPECT_THROW(parse_optimizer("rmsprop"), ConfigError);
}

TEST(PerturbedForward, MatchesFullForwardAfterEdit) {
  ArchitectureSpec s = small_spec();
  s.dropout = 0.3;
  Network net(s, 13);
  const Tensor4 x = random_tensor(2, 1, 8, 8, 14);
  net.forward(x, true, 77);
  const std::vector<double> stats(net.running_stats().begin(), net.running_stats().end());
  std::mt19937_64 rng(15);
  for (const auto& blk : net.layout()) {
    for (int rep = 0; rep < 3; ++rep) {
      const std::size_t i = blk.offset + rng() % blk.size;
      const double delta = 1e-3;
      Network ref = net;
      const std::vector<double> alt = net.perturbed_forward(i, delta).value;
      ref.parameters()[i] += delta;
      const std::vector<double> full = ref.forward(x, true, 77).value;
      for (std::size_t j = 0; j < full.size(); ++j) ASSERT_NEAR(alt[j], full[j], 1e-12) << blk.name;
    }
  }
  // Stored state untouched.
  EXPECT_TRUE(std::equal(stats.begin(), stats.end(), net.running_stats().begin()));
}

TEST(Gradcheck, SmallNetworkAllParameters) {
  ArchitectureSpec s = small_spec();
  Network net(s, 21);
  randomize_batchnorm(net, 23);
  const int h = 8, w = 8;
  const Tensor4 x = random_tensor(2, 1, h, w, 22);
  const auto t = disc_target(2, h, w, 2.5);
  const auto e = edges_of(t, 2, h, w);
  GradcheckConfig cfg;
  cfg.threads = 3;
  const auto r = gradcheck(net, x, t, e, {}, cfg);
  EXPECT_EQ(r.checked, net.parameters().size());
  // Any mismatch must come from a step that crossed a ReLU or pooling switch.
  EXPECT_EQ(r.failures, r.kinked_failures);
  EXPECT_LT(r.kinked * 10, r.checked);
}

TEST(Gradcheck, SmallerStepClearsKinks) {
  Network net(small_spec(), 21);
  randomize_batchnorm(net, 23);
  const int h = 8, w = 8;
  const Tensor4 x = random_tensor(2, 1, h, w, 22);
  const auto t = disc_target(2, h, w, 2.5);
  const auto e = edges_of(t, 2, h, w);
  GradcheckConfig cfg;
  cfg.step = 1e-5;
  const auto r = gradcheck(net, x, t, e, {}, cfg);
  EXPECT_EQ(r.kinked, 0u);
  EXPECT_EQ(r.failures, 0u) << "worst " << r.worst.index << " a=" << r.worst.analytic << " n=" << r.worst.numeric;
}

TEST(Gradcheck, FullWidthSampledAt32) {
  ArchitectureSpec s;
  s.dropout = 0.0;
  Network net(s, 41);
  randomize_batchnorm(net, 42);
  const Tensor4 x = random_tensor(1, 1, 32, 32, 43);
  const auto t = disc_target(1, 32, 32, 9);
  const auto e = edges_of(t, 1, 32, 32);
  GradcheckConfig cfg;
  // One parameter from every block plus a stride through the rest.
  for (const auto& b : net.layout()) cfg.indices.push_back(b.offset + b.size / 2);
  for (std::size_t i = 0; i < net.parameters().size(); i += 211) cfg.indices.push_back(i);
  const auto r = gradcheck(net, x, t, e, {}, cfg);
  EXPECT_EQ(r.failures, r.kinked_failures);
  EXPECT_GT(r.checked - r.kinked, 100u);
}

TEST(Gradcheck, WithFixedDropoutMask) {
  ArchitectureSpec s = small_spec();
  s.dropout = 0.5;
  Network net(s, 31);
  randomize_batchnorm(net, 33);
  const int h = 8, w = 8;
  const Tensor4 x = random_tensor(1, 1, h, w, 32);
  const auto t = disc_target(1, h, w, 2.5);
  const auto e = edges_of(t, 1, h, w);
  GradcheckConfig cfg;
  cfg.dropout_seed = 5;
  const auto r = gradcheck(net, x, t, e, {}, cfg);
  EXPECT_EQ(r.failures, 0u) << "worst " << r.worst.index << " a=" << r.worst.analytic << " n=" << r.worst.numeric;
}
