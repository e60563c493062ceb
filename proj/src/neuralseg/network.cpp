#include "thyrovol/neuralseg/network.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "thyrovol/core/error.hpp"
#include "thyrovol/core/seed.hpp"
#include "thyrovol/neuralseg/layers.hpp"

namespace thyrovol::neuralseg {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<RowMat>;
using CMapR = Eigen::Map<const RowMat>;
// Eigen picks its vectorised peeling from the data address, which changes the
// summation order. Aligned buffers keep every offset's alignment the same from
// run to run, so results do not depend on where malloc put things.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

enum class Op { Input, BatchNorm, Relu, Conv, MaxPool, Unpool, Concat, Dropout, Softmax };

// Same-padded, stride-1 patch matrix: row (c, ky, kx), column y * w + x.
void im2col(const std::vector<const double*>& planes, int h, int w, int k, double* col) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (std::size_t c = 0; c < planes.size(); ++c) {
    const double* x = planes[c];
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = col + ((c * k + ky) * k + kx) * hw;
        const int dy = ky - pad, dx = kx - pad;
        const int x0 = std::min(w, std::max(0, -dx));
        const int x1 = std::max(x0, std::min(w, w - dx));
        for (int y = 0; y < h; ++y) {
          double* r = row + static_cast<std::size_t>(y) * w;
          const int sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::fill(r, r + w, 0.0);
            continue;
          }
          const double* src = x + static_cast<std::size_t>(sy) * w + dx;
          std::fill(r, r + x0, 0.0);
          for (int xx = x0; xx < x1; ++xx) r[xx] = src[xx];
          std::fill(r + x1, r + w, 0.0);
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch rows back onto the planes (accumulating).
void col2im(const double* col, int nch, int h, int w, int k, double* planes) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < nch; ++c) {
    double* x = planes + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dy = ky - pad, dx = kx - pad;
        const int x0 = std::min(w, std::max(0, -dx));
        const int x1 = std::max(x0, std::min(w, w - dx));
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const double* r = row + static_cast<std::size_t>(y) * w;
          double* dst = x + static_cast<std::size_t>(sy) * w + dx;
          for (int xx = x0; xx < x1; ++xx) dst[xx] += r[xx];
        }
      }
    }
  }
}

struct Node {
  Op op = Op::Input;
  std::string name;
  std::vector<int> in;
  int c = 0;
  int div = 1;  // spatial downsampling relative to the network input

  // conv
  int cin = 0;
  int k = 1;
  std::size_t w_off = 0;
  std::size_t b_off = 0;
  // batch norm
  std::size_t g_off = 0;
  std::size_t beta_off = 0;
  std::size_t rs_off = 0;
  // unpool
  int pool = -1;

  // per-forward state
  int h = 0;
  int w = 0;
  Buffer val;
  Buffer grad;
  std::vector<int> idx;        // max-pool argmax, flat position in the input plane
  Buffer xhat;    // batch norm normalized input (training)
  Buffer inv_std;  // batch norm per channel (training)
  Buffer mask;    // dropout scale per (sample, channel)

  // perturbed_forward scratch
  Buffer alt;
  std::vector<int> alt_idx;
  std::vector<std::uint8_t> dirty;

  std::size_t hw() const { return static_cast<std::size_t>(h) * w; }
  std::size_t plane_offset(int b, int ch) const { return (static_cast<std::size_t>(b) * c + ch) * hw(); }
};

}  // namespace

struct Network::Impl {
  ArchitectureSpec spec;
  std::vector<Node> nodes;
  Buffer params;
  Buffer grads;
  Buffer stats;
  std::vector<ParameterBlock> layout;
  std::vector<int> param_owner;  // node index per parameter block

  int batch = 0;
  int in_h = 0;
  int in_w = 0;
  bool trained_forward = false;
  Tensor4 output;
  Tensor4 perturbed;
  Buffer col;
  Buffer col2;
  Buffer tmp;
  std::size_t kinks = 0;  // ReLU sign flips and argmax switches in the last perturbation

  int add(Node n) {
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  }

  void add_block(const std::string& name, std::size_t off, std::size_t size, int owner) {
    layout.push_back({name, off, size});
    param_owner.push_back(owner);
  }

  int input(int channels) {
    Node n;
    n.op = Op::Input;
    n.name = "input";
    n.c = channels;
    return add(std::move(n));
  }

  int bn(int x, const std::string& name) {
    Node n;
    n.op = Op::BatchNorm;
    n.name = name;
    n.in = {x};
    n.c = nodes[x].c;
    n.div = nodes[x].div;
    n.g_off = params.size();
    params.insert(params.end(), n.c, 1.0);
    n.beta_off = params.size();
    params.insert(params.end(), n.c, 0.0);
    n.rs_off = stats.size();
    stats.insert(stats.end(), n.c, 0.0);
    stats.insert(stats.end(), n.c, 1.0);
    const int id = add(std::move(n));
    add_block(name + ".gamma", nodes[id].g_off, nodes[id].c, id);
    add_block(name + ".beta", nodes[id].beta_off, nodes[id].c, id);
    return id;
  }

  int unary(Op op, int x, const std::string& name) {
    Node n;
    n.op = op;
    n.name = name;
    n.in = {x};
    n.c = nodes[x].c;
    n.div = nodes[x].div * (op == Op::MaxPool ? 2 : 1);
    return add(std::move(n));
  }

  int conv(int x, int cout, int k, const std::string& name) {
    Node n;
    n.op = Op::Conv;
    n.name = name;
    n.in = {x};
    n.c = cout;
    n.cin = nodes[x].c;
    n.k = k;
    n.div = nodes[x].div;
    n.w_off = params.size();
    params.insert(params.end(), static_cast<std::size_t>(cout) * n.cin * k * k, 0.0);
    n.b_off = params.size();
    params.insert(params.end(), cout, 0.0);
    const int id = add(std::move(n));
    const Node& m = nodes[id];
    add_block(name + ".weight", m.w_off, m.b_off - m.w_off, id);
    add_block(name + ".bias", m.b_off, cout, id);
    return id;
  }

  int unpool(int x, int pool) {
    Node n;
    n.op = Op::Unpool;
    n.name = nodes[pool].name + ".unpool";
    n.in = {x};
    n.pool = pool;
    n.c = nodes[x].c;
    n.div = nodes[pool].div / 2;
    if (nodes[pool].c != n.c) throw ConfigError("unpooling channel count differs from its pooling layer");
    return add(std::move(n));
  }

  int concat(int a, int b, const std::string& name) {
    Node n;
    n.op = Op::Concat;
    n.name = name;
    n.in = {a, b};
    n.c = nodes[a].c + nodes[b].c;
    n.div = nodes[a].div;
    return add(std::move(n));
  }

  int dense_block(int x, const std::string& name) {
    const int C = spec.channels, K = spec.kernel_size;
    x = bn(x, name + ".bn1");
    x = unary(Op::Relu, x, name + ".relu1");
    x = conv(x, C, K, name + ".conv1");
    x = bn(x, name + ".bn2");
    x = unary(Op::Relu, x, name + ".relu2");
    x = conv(x, C, K, name + ".conv2");
    x = bn(x, name + ".bn3");
    x = unary(Op::Relu, x, name + ".relu3");
    x = conv(x, C, 1, name + ".conv3");
    return unary(Op::Dropout, x, name + ".dropout");
  }

  void build(std::uint64_t seed) {
    int x = input(spec.in_channels);
    std::vector<int> skips, pools;
    for (int e = 1; e <= spec.num_encoders; ++e) {
      x = dense_block(x, "enc" + std::to_string(e));
      skips.push_back(x);
      x = unary(Op::MaxPool, x, "enc" + std::to_string(e) + ".pool");
      pools.push_back(x);
    }
    x = conv(x, spec.channels, spec.kernel_size, "bottleneck.conv");
    x = bn(x, "bottleneck.bn");
    for (int d = spec.num_decoders; d >= 1; --d) {
      const int u = unpool(x, pools[d - 1]);
      const int cat = concat(u, skips[d - 1], "dec" + std::to_string(d) + ".concat");
      x = dense_block(cat, "dec" + std::to_string(d));
    }
    x = conv(x, spec.num_classes, 1, "classifier.conv");
    unary(Op::Softmax, x, "classifier.softmax");

    // He-normal conv weights; biases zero, batch norm identity.
    std::mt19937_64 rng(seed);
    for (const Node& n : nodes) {
      if (n.op != Op::Conv) continue;
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (n.cin * n.k * n.k)));
      for (std::size_t i = n.w_off; i < n.b_off; ++i) params[i] = dist(rng);
    }
    grads.assign(params.size(), 0.0);
  }

  void allocate(int n, int h, int w) {
    if (n == batch && h == in_h && w == in_w) return;
    batch = n;
    in_h = h;
    in_w = w;
    for (Node& nd : nodes) {
      nd.h = h / nd.div;
      nd.w = w / nd.div;
      const std::size_t sz = static_cast<std::size_t>(n) * nd.c * nd.hw();
      nd.val.assign(sz, 0.0);
      nd.grad.clear();
      nd.alt.clear();
      nd.alt_idx.clear();
      if (nd.op == Op::MaxPool) nd.idx.assign(sz, 0);
      if (nd.op == Op::BatchNorm) {
        nd.xhat.assign(sz, 0.0);
        nd.inv_std.assign(nd.c, 0.0);
      }
      if (nd.op == Op::Dropout) nd.mask.assign(static_cast<std::size_t>(n) * nd.c, 1.0);
    }
    trained_forward = false;
  }

  // ---- forward ----

  void fwd_bn(Node& n, bool training) {
    const Node& x = nodes[n.in[0]];
    const std::size_t hw = n.hw();
    const double M = static_cast<double>(batch) * hw;
    for (int c = 0; c < n.c; ++c) {
      const double g = params[n.g_off + c], be = params[n.beta_off + c];
      if (training) {
        double s = 0.0;
        for (int b = 0; b < batch; ++b) {
          const double* p = x.val.data() + x.plane_offset(b, c);
          for (std::size_t i = 0; i < hw; ++i) s += p[i];
        }
        const double mean = s / M;
        double ss = 0.0;
        for (int b = 0; b < batch; ++b) {
          const double* p = x.val.data() + x.plane_offset(b, c);
          for (std::size_t i = 0; i < hw; ++i) ss += (p[i] - mean) * (p[i] - mean);
        }
        const double var = ss / M;
        const double inv = 1.0 / std::sqrt(var + spec.bn_eps);
        n.inv_std[c] = inv;
        for (int b = 0; b < batch; ++b) {
          const double* p = x.val.data() + x.plane_offset(b, c);
          double* xh = n.xhat.data() + n.plane_offset(b, c);
          double* y = n.val.data() + n.plane_offset(b, c);
          for (std::size_t i = 0; i < hw; ++i) {
            xh[i] = (p[i] - mean) * inv;
            y[i] = g * xh[i] + be;
          }
        }
        const double m = spec.bn_momentum;
        const double unbiased = M > 1 ? ss / (M - 1) : var;
        stats[n.rs_off + c] = m * stats[n.rs_off + c] + (1 - m) * mean;
        stats[n.rs_off + n.c + c] = m * stats[n.rs_off + n.c + c] + (1 - m) * unbiased;
      } else {
        const double mean = stats[n.rs_off + c];
        const double inv = 1.0 / std::sqrt(stats[n.rs_off + n.c + c] + spec.bn_eps);
        for (int b = 0; b < batch; ++b) {
          const double* p = x.val.data() + x.plane_offset(b, c);
          double* y = n.val.data() + n.plane_offset(b, c);
          for (std::size_t i = 0; i < hw; ++i) y[i] = g * (p[i] - mean) * inv + be;
        }
      }
    }
  }

  void conv_sample(const Node& n, const std::vector<const double*>& planes, double* out) {
    const std::size_t hw = n.hw();
    const std::size_t K = static_cast<std::size_t>(n.cin) * n.k * n.k;
    CMapR W(params.data() + n.w_off, n.c, static_cast<Eigen::Index>(K));
    MapR Y(out, n.c, static_cast<Eigen::Index>(hw));
    if (n.k == 1 && planes.size() > 1 && planes[1] == planes[0] + hw) {
      Y.noalias() = W * CMapR(planes[0], n.cin, static_cast<Eigen::Index>(hw));
    } else {
      col.resize(K * hw);
      im2col(planes, n.h, n.w, n.k, col.data());
      Y.noalias() = W * CMapR(col.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(hw));
    }
    for (int o = 0; o < n.c; ++o) Y.row(o).array() += params[n.b_off + o];
  }

  void fwd_conv(Node& n) {
    const Node& x = nodes[n.in[0]];
    std::vector<const double*> planes(n.cin);
    for (int b = 0; b < batch; ++b) {
      for (int c = 0; c < n.cin; ++c) planes[c] = x.val.data() + x.plane_offset(b, c);
      conv_sample(n, planes, n.val.data() + n.plane_offset(b, 0));
    }
  }

  void fwd_node(int id, bool training, std::uint64_t seed) {
    Node& n = nodes[id];
    switch (n.op) {
      case Op::Input: break;
      case Op::BatchNorm: fwd_bn(n, training); break;
      case Op::Relu: {
        const auto& x = nodes[n.in[0]].val;
        for (std::size_t i = 0; i < x.size(); ++i) n.val[i] = x[i] > 0.0 ? x[i] : 0.0;
        break;
      }
      case Op::Conv: fwd_conv(n); break;
      case Op::MaxPool: {
        const Node& x = nodes[n.in[0]];
        for (int b = 0; b < batch; ++b) {
          for (int c = 0; c < n.c; ++c) {
            max_pool_plane(x.val.data() + x.plane_offset(b, c), x.w, n.h, n.w, n.val.data() + n.plane_offset(b, c),
                       n.idx.data() + n.plane_offset(b, c));
          }
        }
        break;
      }
      case Op::Unpool: {
        const Node& x = nodes[n.in[0]];
        const Node& p = nodes[n.pool];
        for (int b = 0; b < batch; ++b) {
          for (int c = 0; c < n.c; ++c) {
            max_unpool_plane(x.val.data() + x.plane_offset(b, c), p.idx.data() + p.plane_offset(b, c), x.hw(),
                         n.val.data() + n.plane_offset(b, c), n.hw());
          }
        }
        break;
      }
      case Op::Concat: {
        const Node& a = nodes[n.in[0]];
        const Node& bb = nodes[n.in[1]];
        for (int b = 0; b < batch; ++b) {
          std::copy_n(a.val.data() + a.plane_offset(b, 0), a.c * a.hw(), n.val.data() + n.plane_offset(b, 0));
          std::copy_n(bb.val.data() + bb.plane_offset(b, 0), bb.c * bb.hw(), n.val.data() + n.plane_offset(b, a.c));
        }
        break;
      }
      case Op::Dropout: {
        const auto& x = nodes[n.in[0]].val;
        const double p = spec.dropout;
        if (training && p > 0.0) {
          std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(id)}));
          std::bernoulli_distribution keep(1.0 - p);
          for (auto& m : n.mask) m = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
        } else {
          std::fill(n.mask.begin(), n.mask.end(), 1.0);
        }
        const std::size_t hw = n.hw();
        for (int b = 0; b < batch; ++b) {
          for (int c = 0; c < n.c; ++c) {
            const double m = n.mask[static_cast<std::size_t>(b) * n.c + c];
            const std::size_t off = n.plane_offset(b, c);
            for (std::size_t i = 0; i < hw; ++i) n.val[off + i] = x[off + i] * m;
          }
        }
        break;
      }
      case Op::Softmax: softmax(nodes[n.in[0]], n, false); break;
    }
  }

  // Softmax over channels; reads the (possibly perturbed) logits.
  void softmax(const Node& x, Node& n, bool use_alt) {
    const std::size_t hw = n.hw();
    double* outbuf = use_alt ? n.alt.data() : n.val.data();
    std::vector<const double*> z(n.c);
    for (int b = 0; b < batch; ++b) {
      for (int c = 0; c < n.c; ++c) z[c] = use_alt ? cur(x, b, c) : x.val.data() + x.plane_offset(b, c);
      double* out = outbuf + n.plane_offset(b, 0);
      for (std::size_t i = 0; i < hw; ++i) {
        double mx = z[0][i];
        for (int c = 1; c < n.c; ++c) mx = std::max(mx, z[c][i]);
        double s = 0.0;
        for (int c = 0; c < n.c; ++c) {
          const double e = std::exp(z[c][i] - mx);
          out[c * hw + i] = e;
          s += e;
        }
        for (int c = 0; c < n.c; ++c) out[c * hw + i] /= s;
      }
    }
  }

  // ---- backward ----

  void bwd_node(int id) {
    Node& n = nodes[id];
    const std::size_t hw = n.hw();
    switch (n.op) {
      case Op::Input: break;
      case Op::Softmax: {
        Node& x = nodes[n.in[0]];
        for (int b = 0; b < batch; ++b) {
          const double* p = n.val.data() + n.plane_offset(b, 0);
          const double* g = n.grad.data() + n.plane_offset(b, 0);
          double* dz = x.grad.data() + x.plane_offset(b, 0);
          for (std::size_t i = 0; i < hw; ++i) {
            double dot = 0.0;
            for (int c = 0; c < n.c; ++c) dot += p[c * hw + i] * g[c * hw + i];
            for (int c = 0; c < n.c; ++c) dz[c * hw + i] += p[c * hw + i] * (g[c * hw + i] - dot);
          }
        }
        break;
      }
      case Op::Conv: {
        Node& x = nodes[n.in[0]];
        const bool need_dx = x.op != Op::Input;
        const std::size_t K = static_cast<std::size_t>(n.cin) * n.k * n.k;
        CMapR W(params.data() + n.w_off, n.c, static_cast<Eigen::Index>(K));
        MapR dW(grads.data() + n.w_off, n.c, static_cast<Eigen::Index>(K));
        std::vector<const double*> planes(n.cin);
        for (int b = 0; b < batch; ++b) {
          CMapR dY(n.grad.data() + n.plane_offset(b, 0), n.c, static_cast<Eigen::Index>(hw));
          for (int o = 0; o < n.c; ++o) grads[n.b_off + o] += dY.row(o).sum();
          if (n.k == 1) {
            CMapR X(x.val.data() + x.plane_offset(b, 0), n.cin, static_cast<Eigen::Index>(hw));
            dW.noalias() += dY * X.transpose();
            if (need_dx) {
              MapR dX(x.grad.data() + x.plane_offset(b, 0), n.cin, static_cast<Eigen::Index>(hw));
              dX.noalias() += W.transpose() * dY;
            }
          } else {
            for (int c = 0; c < n.cin; ++c) planes[c] = x.val.data() + x.plane_offset(b, c);
            col.resize(K * hw);
            im2col(planes, n.h, n.w, n.k, col.data());
            CMapR C(col.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(hw));
            dW.noalias() += dY * C.transpose();
            if (need_dx) {
              col2.resize(K * hw);
              MapR dC(col2.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(hw));
              dC.noalias() = W.transpose() * dY;
              col2im(col2.data(), n.cin, n.h, n.w, n.k, x.grad.data() + x.plane_offset(b, 0));
            }
          }
        }
        break;
      }
      case Op::BatchNorm: {
        Node& x = nodes[n.in[0]];
        const bool need_dx = x.op != Op::Input;
        const double M = static_cast<double>(batch) * hw;
        for (int c = 0; c < n.c; ++c) {
          double sdy = 0.0, sdyx = 0.0;
          for (int b = 0; b < batch; ++b) {
            const double* dy = n.grad.data() + n.plane_offset(b, c);
            const double* xh = n.xhat.data() + n.plane_offset(b, c);
            for (std::size_t i = 0; i < hw; ++i) {
              sdy += dy[i];
              sdyx += dy[i] * xh[i];
            }
          }
          grads[n.g_off + c] += sdyx;
          grads[n.beta_off + c] += sdy;
          if (!need_dx) continue;
          const double scale = params[n.g_off + c] * n.inv_std[c] / M;
          for (int b = 0; b < batch; ++b) {
            const double* dy = n.grad.data() + n.plane_offset(b, c);
            const double* xh = n.xhat.data() + n.plane_offset(b, c);
            double* dx = x.grad.data() + x.plane_offset(b, c);
            for (std::size_t i = 0; i < hw; ++i) dx[i] += scale * (M * dy[i] - sdy - xh[i] * sdyx);
          }
        }
        break;
      }
      case Op::Relu: {
        Node& x = nodes[n.in[0]];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          if (x.val[i] > 0.0) x.grad[i] += n.grad[i];
        }
        break;
      }
      case Op::Dropout: {
        Node& x = nodes[n.in[0]];
        for (int b = 0; b < batch; ++b) {
          for (int c = 0; c < n.c; ++c) {
            const double m = n.mask[static_cast<std::size_t>(b) * n.c + c];
            const std::size_t off = n.plane_offset(b, c);
            for (std::size_t i = 0; i < hw; ++i) x.grad[off + i] += m * n.grad[off + i];
          }
        }
        break;
      }
      case Op::MaxPool: {
        Node& x = nodes[n.in[0]];
        for (int b = 0; b < batch; ++b) {
          for (int c = 0; c < n.c; ++c) {
            const double* g = n.grad.data() + n.plane_offset(b, c);
            const int* ix = n.idx.data() + n.plane_offset(b, c);
            double* dx = x.grad.data() + x.plane_offset(b, c);
            for (std::size_t i = 0; i < hw; ++i) dx[ix[i]] += g[i];
          }
        }
        break;
      }
      case Op::Unpool: {
        Node& x = nodes[n.in[0]];
        const Node& p = nodes[n.pool];
        for (int b = 0; b < batch; ++b) {
          for (int c = 0; c < n.c; ++c) {
            const double* g = n.grad.data() + n.plane_offset(b, c);
            const int* ix = p.idx.data() + p.plane_offset(b, c);
            double* dx = x.grad.data() + x.plane_offset(b, c);
            for (std::size_t i = 0; i < x.hw(); ++i) dx[i] += g[ix[i]];
          }
        }
        break;
      }
      case Op::Concat: {
        Node& a = nodes[n.in[0]];
        Node& bb = nodes[n.in[1]];
        for (int b = 0; b < batch; ++b) {
          const double* g = n.grad.data() + n.plane_offset(b, 0);
          double* ga = a.grad.data() + a.plane_offset(b, 0);
          for (std::size_t i = 0; i < a.c * hw; ++i) ga[i] += g[i];
          const double* g2 = n.grad.data() + n.plane_offset(b, a.c);
          double* gb = bb.grad.data() + bb.plane_offset(b, 0);
          for (std::size_t i = 0; i < bb.c * hw; ++i) gb[i] += g2[i];
        }
        break;
      }
    }
  }

  // ---- perturbed forward ----

  const double* cur(const Node& n, int b, int c) const {
    return (n.dirty[c] ? n.alt.data() : n.val.data()) + n.plane_offset(b, c);
  }
  const int* cur_idx(const Node& n, int b, int c) const {
    return (n.dirty[c] ? n.alt_idx.data() : n.idx.data()) + n.plane_offset(b, c);
  }
  static bool any_dirty(const Node& n) {
    return std::any_of(n.dirty.begin(), n.dirty.end(), [](std::uint8_t d) { return d != 0; });
  }

  void prepare_alt() {
    for (Node& n : nodes) {
      if (n.alt.size() != n.val.size()) n.alt.assign(n.val.size(), 0.0);
      if (n.op == Op::MaxPool && n.alt_idx.size() != n.idx.size()) n.alt_idx.assign(n.idx.size(), 0);
      n.dirty.assign(n.c, 0);
    }
  }

  void alt_bn_channel(Node& n, int c) {
    const Node& x = nodes[n.in[0]];
    const std::size_t hw = n.hw();
    const double M = static_cast<double>(batch) * hw;
    double s = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* p = cur(x, b, c);
      for (std::size_t i = 0; i < hw; ++i) s += p[i];
    }
    const double mean = s / M;
    double ss = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* p = cur(x, b, c);
      for (std::size_t i = 0; i < hw; ++i) ss += (p[i] - mean) * (p[i] - mean);
    }
    const double inv = 1.0 / std::sqrt(ss / M + spec.bn_eps);
    const double g = params[n.g_off + c], be = params[n.beta_off + c];
    for (int b = 0; b < batch; ++b) {
      const double* p = cur(x, b, c);
      double* y = n.alt.data() + n.plane_offset(b, c);
      for (std::size_t i = 0; i < hw; ++i) y[i] = g * ((p[i] - mean) * inv) + be;
    }
  }

  void alt_conv(Node& n) {
    const Node& x = nodes[n.in[0]];
    const std::size_t hw = n.hw();
    std::vector<int> changed;
    for (int c = 0; c < n.cin; ++c) {
      if (x.dirty[c]) changed.push_back(c);
    }
    std::vector<const double*> planes;
    if (static_cast<int>(changed.size()) == n.cin) {
      planes.resize(n.cin);
      for (int b = 0; b < batch; ++b) {
        for (int c = 0; c < n.cin; ++c) planes[c] = cur(x, b, c);
        conv_sample(n, planes, n.alt.data() + n.plane_offset(b, 0));
      }
    } else {
      // Linear in its input: new = old + W[:, changed] * (x_new - x_old).
      const int kk = n.k * n.k;
      const std::size_t Kd = changed.size() * kk;
      RowMat Wd(n.c, static_cast<Eigen::Index>(Kd));
      const std::size_t K = static_cast<std::size_t>(n.cin) * kk;
      for (int o = 0; o < n.c; ++o) {
        for (std::size_t j = 0; j < changed.size(); ++j) {
          for (int t = 0; t < kk; ++t) {
            Wd(o, static_cast<Eigen::Index>(j * kk + t)) = params[n.w_off + o * K + changed[j] * kk + t];
          }
        }
      }
      tmp.resize(changed.size() * hw);
      planes.resize(changed.size());
      col.resize(Kd * hw);
      for (int b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < changed.size(); ++j) {
          const double* a = cur(x, b, changed[j]);
          const double* o = x.val.data() + x.plane_offset(b, changed[j]);
          double* d = tmp.data() + j * hw;
          for (std::size_t i = 0; i < hw; ++i) d[i] = a[i] - o[i];
          planes[j] = d;
        }
        const double* src = tmp.data();
        if (n.k != 1) {
          im2col(planes, n.h, n.w, n.k, col.data());
          src = col.data();
        }
        MapR Y(n.alt.data() + n.plane_offset(b, 0), n.c, static_cast<Eigen::Index>(hw));
        CMapR Y0(n.val.data() + n.plane_offset(b, 0), n.c, static_cast<Eigen::Index>(hw));
        Y.noalias() = Wd * CMapR(src, static_cast<Eigen::Index>(Kd), static_cast<Eigen::Index>(hw));
        Y += Y0;
      }
    }
    std::fill(n.dirty.begin(), n.dirty.end(), 1);
  }

  void alt_node(int id) {
    Node& n = nodes[id];
    const std::size_t hw = n.hw();
    switch (n.op) {
      case Op::Input: break;
      case Op::BatchNorm: {
        const Node& x = nodes[n.in[0]];
        for (int c = 0; c < n.c; ++c) {
          if (!x.dirty[c]) continue;
          alt_bn_channel(n, c);
          n.dirty[c] = 1;
        }
        break;
      }
      case Op::Relu:
      case Op::Dropout: {
        const Node& x = nodes[n.in[0]];
        for (int c = 0; c < n.c; ++c) {
          if (!x.dirty[c]) continue;
          for (int b = 0; b < batch; ++b) {
            const double* p = cur(x, b, c);
            double* y = n.alt.data() + n.plane_offset(b, c);
            if (n.op == Op::Relu) {
              const double* base = x.val.data() + x.plane_offset(b, c);
              for (std::size_t i = 0; i < hw; ++i) {
                y[i] = p[i] > 0.0 ? p[i] : 0.0;
                if ((p[i] > 0.0) != (base[i] > 0.0)) ++kinks;
              }
            } else {
              const double m = n.mask[static_cast<std::size_t>(b) * n.c + c];
              for (std::size_t i = 0; i < hw; ++i) y[i] = p[i] * m;
            }
          }
          n.dirty[c] = 1;
        }
        break;
      }
      case Op::Conv: alt_conv(n); break;
      case Op::MaxPool: {
        const Node& x = nodes[n.in[0]];
        for (int c = 0; c < n.c; ++c) {
          if (!x.dirty[c]) continue;
          for (int b = 0; b < batch; ++b) {
            max_pool_plane(cur(x, b, c), x.w, n.h, n.w, n.alt.data() + n.plane_offset(b, c),
                       n.alt_idx.data() + n.plane_offset(b, c));
            const std::size_t off = n.plane_offset(b, c);
            kinks += !std::equal(n.idx.begin() + off, n.idx.begin() + off + hw, n.alt_idx.begin() + off);
          }
          n.dirty[c] = 1;
        }
        break;
      }
      case Op::Unpool: {
        const Node& x = nodes[n.in[0]];
        const Node& p = nodes[n.pool];
        for (int c = 0; c < n.c; ++c) {
          if (!x.dirty[c] && !p.dirty[c]) continue;
          for (int b = 0; b < batch; ++b) {
            max_unpool_plane(cur(x, b, c), cur_idx(p, b, c), x.hw(), n.alt.data() + n.plane_offset(b, c), hw);
          }
          n.dirty[c] = 1;
        }
        break;
      }
      case Op::Concat: {
        const Node& a = nodes[n.in[0]];
        const Node& bb = nodes[n.in[1]];
        for (int c = 0; c < n.c; ++c) {
          const Node& s = c < a.c ? a : bb;
          const int sc = c < a.c ? c : c - a.c;
          if (!s.dirty[sc]) continue;
          for (int b = 0; b < batch; ++b) std::copy_n(cur(s, b, sc), hw, n.alt.data() + n.plane_offset(b, c));
          n.dirty[c] = 1;
        }
        break;
      }
      case Op::Softmax:
        softmax(nodes[n.in[0]], n, true);
        std::fill(n.dirty.begin(), n.dirty.end(), 1);
        break;
    }
  }

  void perturb_source(int id, std::size_t index, double delta) {
    Node& n = nodes[id];
    const std::size_t hw = n.hw();
    if (n.op == Op::Conv) {
      const Node& x = nodes[n.in[0]];
      if (index >= n.b_off) {
        const int o = static_cast<int>(index - n.b_off);
        for (int b = 0; b < batch; ++b) {
          const double* y0 = n.val.data() + n.plane_offset(b, o);
          double* y = n.alt.data() + n.plane_offset(b, o);
          for (std::size_t i = 0; i < hw; ++i) y[i] = y0[i] + delta;
        }
        n.dirty[o] = 1;
        return;
      }
      const std::size_t local = index - n.w_off;
      const int kk = n.k * n.k;
      const int o = static_cast<int>(local / (static_cast<std::size_t>(n.cin) * kk));
      const int rem = static_cast<int>(local % (static_cast<std::size_t>(n.cin) * kk));
      const int ci = rem / kk, ky = (rem % kk) / n.k, kx = rem % n.k;
      const int dy = ky - n.k / 2, dx = kx - n.k / 2;
      for (int b = 0; b < batch; ++b) {
        const double* y0 = n.val.data() + n.plane_offset(b, o);
        const double* xi = x.val.data() + x.plane_offset(b, ci);
        double* y = n.alt.data() + n.plane_offset(b, o);
        std::copy_n(y0, hw, y);
        for (int yy = 0; yy < n.h; ++yy) {
          const int sy = yy + dy;
          if (sy < 0 || sy >= n.h) continue;
          for (int xx = 0; xx < n.w; ++xx) {
            const int sx = xx + dx;
            if (sx < 0 || sx >= n.w) continue;
            y[yy * n.w + xx] += delta * xi[sy * n.w + sx];
          }
        }
      }
      n.dirty[o] = 1;
      return;
    }
    // batch norm gamma or beta
    const bool is_gamma = index < n.beta_off;
    const int c = static_cast<int>(is_gamma ? index - n.g_off : index - n.beta_off);
    const double g = params[n.g_off + c] + (is_gamma ? delta : 0.0);
    const double be = params[n.beta_off + c] + (is_gamma ? 0.0 : delta);
    for (int b = 0; b < batch; ++b) {
      const double* xh = n.xhat.data() + n.plane_offset(b, c);
      double* y = n.alt.data() + n.plane_offset(b, c);
      for (std::size_t i = 0; i < hw; ++i) y[i] = g * xh[i] + be;
    }
    n.dirty[c] = 1;
  }
};

void ArchitectureSpec::validate() const {
  if (num_encoders < 1 || num_encoders > 8) throw ConfigError("num_encoders must lie in [1, 8]");
  if (num_decoders != num_encoders) throw ConfigError("num_decoders must equal num_encoders");
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
  if (channels < 1) throw ConfigError("channels must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd and >= 1");
  if (num_classes != 2) throw ConfigError("classifier must output exactly 2 channels");
  if (!(dropout >= 0.0) || !(dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(bn_momentum >= 0.0) || !(bn_momentum < 1.0)) throw ConfigError("bn_momentum must lie in [0, 1)");
  if (!(bn_eps > 0.0)) throw ConfigError("bn_eps must be > 0");
  if (input_size < divisor() || input_size % divisor() != 0) {
    throw ConfigError("input_size must be a positive multiple of " + std::to_string(divisor()));
  }
}

Network::Network(const ArchitectureSpec& spec, std::uint64_t init_seed) : impl_(std::make_unique<Impl>()) {
  spec.validate();
  impl_->spec = spec;
  impl_->build(init_seed);
}

Network::Network(const Network& other) : impl_(std::make_unique<Impl>(*other.impl_)) {}
Network& Network::operator=(const Network& other) {
  if (this != &other) impl_ = std::make_unique<Impl>(*other.impl_);
  return *this;
}
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;
Network::~Network() = default;

const ArchitectureSpec& Network::spec() const { return impl_->spec; }
std::span<double> Network::parameters() { return impl_->params; }
std::span<const double> Network::parameters() const { return impl_->params; }
std::span<const double> Network::gradients() const { return impl_->grads; }
std::span<double> Network::running_stats() { return impl_->stats; }
std::span<const double> Network::running_stats() const { return impl_->stats; }
const std::vector<ParameterBlock>& Network::layout() const { return impl_->layout; }
void Network::zero_grad() { std::fill(impl_->grads.begin(), impl_->grads.end(), 0.0); }

const Tensor4& Network::forward(const Tensor4& input, bool training, std::uint64_t dropout_seed) {
  auto& m = *impl_;
  input.validate();
  const int d = m.spec.divisor();
  if (input.n < 1 || input.c != m.spec.in_channels || input.h < d || input.w < d || input.h % d != 0 ||
      input.w % d != 0) {
    throw ShapeError("network input " + input.shape_string() + " must be (n >= 1, " +
                     std::to_string(m.spec.in_channels) + ", h, w) with h and w positive multiples of " +
                     std::to_string(d));
  }
  m.allocate(input.n, input.h, input.w);
  std::copy(input.value.begin(), input.value.end(), m.nodes[0].val.begin());
  for (std::size_t i = 1; i < m.nodes.size(); ++i) m.fwd_node(static_cast<int>(i), training, dropout_seed);
  m.trained_forward = training;
  const Node& out = m.nodes.back();
  m.output = Tensor4(m.batch, out.c, out.h, out.w);
  m.output.value.assign(out.val.begin(), out.val.end());
  return m.output;
}

void Network::backward(const Tensor4& grad_probabilities) {
  auto& m = *impl_;
  if (!m.trained_forward) throw StateError("backward needs the stored activations of a training-mode forward");
  const Node& out = m.nodes.back();
  if (grad_probabilities.n != m.batch || grad_probabilities.c != out.c || grad_probabilities.h != out.h ||
      grad_probabilities.w != out.w) {
    throw ShapeError("gradient " + grad_probabilities.shape_string() + " does not match the network output (" +
                     std::to_string(m.batch) + ", " + std::to_string(out.c) + ", " + std::to_string(out.h) + ", " +
                     std::to_string(out.w) + ")");
  }
  for (Node& n : m.nodes) n.grad.assign(n.val.size(), 0.0);
  std::copy(grad_probabilities.value.begin(), grad_probabilities.value.end(), m.nodes.back().grad.begin());
  for (int i = static_cast<int>(m.nodes.size()) - 1; i >= 1; --i) m.bwd_node(i);
}

std::size_t Network::last_perturbation_kinks() const { return impl_->kinks; }

const Tensor4& Network::perturbed_forward(std::size_t index, double delta) {
  auto& m = *impl_;
  if (!m.trained_forward) throw StateError("perturbed_forward needs a preceding training-mode forward");
  if (index >= m.params.size()) throw OutOfRangeError("parameter index " + std::to_string(index) + " out of range");
  const auto it = std::upper_bound(m.layout.begin(), m.layout.end(), index,
                                   [](std::size_t v, const ParameterBlock& b) { return v < b.offset; });
  const int src = m.param_owner[static_cast<std::size_t>(it - m.layout.begin()) - 1];
  m.prepare_alt();
  m.kinks = 0;
  m.perturb_source(src, index, delta);
  for (std::size_t i = static_cast<std::size_t>(src) + 1; i < m.nodes.size(); ++i) {
    const Node& n = m.nodes[i];
    bool touched = false;
    for (int in : n.in) touched = touched || Impl::any_dirty(m.nodes[in]);
    if (n.op == Op::Unpool) touched = touched || Impl::any_dirty(m.nodes[n.pool]);
    if (touched) m.alt_node(static_cast<int>(i));
  }
  const Node& out = m.nodes.back();
  m.perturbed = Tensor4(m.batch, out.c, out.h, out.w);
  for (int b = 0; b < m.batch; ++b) {
    for (int c = 0; c < out.c; ++c) {
      std::copy_n(m.cur(out, b, c), out.hw(), m.perturbed.value.data() + out.plane_offset(b, c));
    }
  }
  return m.perturbed;
}

}  // namespace thyrovol::neuralseg
