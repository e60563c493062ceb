#include "thyrovol/compounder/compound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "thyrovol/core/error.hpp"

namespace thyrovol::compounder {

const char* to_string(SplatKernel k) { return k == SplatKernel::Nearest ? "nearest" : "trilinear"; }

SplatKernel parse_kernel(const std::string& s) {
  if (s == "nearest") return SplatKernel::Nearest;
  if (s == "trilinear") return SplatKernel::Trilinear;
  throw ConfigError("splat kernel must be 'nearest' or 'trilinear', got '" + s + "'");
}

void CompoundingConfig::validate() const {
  if (!(voxel_spacing > 0.0) || !std::isfinite(voxel_spacing)) {
    std::ostringstream os;
    os << "voxel spacing must be > 0, got " << voxel_spacing;
    throw ConfigError(os.str());
  }
  if (hole_fill_radius < 0) throw ConfigError("hole fill radius must be >= 0");
  if (!(padding >= 0.0)) throw ConfigError("padding must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

Box bounding_box(std::span<const trackio::SyncedFrame> synced, double padding) {
  if (synced.empty()) throw EmptyInputError("bounding box of an empty frame list");
  constexpr double inf = std::numeric_limits<double>::infinity();
  Box box{Vec3::Constant(inf), Vec3::Constant(-inf)};
  for (const auto& s : synced) {
    const trackio::Frame& f = s.frame.get();
    const double xs[2] = {0.0, (f.width - 1) * f.spacing_x};
    const double ys[2] = {0.0, (f.height - 1) * f.spacing_y};
    for (double x : xs) {
      for (double y : ys) {
        const Vec3 w = s.image_to_world.apply(Vec3(x, y, 0.0));
        box.min_corner = box.min_corner.cwiseMin(w);
        box.max_corner = box.max_corner.cwiseMax(w);
      }
    }
  }
  box.min_corner.array() -= padding;
  box.max_corner.array() += padding;
  return box;
}

GridGeometry grid_for_box(const Box& box, double spacing) {
  if (!(spacing > 0.0)) throw ConfigError("voxel spacing must be > 0");
  GridGeometry g;
  g.origin = box.min_corner;
  g.spacing = Vec3::Constant(spacing);
  for (int a = 0; a < 3; ++a) {
    const double extent = box.max_corner[a] - box.min_corner[a];
    g.dims[a] = static_cast<int>(std::floor(extent / spacing + 1e-9)) + 1;
  }
  return g;
}

AccumulatorGrid::AccumulatorGrid(const GridGeometry& geometry)
    : geometry_(geometry), weight_(geometry.voxel_count(), 0.0), weighted_(geometry.voxel_count(), 0.0) {
  geometry_.validate();
}

void AccumulatorGrid::splat_slab(std::span<const trackio::SyncedFrame> synced, SplatKernel kernel, int z_begin,
                                 int z_end) {
  const GridGeometry& g = geometry_;
  const int nx = g.dims[0], ny = g.dims[1];
  const Vec3 inv_spacing = g.spacing.cwiseInverse();
  for (const auto& s : synced) {
    const trackio::Frame& f = s.frame.get();
    // Voxel-space position of pixel (0,0) and the per-column / per-row steps.
    const Vec3 base = (s.image_to_world.translation - g.origin).cwiseProduct(inv_spacing);
    const Vec3 col_step = s.image_to_world.apply_vector(Vec3(f.spacing_x, 0, 0)).cwiseProduct(inv_spacing);
    const Vec3 row_step = s.image_to_world.apply_vector(Vec3(0, f.spacing_y, 0)).cwiseProduct(inv_spacing);
    for (int row = 0; row < f.height; ++row) {
      const Vec3 row_base = base + row * row_step;
      const std::uint8_t* px = f.pixels.data() + static_cast<std::size_t>(row) * f.width;
      for (int col = 0; col < f.width; ++col) {
        const Vec3 u = row_base + col * col_step;
        const double value = px[col] / 255.0;
        if (kernel == SplatKernel::Nearest) {
          const int i = static_cast<int>(std::lround(u.x()));
          const int j = static_cast<int>(std::lround(u.y()));
          const int k = static_cast<int>(std::lround(u.z()));
          if (i < 0 || j < 0 || k < z_begin || i >= nx || j >= ny || k >= z_end) continue;
          const std::size_t idx = g.index(i, j, k);
          weight_[idx] += 1.0;
          weighted_[idx] += value;
          continue;
        }
        const double fx0 = std::floor(u.x()), fy0 = std::floor(u.y()), fz0 = std::floor(u.z());
        const int i0 = static_cast<int>(fx0), j0 = static_cast<int>(fy0), k0 = static_cast<int>(fz0);
        if (k0 + 1 < z_begin || k0 >= z_end || i0 + 1 < 0 || i0 >= nx || j0 + 1 < 0 || j0 >= ny) continue;
        const double fx = u.x() - fx0, fy = u.y() - fy0, fz = u.z() - fz0;
        const double wx[2] = {1.0 - fx, fx};
        const double wy[2] = {1.0 - fy, fy};
        const double wz[2] = {1.0 - fz, fz};
        if (i0 >= 0 && i0 + 1 < nx && j0 >= 0 && j0 + 1 < ny && k0 >= z_begin && k0 + 1 < z_end) {
          // Whole 2x2x2 cell inside: no bounds checks. Zero weights add
          // nothing, so this matches the general path exactly.
          const std::size_t base_idx = g.index(i0, j0, k0);
          const std::size_t sy = static_cast<std::size_t>(nx), sz = static_cast<std::size_t>(nx) * ny;
          for (int dk = 0; dk < 2; ++dk) {
            for (int dj = 0; dj < 2; ++dj) {
              const double wyz = wy[dj] * wz[dk];
              const std::size_t idx = base_idx + dk * sz + dj * sy;
              const double w0 = wx[0] * wyz, w1 = wx[1] * wyz;
              weight_[idx] += w0;
              weighted_[idx] += w0 * value;
              weight_[idx + 1] += w1;
              weighted_[idx + 1] += w1 * value;
            }
          }
          continue;
        }
        for (int dk = 0; dk < 2; ++dk) {
          const int k = k0 + dk;
          if (k < z_begin || k >= z_end || wz[dk] == 0.0) continue;
          for (int dj = 0; dj < 2; ++dj) {
            const int j = j0 + dj;
            if (j < 0 || j >= ny) continue;
            const double wyz = wy[dj] * wz[dk];
            if (wyz == 0.0) continue;
            for (int di = 0; di < 2; ++di) {
              const int i = i0 + di;
              if (i < 0 || i >= nx) continue;
              const double w = wx[di] * wyz;
              if (w == 0.0) continue;
              const std::size_t idx = g.index(i, j, k);
              weight_[idx] += w;
              weighted_[idx] += w * value;
            }
          }
        }
      }
    }
  }
}

void AccumulatorGrid::splat(std::span<const trackio::SyncedFrame> synced, SplatKernel kernel, int threads) {
  const int nz = geometry_.dims[2];
  const int workers = std::clamp(threads, 1, nz);
  if (workers == 1) {
    splat_slab(synced, kernel, 0, nz);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int z0 = static_cast<int>(static_cast<long long>(nz) * w / workers);
    const int z1 = static_cast<int>(static_cast<long long>(nz) * (w + 1) / workers);
    pool.emplace_back([this, synced, kernel, z0, z1] { splat_slab(synced, kernel, z0, z1); });
  }
}

VoxelGrid AccumulatorGrid::finalize(int hole_fill_radius, std::vector<std::uint8_t>* filled) const {
  const GridGeometry& g = geometry_;
  VoxelGrid out(g, 0.0f);
  if (filled) filled->assign(g.voxel_count(), 0);
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  for (std::size_t idx = 0; idx < out.data.size(); ++idx) {
    if (weight_[idx] > 0.0) {
      out.data[idx] = static_cast<float>(std::clamp(weighted_[idx] / weight_[idx], 0.0, 1.0));
      if (filled) (*filled)[idx] = 1;
    }
  }
  if (hole_fill_radius <= 0) return out;
  const int r = hole_fill_radius;
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t idx = g.index(i, j, k);
        if (weight_[idx] > 0.0) continue;
        double w_sum = 0.0, v_sum = 0.0;
        for (int kk = std::max(0, k - r); kk <= std::min(nz - 1, k + r); ++kk) {
          for (int jj = std::max(0, j - r); jj <= std::min(ny - 1, j + r); ++jj) {
            for (int ii = std::max(0, i - r); ii <= std::min(nx - 1, i + r); ++ii) {
              const std::size_t n = g.index(ii, jj, kk);
              w_sum += weight_[n];
              v_sum += weighted_[n];
            }
          }
        }
        if (w_sum > 0.0) {
          out.data[idx] = static_cast<float>(std::clamp(v_sum / w_sum, 0.0, 1.0));
          if (filled) (*filled)[idx] = 1;
        }
      }
    }
  }
  return out;
}

std::size_t AccumulatorGrid::filled_count() const {
  return static_cast<std::size_t>(std::count_if(weight_.begin(), weight_.end(), [](double w) { return w > 0.0; }));
}

VoxelGrid compound_onto(std::span<const trackio::SyncedFrame> synced, const GridGeometry& geometry,
                        const CompoundingConfig& config) {
  config.validate();
  if (synced.empty()) throw EmptyInputError("compounding needs at least one frame");
  AccumulatorGrid acc(geometry);
  acc.splat(synced, config.splat_kernel, config.threads);
  return acc.finalize(config.hole_fill_radius);
}

VoxelGrid compound(std::span<const trackio::SyncedFrame> synced, const CompoundingConfig& config) {
  config.validate();
  if (synced.empty()) throw EmptyInputError("compounding needs at least one frame");
  const GridGeometry g = grid_for_box(bounding_box(synced, config.padding), config.voxel_spacing);
  return compound_onto(synced, g, config);
}

std::size_t count_filled(std::span<const trackio::SyncedFrame> synced, const GridGeometry& geometry,
                         const CompoundingConfig& config) {
  config.validate();
  AccumulatorGrid acc(geometry);
  acc.splat(synced, config.splat_kernel, config.threads);
  std::vector<std::uint8_t> filled;
  acc.finalize(config.hole_fill_radius, &filled);
  return static_cast<std::size_t>(std::count(filled.begin(), filled.end(), std::uint8_t{1}));
}

}  // namespace thyrovol::compounder
