#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "thyrovol/compounder/compound.hpp"
#include "thyrovol/compounder/resample.hpp"
#include "thyrovol/compounder/volume_io.hpp"
#include "thyrovol/core/error.hpp"
#include "thyrovol/volumetry/volumetry.hpp"

namespace fs = std::filesystem;
using namespace thyrovol;
using namespace thyrovol::compounder;
using trackio::Frame;
using trackio::SyncedFrame;

namespace {

Frame constant_frame(int w, int h, double spacing, std::uint8_t value) {
  Frame f;
  f.width = w;
  f.height = h;
  f.spacing_x = f.spacing_y = spacing;
  f.pixels.assign(static_cast<std::size_t>(w) * h, value);
  return f;
}

RigidTransform at_z(double z) { return {Quat::Identity(), Vec3(0, 0, z)}; }

struct FrameSet {
  std::vector<Frame> frames;
  std::vector<RigidTransform> poses;

  std::vector<SyncedFrame> synced() const {
    std::vector<SyncedFrame> out;
    for (std::size_t i = 0; i < frames.size(); ++i) out.push_back({std::cref(frames[i]), poses[i]});
    return out;
  }
};

// Binary ellipsoid (a along z, b along x, c along y) centred at the frame
// centre; axial frames every dz mm.
FrameSet ellipsoid_sweep(double a, double b, double c, double dz, double pixel) {
  FrameSet s;
  const double half_w = b + 5.0, half_h = c + 5.0;
  const int w = static_cast<int>(std::round(2 * half_w / pixel)) + 1;
  const int h = static_cast<int>(std::round(2 * half_h / pixel)) + 1;
  for (double z = -a - 3.0; z <= a + 3.0 + 1e-9; z += dz) {
    Frame f = constant_frame(w, h, pixel, 0);
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        const double x = col * pixel - half_w, y = r * pixel - half_h;
        if ((x * x) / (b * b) + (y * y) / (c * c) + (z * z) / (a * a) <= 1.0) {
          f.pixels[static_cast<std::size_t>(r) * w + col] = 255;
        }
      }
    }
    s.frames.push_back(std::move(f));
    s.poses.push_back({Quat::Identity(), Vec3(-half_w, -half_h, z)});
  }
  return s;
}

double threshold_volume_ml(const VoxelGrid& g, float thr) {
  std::size_t n = 0;
  for (float v : g.data) n += v >= thr;
  return n * g.geometry.voxel_volume_mm3() / 1000.0;
}

FrameSet random_frames(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_int_distribution<int> px(20, 230);
  std::normal_distribution<double> n(0.0, 1.0);
  FrameSet s;
  for (int i = 0; i < count; ++i) {
    Frame f = constant_frame(12, 9, 0.4, 0);
    for (auto& p : f.pixels) p = static_cast<std::uint8_t>(px(rng));
    s.frames.push_back(f);
    const Quat q = Quat(1.0, 0.1 * n(rng), 0.1 * n(rng), 0.1 * n(rng)).normalized();
    s.poses.push_back({q, Vec3(u(rng), u(rng), 0.3 * i + u(rng) * 0.1)});
  }
  return s;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("thyrovol_comp_" + std::to_string(::getpid()) + "_" +
                                         std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

TEST(BoundingBox, SingleFrameIdentity) {
  // 11 pixels at 1 mm spans 10 mm corner to corner.
  FrameSet s;
  s.frames.push_back(constant_frame(11, 11, 1.0, 0));
  s.poses.push_back(RigidTransform::identity());
  auto box = bounding_box(s.synced(), 0.0);
  EXPECT_EQ(box.min_corner, Vec3(0, 0, 0));
  EXPECT_EQ(box.max_corner, Vec3(10, 10, 0));
  s.poses[0] = at_z(5.0);
  box = bounding_box(s.synced(), 0.0);
  EXPECT_EQ(box.min_corner, Vec3(0, 0, 5));
  EXPECT_EQ(box.max_corner, Vec3(10, 10, 5));
  box = bounding_box(s.synced(), 2.0);
  EXPECT_EQ(box.min_corner, Vec3(-2, -2, 3));
}

TEST(BoundingBox, ContainsEveryCorner) {
  const auto s = random_frames(4, 100);
  const auto box = bounding_box(s.synced(), 0.0);
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    const auto& f = s.frames[i];
    for (int cx : {0, f.width - 1}) {
      for (int cy : {0, f.height - 1}) {
        const Vec3 w = s.poses[i].apply(f.plane_position(cx, cy));
        for (int d = 0; d < 3; ++d) {
          EXPECT_GE(w[d], box.min_corner[d] - 1e-12);
          EXPECT_LE(w[d], box.max_corner[d] + 1e-12);
        }
      }
    }
  }
}

TEST(BoundingBox, EmptyInput) {
  std::vector<SyncedFrame> none;
  EXPECT_THROW(bounding_box(none, 0.0), EmptyInputError);
  CompoundingConfig cfg;
  EXPECT_THROW(compound(none, cfg), EmptyInputError);
}

TEST(Compound, ConfigValidation) {
  FrameSet s;
  s.frames.push_back(constant_frame(3, 3, 1.0, 0));
  s.poses.push_back(RigidTransform::identity());
  CompoundingConfig cfg;
  cfg.voxel_spacing = 0.0;
  EXPECT_THROW(compound(s.synced(), cfg), ConfigError);
  cfg.voxel_spacing = 1.0;
  cfg.hole_fill_radius = -1;
  EXPECT_THROW(compound(s.synced(), cfg), ConfigError);
}

TEST(Compound, ConstantFrameNearest) {
  FrameSet s;
  s.frames.push_back(constant_frame(10, 8, 1.0, 0));
  // 0.5 is not representable in 8 bits, so use the nearest stored level.
  std::fill(s.frames[0].pixels.begin(), s.frames[0].pixels.end(), 128);
  s.poses.push_back(at_z(0.0));
  CompoundingConfig cfg;
  cfg.voxel_spacing = 1.0;
  cfg.splat_kernel = SplatKernel::Nearest;
  cfg.hole_fill_radius = 0;
  cfg.padding = 2.0;
  const auto g = compound(s.synced(), cfg);
  std::size_t touched = 0;
  for (float v : g.data) {
    if (v != 0.0f) {
      EXPECT_FLOAT_EQ(v, 128.0f / 255.0f);
      ++touched;
    }
  }
  EXPECT_EQ(touched, 80u);
}

TEST(Compound, CoincidentFramesAverage) {
  FrameSet s;
  s.frames.push_back(constant_frame(6, 6, 1.0, 51));   // 0.2
  s.frames.push_back(constant_frame(6, 6, 1.0, 153));  // 0.6
  s.poses = {at_z(0.0), at_z(0.0)};
  for (auto kernel : {SplatKernel::Nearest, SplatKernel::Trilinear}) {
    CompoundingConfig cfg;
    cfg.voxel_spacing = 1.0;
    cfg.splat_kernel = kernel;
    cfg.hole_fill_radius = 0;
    const auto g = compound(s.synced(), cfg);
    std::size_t touched = 0;
    for (float v : g.data) {
      if (v != 0.0f) {
        EXPECT_NEAR(v, 0.4, 1e-6);
        ++touched;
      }
    }
    EXPECT_EQ(touched, 36u);
  }
}

TEST(Compound, HoleFillUsesNeighbourAverage) {
  // Two planes 2 mm apart at 1 mm voxels leave the middle plane empty.
  FrameSet s;
  s.frames.push_back(constant_frame(4, 4, 1.0, 51));
  s.frames.push_back(constant_frame(4, 4, 1.0, 153));
  s.poses = {at_z(0.0), at_z(2.0)};
  CompoundingConfig cfg;
  cfg.voxel_spacing = 1.0;
  cfg.splat_kernel = SplatKernel::Nearest;
  cfg.padding = 0.0;
  cfg.hole_fill_radius = 0;
  auto g = compound(s.synced(), cfg);
  EXPECT_EQ(g.geometry.dims[2], 3);
  EXPECT_EQ(g.at(1, 1, 1), 0.0f);
  cfg.hole_fill_radius = 1;
  g = compound(s.synced(), cfg);
  EXPECT_NEAR(g.at(1, 1, 1), 0.4, 1e-6);
  EXPECT_NEAR(g.at(0, 0, 1), 0.4, 1e-6);
}

TEST(Compound, AnalyticEllipsoidVolume) {
  const auto s = ellipsoid_sweep(20.0, 10.0, 10.0, 0.3, 0.25);
  CompoundingConfig cfg;
  cfg.voxel_spacing = 0.5;
  const auto g = compound(s.synced(), cfg);
  const double truth = 4.0 / 3.0 * std::numbers::pi * 20 * 10 * 10 / 1000.0;
  EXPECT_NEAR(truth, 8.378, 5e-4);
  EXPECT_NEAR(threshold_volume_ml(g, 0.5f), truth, 0.05 * truth);
}

TEST(Compound, OutputBoundedByInputRange) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = random_frames(seed, 30);
    std::uint8_t lo = 255, hi = 0;
    for (const auto& f : s.frames) {
      for (auto p : f.pixels) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
      }
    }
    CompoundingConfig cfg;
    cfg.voxel_spacing = 0.5;
    std::vector<std::uint8_t> filled;
    AccumulatorGrid acc(grid_for_box(bounding_box(s.synced(), cfg.padding), cfg.voxel_spacing));
    acc.splat(s.synced(), cfg.splat_kernel);
    const auto g = acc.finalize(cfg.hole_fill_radius, &filled);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      if (filled[i]) {
        EXPECT_GE(g.data[i], lo / 255.0f - 1e-6f);
        EXPECT_LE(g.data[i], hi / 255.0f + 1e-6f);
      } else {
        EXPECT_EQ(g.data[i], 0.0f);
      }
    }
    for (std::size_t i = 0; i < acc.weights().size(); ++i) {
      EXPECT_GE(acc.weights()[i], 0.0);
      if (acc.weights()[i] == 0.0) {
        EXPECT_EQ(acc.weighted_sums()[i], 0.0);
      }
    }
  }
}

TEST(Compound, FrameOrderPermutationInvariant) {
  const auto s = random_frames(21, 25);
  CompoundingConfig cfg;
  cfg.voxel_spacing = 0.5;
  const auto a = compound(s.synced(), cfg);
  FrameSet p = s;
  std::mt19937_64 rng(3);
  std::vector<std::size_t> idx(s.frames.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    p.frames[i] = s.frames[idx[i]];
    p.poses[i] = s.poses[idx[i]];
  }
  const auto b = compound(p.synced(), cfg);
  ASSERT_EQ(a.geometry, b.geometry);
  for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(a.data[i], b.data[i], 1e-6);
}

TEST(Compound, BitIdenticalAcrossThreadCounts) {
  const auto s = random_frames(8, 40);
  CompoundingConfig cfg;
  cfg.voxel_spacing = 0.4;
  cfg.threads = 1;
  const auto a = compound(s.synced(), cfg);
  for (int t : {2, 3, 7}) {
    cfg.threads = t;
    const auto b = compound(s.synced(), cfg);
    EXPECT_EQ(a.data, b.data) << "threads " << t;
  }
}

TEST(Compound, MonotoneCoverage) {
  const auto s = random_frames(13, 20);
  CompoundingConfig cfg;
  cfg.voxel_spacing = 0.5;
  const auto geometry = grid_for_box(bounding_box(s.synced(), cfg.padding), cfg.voxel_spacing);
  const auto all = s.synced();
  std::size_t prev = 0;
  for (std::size_t n = 1; n <= all.size(); ++n) {
    const auto c = count_filled(std::span(all).first(n), geometry, cfg);
    EXPECT_GE(c, prev);
    prev = c;
  }
}

TEST(ResampleAxial, IdentityAtTargetSize) {
  GridGeometry g;
  g.spacing = Vec3(0.5, 0.5, 0.7);
  g.dims = {8, 6, 3};
  VoxelGrid v(g);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& x : v.data) x = u(rng);
  const auto st = resample_axial(v, 8, 6);
  ASSERT_EQ(st.slices.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 6; ++j) {
      for (int i = 0; i < 8; ++i) EXPECT_EQ(st.slices[k].at(i, j), v.at(i, j, k));
    }
  }
  EXPECT_DOUBLE_EQ(st.pixel_area_mm2, 0.25);
  EXPECT_DOUBLE_EQ(st.slice_thickness_mm, 0.7);
}

TEST(ResampleAxial, DownscaleConstant) {
  GridGeometry g;
  g.dims = {16, 16, 2};
  VoxelGrid v(g, 0.3f);
  const auto st = resample_axial(v, 8, 8);
  for (const auto& s : st.slices) {
    for (float x : s.data) EXPECT_NEAR(x, 0.3f, 1e-6f);
  }
  EXPECT_DOUBLE_EQ(st.pixel_area_mm2, 4.0);
}

TEST(ResampleAxial, DegenerateTarget) {
  VoxelGrid v(GridGeometry{});
  EXPECT_THROW(resample_axial(v, 0, 4), ConfigError);
}

TEST(ResampleAxial, VolumeBookkeeping) {
  // Ellipsoid mask on an anisotropic, non-square grid, resampled into a square
  // canvas; pixel-count volume matches voxel-count volume within 2%.
  GridGeometry g;
  g.spacing = Vec3(0.5, 0.5, 0.5);
  g.dims = {70, 50, 90};
  g.origin = Vec3(-17.25, -12.25, -22.25);
  VoxelGrid v(g);
  LabelVolume m(g);
  for (int k = 0; k < g.dims[2]; ++k) {
    for (int j = 0; j < g.dims[1]; ++j) {
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 p = g.position(i, j, k);
        const bool in = p.x() * p.x() / 100 + p.y() * p.y() / 64 + p.z() * p.z() / 400 <= 1.0;
        v.at(i, j, k) = in ? 1.0f : 0.0f;
        m.at(i, j, k) = in;
      }
    }
  }
  const auto st = resample_axial(v, 64, 64);
  double vol = 0;
  for (const auto& s : st.slices) {
    for (float x : s.data) vol += (x >= 0.5f) * st.pixel_area_mm2 * st.slice_thickness_mm;
  }
  vol /= 1000.0;
  const double ref = volumetry::mask_volume(m);
  EXPECT_NEAR(vol, ref, 0.02 * ref);

  std::vector<LabelSlice> labels;
  for (const auto& s : st.slices) {
    LabelSlice l(s.width, s.height);
    for (std::size_t i = 0; i < s.data.size(); ++i) l.data[i] = s.data[i] >= 0.5f;
    labels.push_back(l);
  }
  const auto back = labels_to_grid(labels, st.mapping);
  EXPECT_EQ(back.geometry, g);
  EXPECT_NEAR(volumetry::mask_volume(back), ref, 0.02 * ref);
  EXPECT_GT(volumetry::dice_score(back, m), 0.95);
}

TEST(VolumeIo, RoundTrip) {
  TempDir dir;
  GridGeometry g;
  g.origin = Vec3(-1.25, 3.5, 0.1);
  g.spacing = Vec3(0.5, 0.25, 0.3);
  g.dims = {5, 4, 3};
  VoxelGrid v(g);
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(i) / 60.0f;
  write_volume(v, dir.path());
  const auto r = read_volume(dir.path());
  EXPECT_EQ(r.geometry, g);
  EXPECT_EQ(r.data, v.data);

  LabelVolume m(g);
  m.data[7] = 1;
  write_labels(m, dir.path());
  const auto rm = read_labels(dir.path());
  EXPECT_EQ(rm.data, m.data);
  std::string dtype;
  read_geometry(dir.path(), "mask", &dtype);
  EXPECT_EQ(dtype, "u8");
}
