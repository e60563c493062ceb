#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "thyrovol/core/geometry.hpp"
#include "thyrovol/core/grid.hpp"
#include "thyrovol/trackio/sweep.hpp"

namespace thyrovol::phantomsim {

// One lobe: points p with sum_i |x_i / s_i|^exponent <= 1 where
// x = rotation^-1 (p - center). Exponent 2 is an ellipsoid; larger values
// give boxier superellipsoids. Semi-axes are in mm: x lateral, y depth,
// z cranio-caudal (the sweep direction).
struct LobeSpec {
  Vec3 center = Vec3::Zero();
  Vec3 semi_axes = Vec3(7.0, 6.5, 19.0);
  Quat rotation = Quat::Identity();
  double exponent = 2.0;

  void validate() const;  // ConfigError
  bool contains(const Vec3& p) const;
  double volume_ml() const;  // closed form
};

struct PhantomSpec {
  LobeSpec right{Vec3(16.0, 0.0, 0.0)};
  LobeSpec left{Vec3(-16.0, 0.0, 0.0)};
  double background_level = 0.2;
  double contrast = 0.6;        // thyroid level = background_level + 0.5 * contrast
  double speckle_sd = 0.04;     // additive, fixed tissue pattern
  double texture_amplitude = 0.05;
  double texture_scale = 8.0;   // mm
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError
  const LobeSpec& lobe(trackio::Lobe which) const { return which == trackio::Lobe::Left ? left : right; }
  double thyroid_level() const { return background_level + 0.5 * contrast; }
  double total_volume_ml() const { return left.volume_ml() + right.volume_ml(); }
};

// Membership test for one lobe with the rotation and scaling folded into a
// matrix. LobeSpec::contains goes through this too, so labels and the
// intensity field agree voxel for voxel.
class LobeIndicator {
 public:
  explicit LobeIndicator(const LobeSpec& lobe);
  bool operator()(const Vec3& p) const;

 private:
  Eigen::Matrix3d to_unit_;  // world offset -> unit-lobe coordinates
  Vec3 center_;
  double exponent_;
  double radius2_;  // squared bounding radius, quick reject
};

// Analytic lobe with no texture and no speckle, the zero-noise oracle case.
PhantomSpec clean_phantom(const LobeSpec& right, const LobeSpec& left);

// Evaluates the phantom's intensity field. Texture and speckle come from
// periodic random lattices drawn once from the PhantomSpec seed, so building the
// field costs a few milliseconds and evaluating it is cheap.
class PhantomField {
 public:
  explicit PhantomField(const PhantomSpec& spec);

  const PhantomSpec& spec() const { return spec_; }
  // Intensity in [0, 1] at a world point (mm).
  double operator()(const Vec3& p) const;

 private:
  PhantomSpec spec_;
  LobeIndicator right_;
  LobeIndicator left_;
  std::shared_ptr<const std::vector<float>> texture_;
  std::shared_ptr<const std::vector<float>> speckle_;
};

// One-off evaluation; builds a PhantomField each call.
double phantom_field(const PhantomSpec& spec, const Vec3& p);

// Voxel-centre membership of one lobe on a lattice.
LabelVolume lobe_labels(const LobeSpec& lobe, const GridGeometry& geometry);

}  // namespace thyrovol::phantomsim
