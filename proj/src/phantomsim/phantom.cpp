#include "thyrovol/phantomsim/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "thyrovol/core/error.hpp"
#include "thyrovol/core/seed.hpp"

namespace thyrovol::phantomsim {

namespace {

// Nodes per axis, periodic. Texture repeats every 64 * texture_scale mm.
// Speckle is sampled at random offsets every pixel, so its lattice is kept
// small enough to stay in cache; the 16 mm repeat is invisible after
// compounding.
constexpr int kTextureLattice = 64;
constexpr int kSpeckleLattice = 32;

std::shared_ptr<const std::vector<float>> make_lattice(std::uint64_t seed, int n) {
  auto v = std::make_shared<std::vector<float>>(static_cast<std::size_t>(n) * n * n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& x : *v) x = static_cast<float>(u(rng));
  return v;
}

// Trilinear interpolation of the periodic lattice at q (lattice units).
template <int kLattice>
double value_noise(const std::vector<float>& lat, const Vec3& q) {
  const double fx = std::floor(q.x()), fy = std::floor(q.y()), fz = std::floor(q.z());
  const double tx = q.x() - fx, ty = q.y() - fy, tz = q.z() - fz;
  const int i = static_cast<int>(static_cast<std::int64_t>(fx) & (kLattice - 1));
  const int j = static_cast<int>(static_cast<std::int64_t>(fy) & (kLattice - 1));
  const int k = static_cast<int>(static_cast<std::int64_t>(fz) & (kLattice - 1));
  const int i1 = (i + 1) & (kLattice - 1), j1 = (j + 1) & (kLattice - 1), k1 = (k + 1) & (kLattice - 1);
  auto at = [&](int a, int b, int c) {
    return static_cast<double>(lat[(static_cast<std::size_t>(c) * kLattice + b) * kLattice + a]);
  };
  const double c00 = at(i, j, k) * (1 - tx) + at(i1, j, k) * tx;
  const double c10 = at(i, j1, k) * (1 - tx) + at(i1, j1, k) * tx;
  const double c01 = at(i, j, k1) * (1 - tx) + at(i1, j, k1) * tx;
  const double c11 = at(i, j1, k1) * (1 - tx) + at(i1, j1, k1) * tx;
  return (c00 * (1 - ty) + c10 * ty) * (1 - tz) + (c01 * (1 - ty) + c11 * ty) * tz;
}

// Speckle lattice pitch in mm and the factor that restores unit variance
// after trilinear smoothing of uniform [-1, 1] nodes: per axis the weights
// average to E[t^2 + (1-t)^2] = 2/3, and U(-1,1) has variance 1/3.
constexpr double kSpecklePitch = 0.5;
const double kSpeckleGain = std::sqrt(3.0 / std::pow(2.0 / 3.0, 3));

}  // namespace

void LobeSpec::validate() const {
  if (!(semi_axes.x() > 0) || !(semi_axes.y() > 0) || !(semi_axes.z() > 0)) {
    throw ConfigError("lobe semi-axes must be > 0");
  }
  if (!(exponent >= 1.0) || !std::isfinite(exponent)) throw ConfigError("lobe exponent must be >= 1");
  if (!center.allFinite()) throw ConfigError("lobe centre must be finite");
}

bool LobeSpec::contains(const Vec3& p) const { return LobeIndicator(*this)(p); }

LobeIndicator::LobeIndicator(const LobeSpec& lobe) : center_(lobe.center), exponent_(lobe.exponent) {
  const Eigen::Matrix3d rt = lobe.rotation.normalized().toRotationMatrix().transpose();
  to_unit_ = lobe.semi_axes.cwiseInverse().asDiagonal() * rt;
  // a superellipsoid with exponent >= 1 fits in the box of its semi-axes
  radius2_ = lobe.semi_axes.squaredNorm();
}

bool LobeIndicator::operator()(const Vec3& p) const {
  const Vec3 d = p - center_;
  if (d.squaredNorm() > radius2_) return false;
  const Vec3 q = to_unit_ * d;
  if (exponent_ == 2.0) return q.squaredNorm() <= 1.0;
  return std::pow(std::abs(q.x()), exponent_) + std::pow(std::abs(q.y()), exponent_) +
             std::pow(std::abs(q.z()), exponent_) <=
         1.0;
}

double LobeSpec::volume_ml() const {
  // 8abc * Gamma(1 + 1/e)^3 / Gamma(1 + 3/e); e = 2 gives 4/3 pi abc.
  const double abc = semi_axes.x() * semi_axes.y() * semi_axes.z();
  if (exponent == 2.0) return 4.0 / 3.0 * std::numbers::pi * abc / 1000.0;
  const double g = std::tgamma(1.0 + 1.0 / exponent);
  return 8.0 * abc * g * g * g / std::tgamma(1.0 + 3.0 / exponent) / 1000.0;
}

void PhantomSpec::validate() const {
  right.validate();
  left.validate();
  if (!(contrast > 0.0 && contrast <= 1.0)) throw ConfigError("contrast must lie in (0, 1]");
  if (!(background_level >= 0.0) || thyroid_level() > 1.0) throw ConfigError("intensity levels must lie in [0, 1]");
  if (!(speckle_sd >= 0.0) || !(texture_amplitude >= 0.0)) throw ConfigError("noise levels must be >= 0");
  if (!(texture_scale > 0.0)) throw ConfigError("texture_scale must be > 0");
}

PhantomSpec clean_phantom(const LobeSpec& right, const LobeSpec& left) {
  PhantomSpec s;
  s.right = right;
  s.left = left;
  s.speckle_sd = 0.0;
  s.texture_amplitude = 0.0;
  return s;
}

PhantomField::PhantomField(const PhantomSpec& spec) : spec_(spec), right_(spec.right), left_(spec.left) {
  spec_.validate();
  if (spec_.texture_amplitude > 0.0) texture_ = make_lattice(derive_seed(spec_.seed, {1}), kTextureLattice);
  if (spec_.speckle_sd > 0.0) speckle_ = make_lattice(derive_seed(spec_.seed, {2}), kSpeckleLattice);
}

double PhantomField::operator()(const Vec3& p) const {
  const bool inside = right_(p) || left_(p);
  double v = inside ? spec_.thyroid_level() : spec_.background_level;
  if (!inside && texture_) v += spec_.texture_amplitude * value_noise<kTextureLattice>(*texture_, p / spec_.texture_scale);
  if (speckle_) v += spec_.speckle_sd * kSpeckleGain * value_noise<kSpeckleLattice>(*speckle_, p / kSpecklePitch);
  return std::clamp(v, 0.0, 1.0);
}

double phantom_field(const PhantomSpec& spec, const Vec3& p) { return PhantomField(spec)(p); }

LabelVolume lobe_labels(const LobeSpec& lobe, const GridGeometry& geometry) {
  LabelVolume out(geometry, 0);
  const LobeIndicator inside(lobe);
  for (int k = 0; k < geometry.dims[2]; ++k) {
    for (int j = 0; j < geometry.dims[1]; ++j) {
      for (int i = 0; i < geometry.dims[0]; ++i) out.at(i, j, k) = inside(geometry.position(i, j, k)) ? 1 : 0;
    }
  }
  return out;
}

}  // namespace thyrovol::phantomsim
