#include "thyrovol/volumetry/volumetry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "thyrovol/core/error.hpp"

namespace thyrovol::volumetry {

namespace {
constexpr double kMaxAxisCm = 20.0;
constexpr double kMm3PerMl = 1000.0;
}  // namespace

void LobeAxes::validate() const {
  const double axes[3] = {length_cm, width_cm, depth_cm};
  const char* names[3] = {"length", "width", "depth"};
  for (int i = 0; i < 3; ++i) {
    if (!(axes[i] > 0.0) || !(axes[i] <= kMaxAxisCm)) {
      std::ostringstream os;
      os << "lobe " << names[i] << " must lie in (0, " << kMaxAxisCm << "] cm, got " << axes[i];
      throw DomainError(os.str());
    }
  }
}

void VolumetryConfig::validate() const {
  if (!(correction_factor > 0.0) || !(correction_factor <= 1.0)) {
    throw DomainError("ellipsoid correction factor must lie in (0, 1]");
  }
}

double ellipsoid_volume(const LobeAxes& axes, const VolumetryConfig& cfg) {
  axes.validate();
  cfg.validate();
  return cfg.correction_factor * axes.length_cm * axes.width_cm * axes.depth_cm;
}

double total_thyroid_volume(double left_ml, double right_ml) {
  if (!(left_ml >= 0.0) || !(right_ml >= 0.0)) throw DomainError("lobe volumes must be >= 0 ml");
  return left_ml + right_ml;
}

std::size_t foreground_count(std::span<const std::uint8_t> labels) {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](std::uint8_t v) { return v != 0; }));
}

double mask_volume(std::span<const std::uint8_t> labels, const Vec3& spacing_mm) {
  if (!(spacing_mm.minCoeff() > 0.0)) throw DomainError("mask spacing must be > 0");
  return static_cast<double>(foreground_count(labels)) * spacing_mm.prod() / kMm3PerMl;
}

double mask_volume(const LabelVolume& mask) { return mask_volume(mask.data, mask.geometry.spacing); }

double dice_score(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dice_score: masks have " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                     " elements");
  }
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool fa = a[i] != 0, fb = b[i] != 0;
    na += fa;
    nb += fb;
    both += fa && fb;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double dice_score(const LabelVolume& a, const LabelVolume& b) {
  if (!(a.geometry == b.geometry)) throw ShapeError("dice_score: mask geometries differ");
  return dice_score(std::span<const std::uint8_t>(a.data), std::span<const std::uint8_t>(b.data));
}

}  // namespace thyrovol::volumetry
