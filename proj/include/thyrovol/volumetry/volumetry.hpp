#pragma once

#include <cstdint>
#include <span>

#include "thyrovol/core/grid.hpp"

namespace thyrovol::volumetry {

// Caliper measurements of one lobe, in centimetres.
struct LobeAxes {
  double length_cm = 0.0;
  double width_cm = 0.0;
  double depth_cm = 0.0;

  // DomainError unless every axis lies in (0, 20] cm.
  void validate() const;
};

struct VolumetryConfig {
  // Clinical ellipsoid correction factor; no isthmus term is ever added.
  double correction_factor = 0.48;

  void validate() const;
};

// factor * L * W * D, in ml (cm^3).
double ellipsoid_volume(const LobeAxes& axes, const VolumetryConfig& cfg = {});

// Left + right lobe volume in ml.
double total_thyroid_volume(double left_ml, double right_ml);

// Foreground voxel count times voxel volume, in ml.
double mask_volume(std::span<const std::uint8_t> labels, const Vec3& spacing_mm);
double mask_volume(const LabelVolume& mask);

std::size_t foreground_count(std::span<const std::uint8_t> labels);

// 2|A∩B| / (|A|+|B|); 1 when both are empty. ShapeError on size mismatch.
double dice_score(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
double dice_score(const LabelVolume& a, const LabelVolume& b);

}  // namespace thyrovol::volumetry
