#pragma once

#include <filesystem>
#include <string>

#include "thyrovol/core/grid.hpp"

namespace thyrovol::compounder {

// Volume container: <stem>.json header {origin, spacing, dims, dtype} and
// <stem>.raw payload, x-fastest. Scalar volumes use dtype "f32le", label
// volumes "u8".
void write_volume(const VoxelGrid& grid, const std::filesystem::path& dir, const std::string& stem = "volume");
void write_labels(const LabelVolume& mask, const std::filesystem::path& dir, const std::string& stem = "mask");

VoxelGrid read_volume(const std::filesystem::path& dir, const std::string& stem = "volume");
LabelVolume read_labels(const std::filesystem::path& dir, const std::string& stem = "mask");

// Reads the header only.
GridGeometry read_geometry(const std::filesystem::path& dir, const std::string& stem, std::string* dtype = nullptr);

}  // namespace thyrovol::compounder
