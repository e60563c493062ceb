#pragma once

#include <filesystem>

#include "thyrovol/trackio/sweep.hpp"

namespace thyrovol::trackio {

// Sweep container layout:
//   meta.json          subject/observer/repeat/lobe/rates, pixel spacing and the
//                      calibration as [qw,qx,qy,qz,px,py,pz]
//   poses.csv          t,qw,qx,qy,qz,px,py,pz
//   frames.csv         index,t
//   frames/NNNNN.pgm   binary 8-bit PGM (P5)
// Decimal fields are written with 17 significant digits.
void write_sweep(const Sweep& sweep, const std::filesystem::path& dir);

// Throws FormatError with file:line and field name on malformed input, and
// IoError when a file is missing.
Sweep read_sweep(const std::filesystem::path& dir);

void write_pgm(const std::filesystem::path& path, int width, int height, const std::uint8_t* pixels);
// Returns width, height and fills `pixels`.
std::pair<int, int> read_pgm(const std::filesystem::path& path, std::vector<std::uint8_t>& pixels);

}  // namespace thyrovol::trackio
