#pragma once

#include <filesystem>
#include <istream>
#include <ostream>

#include "thyrovol/neuralseg/network.hpp"

namespace thyrovol::neuralseg {

// Text header ("thyrovol-net 1", one "key value" line per architecture field,
// parameter and statistic counts, "end") followed by the parameters and then
// the running statistics as little-endian 64-bit floats.
void write_checkpoint(const Network& net, std::ostream& out);
void write_checkpoint(const Network& net, const std::filesystem::path& path);

// FormatError on a bad header or truncated blob, IoError when unreadable.
Network read_checkpoint(std::istream& in, const std::string& name = "checkpoint");
Network read_checkpoint(const std::filesystem::path& path);

}  // namespace thyrovol::neuralseg
