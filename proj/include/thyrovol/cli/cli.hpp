#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "thyrovol/core/error.hpp"

namespace thyrovol::cli {

inline constexpr const char* kVersion = "0.1.0";

// 0 success, 2 bad input data or files, 3 bad configuration, 1 anything else.
int exit_code(ErrorKind kind);

// Written as manifest.json next to a command's outputs. The only artifact that
// carries wall-clock time.
struct RunManifest {
  std::string command;
  std::string tool_version = kVersion;
  std::uint64_t seed = 0;
  int threads = 1;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();  // resolved option values
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double duration_s = 0.0;

  nlohmann::ordered_json to_json() const;
};

void write_manifest(const RunManifest& m, const std::filesystem::path& path);

// Runs one subcommand. Returns the process exit code; messages go to `err`
// as "thyrovol <command>: error: ...".
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace thyrovol::cli
