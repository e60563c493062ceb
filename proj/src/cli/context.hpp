#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thyrovol/cli/cli.hpp"

namespace thyrovol::cli {

// Everything a command may touch while it runs.
class Context {
 public:
  Context(std::ostream& out, std::ostream& err) : out(out), err(err) {}

  std::ostream& out;
  std::ostream& err;
  std::uint64_t seed = 0;
  int threads = 1;
  RunManifest manifest;

  // Creates the output directory. If it did not exist it is removed as a
  // whole on failure, otherwise only the tracked outputs are.
  void open_output_dir(const std::filesystem::path& dir);
  bool has_output_dir() const { return !out_dir_.empty(); }
  const std::filesystem::path& output_dir() const { return out_dir_; }

  // Path of an output inside the output directory, recorded for the manifest
  // and for cleanup.
  std::filesystem::path output(const std::string& name);
  void input(const std::filesystem::path& p) { manifest.inputs.push_back(p.generic_string()); }

  void remove_outputs() noexcept;

 private:
  std::filesystem::path out_dir_;
  bool created_dir_ = false;
  std::vector<std::filesystem::path> written_;
};

using CommandFn = std::function<void(Context&)>;

// Each adds its subcommand and returns the action to run if it is selected.
CommandFn add_simulate(CLI::App& app);
CommandFn add_compound(CLI::App& app);
CommandFn add_train(CLI::App& app);
CommandFn add_segment(CLI::App& app);
CommandFn add_volume(CLI::App& app);
CommandFn add_stats(CLI::App& app);
CommandFn add_report(CLI::App& app);

}  // namespace thyrovol::cli
