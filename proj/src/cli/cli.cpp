#include "thyrovol/cli/cli.hpp"

#include <chrono>
#include <fstream>
#include <utility>

#include "context.hpp"

namespace thyrovol::cli {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
      return 3;
    case ErrorKind::State:
      return 1;
    default:
      return 2;
  }
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["tool_version"] = tool_version;
  j["seed"] = seed;
  j["threads"] = threads;
  j["config"] = config;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["duration_s"] = duration_s;
  return j;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << m.to_json().dump(2) << '\n';
  if (!f) throw IoError("write failed: " + path.string());
}

void Context::open_output_dir(const std::filesystem::path& dir) {
  if (dir.empty()) throw ConfigError("--out must not be empty");
  std::error_code ec;
  created_dir_ = !std::filesystem::exists(dir, ec);
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  out_dir_ = dir;
}

std::filesystem::path Context::output(const std::string& name) {
  if (out_dir_.empty()) throw StateError("output requested before the output directory was opened");
  written_.push_back(out_dir_ / name);
  manifest.outputs.push_back(name);
  return written_.back();
}

void Context::remove_outputs() noexcept {
  std::error_code ec;
  if (out_dir_.empty()) return;
  if (created_dir_) {
    std::filesystem::remove_all(out_dir_, ec);
    return;
  }
  for (const auto& p : written_) std::filesystem::remove_all(p, ec);
  std::filesystem::remove(out_dir_ / "manifest.json", ec);
}

namespace {

std::string option_key(const CLI::Option* o) {
  std::string n = o->get_name();
  while (!n.empty() && n.front() == '-') n.erase(n.begin());
  return n;
}

nlohmann::ordered_json option_value(const CLI::Option* o) {
  if (o->count() == 0) return o->get_default_str();
  const auto& r = o->results();
  if (r.size() == 1) return r.front();
  return r;
}

// Resolved value of every option of the global app and the command, after
// flags and the config file have both been applied.
nlohmann::ordered_json snapshot(const CLI::App& app, const CLI::App& cmd) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const CLI::App* a : {&app, &cmd}) {
    for (const CLI::Option* o : a->get_options()) {
      const std::string key = option_key(o);
      if (key == "help" || key == "version" || key == "config" || key.empty()) continue;
      j[key] = option_value(o);
    }
  }
  return j;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tracked 3D ultrasound thyroid volumetry: simulate, compound, segment, measure, compare.",
               "thyrovol"};
  app.option_defaults()->always_capture_default();
  app.fallthrough();
  app.set_config("--config", "", "TOML file; top-level keys are global options, [command] sections hold "
                                 "command options. Flags given on the command line win.");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_version_flag("--version", kVersion);
  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--threads", threads, "Worker threads; outputs do not depend on it");
  app.require_subcommand(1);

  std::vector<std::pair<CLI::App*, CommandFn>> commands;
  for (auto add : {add_simulate, add_compound, add_train, add_segment, add_volume, add_stats, add_report}) {
    CommandFn fn = add(app);
    commands.emplace_back(app.get_subcommands([](CLI::App*) { return true; }).back(), std::move(fn));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 3;
  }

  CLI::App* selected = app.get_subcommands().front();
  const std::string name = selected->get_name();
  Context ctx(out, err);
  ctx.seed = seed;
  ctx.threads = threads;
  ctx.manifest.command = name;
  ctx.manifest.seed = seed;
  ctx.manifest.threads = threads;
  ctx.manifest.config = snapshot(app, *selected);
  if (const CLI::Option* c = app.get_option("--config"); c->count() > 0) ctx.input(c->as<std::string>());

  const auto start = std::chrono::steady_clock::now();
  try {
    if (threads < 1) throw ConfigError("--threads must be >= 1, got " + std::to_string(threads));
    for (auto& [sub, fn] : commands) {
      if (sub == selected) fn(ctx);
    }
    if (ctx.has_output_dir()) {
      ctx.manifest.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      write_manifest(ctx.manifest, ctx.output_dir() / "manifest.json");
    }
  } catch (const Error& e) {
    ctx.remove_outputs();
    err << "thyrovol " << name << ": error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    ctx.remove_outputs();
    err << "thyrovol " << name << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace thyrovol::cli
