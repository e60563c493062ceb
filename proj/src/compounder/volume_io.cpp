#include "thyrovol/compounder/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "thyrovol/core/error.hpp"

namespace thyrovol::compounder {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "volume payloads are stored little-endian");

namespace {

void write_header(const GridGeometry& g, const fs::path& path, const char* dtype) {
  json h;
  h["origin"] = {g.origin.x(), g.origin.y(), g.origin.z()};
  h["spacing"] = {g.spacing.x(), g.spacing.y(), g.spacing.z()};
  h["dims"] = {g.dims[0], g.dims[1], g.dims[2]};
  h["dtype"] = dtype;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << h.dump(2) << '\n';
}

void write_payload(const fs::path& path, const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw IoError("short write to " + path.string());
}

void read_payload(const fs::path& path, void* data, std::size_t bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes)) {
    throw FormatError(path.string() + ": payload shorter than dims imply");
  }
  char extra;
  if (in.get(extra)) throw FormatError(path.string() + ": payload longer than dims imply");
}

std::array<double, 3> triple(const json& h, const char* key, const fs::path& path) {
  if (!h.contains(key) || !h[key].is_array() || h[key].size() != 3) {
    throw FormatError(path.string() + ": field '" + key + "' must be an array of 3 numbers");
  }
  std::array<double, 3> v{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!h[key][i].is_number()) throw FormatError(path.string() + ": field '" + key + "' must hold numbers");
    v[i] = h[key][i].get<double>();
  }
  return v;
}

}  // namespace

GridGeometry read_geometry(const fs::path& dir, const std::string& stem, std::string* dtype) {
  const fs::path path = dir / (stem + ".json");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json h;
  try {
    h = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  GridGeometry g;
  const auto o = triple(h, "origin", path);
  const auto s = triple(h, "spacing", path);
  const auto d = triple(h, "dims", path);
  g.origin = Vec3(o[0], o[1], o[2]);
  g.spacing = Vec3(s[0], s[1], s[2]);
  for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(d[a]);
  if (!h.contains("dtype") || !h["dtype"].is_string()) throw FormatError(path.string() + ": missing field 'dtype'");
  if (dtype) *dtype = h["dtype"].get<std::string>();
  try {
    g.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return g;
}

void write_volume(const VoxelGrid& grid, const fs::path& dir, const std::string& stem) {
  grid.geometry.validate();
  fs::create_directories(dir);
  write_header(grid.geometry, dir / (stem + ".json"), "f32le");
  write_payload(dir / (stem + ".raw"), grid.data.data(), grid.data.size() * sizeof(float));
}

void write_labels(const LabelVolume& mask, const fs::path& dir, const std::string& stem) {
  mask.geometry.validate();
  fs::create_directories(dir);
  write_header(mask.geometry, dir / (stem + ".json"), "u8");
  write_payload(dir / (stem + ".raw"), mask.data.data(), mask.data.size());
}

VoxelGrid read_volume(const fs::path& dir, const std::string& stem) {
  std::string dtype;
  VoxelGrid grid(read_geometry(dir, stem, &dtype));
  if (dtype != "f32le") throw FormatError((dir / (stem + ".json")).string() + ": dtype must be f32le, got " + dtype);
  read_payload(dir / (stem + ".raw"), grid.data.data(), grid.data.size() * sizeof(float));
  return grid;
}

LabelVolume read_labels(const fs::path& dir, const std::string& stem) {
  std::string dtype;
  LabelVolume mask(read_geometry(dir, stem, &dtype));
  if (dtype != "u8") throw FormatError((dir / (stem + ".json")).string() + ": dtype must be u8, got " + dtype);
  read_payload(dir / (stem + ".raw"), mask.data.data(), mask.data.size());
  for (std::uint8_t v : mask.data) {
    if (v > 1) throw FormatError((dir / (stem + ".raw")).string() + ": label values must be 0 or 1");
  }
  return mask;
}

}  // namespace thyrovol::compounder
