#include "thyrovol/trackio/sweep_io.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "thyrovol/core/error.hpp"
#include "thyrovol/core/text.hpp"

namespace thyrovol::trackio {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<const char*, 8> kPoseFields{"t", "qw", "qx", "qy", "qz", "px", "py", "pz"};

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu.pgm", index);
  return buf;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

double json_number(const json& j, const char* key, const fs::path& file) {
  if (!j.contains(key)) throw FormatError(file.string() + ": missing field '" + key + "'");
  if (!j[key].is_number()) throw FormatError(file.string() + ": field '" + key + "' is not a number");
  return j[key].get<double>();
}

}  // namespace

void write_pgm(const fs::path& path, int width, int height, const std::uint8_t* pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels), static_cast<std::streamsize>(width) * height);
  if (!out) throw IoError("short write to " + path.string());
}

std::pair<int, int> read_pgm(const fs::path& path, std::vector<std::uint8_t>& pixels) {
  std::ifstream in = open_input(path);
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  if (next_token() != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PGM header");
  }
  if (w < 1 || h < 1 || maxval != 255) throw FormatError(path.string() + ": unsupported PGM header");
  pixels.resize(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size())) {
    throw FormatError(path.string() + ": truncated pixel data");
  }
  return {w, h};
}

void write_sweep(const Sweep& sweep, const fs::path& dir) {
  sweep.validate();
  fs::create_directories(dir / "frames");

  const RigidTransform& c = sweep.calibration.image_to_sensor;
  json meta;
  meta["subject_id"] = sweep.meta.subject_id;
  meta["observer_id"] = sweep.meta.observer_id;
  meta["repeat_index"] = sweep.meta.repeat_index;
  meta["lobe"] = to_string(sweep.meta.lobe);
  meta["nominal_frame_rate"] = sweep.meta.nominal_frame_rate;
  meta["nominal_pose_rate"] = sweep.meta.nominal_pose_rate;
  meta["pixel_spacing"] = {sweep.frames.front().spacing_x, sweep.frames.front().spacing_y};
  meta["calibration"] = {c.rotation.w(),    c.rotation.x(),    c.rotation.y(),   c.rotation.z(),
                         c.translation.x(), c.translation.y(), c.translation.z()};
  {
    std::ofstream out(dir / "meta.json");
    if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "poses.csv");
    if (!out) throw IoError("cannot write " + (dir / "poses.csv").string());
    out << "t,qw,qx,qy,qz,px,py,pz\n";
    for (const TimedPose& p : sweep.poses) {
      out << format_double(p.t()) << ',' << format_double(p.q().w()) << ',' << format_double(p.q().x()) << ','
          << format_double(p.q().y()) << ',' << format_double(p.q().z()) << ',' << format_double(p.p().x())
          << ',' << format_double(p.p().y()) << ',' << format_double(p.p().z()) << '\n';
    }
  }
  {
    std::ofstream out(dir / "frames.csv");
    if (!out) throw IoError("cannot write " + (dir / "frames.csv").string());
    out << "index,t\n";
    for (std::size_t i = 0; i < sweep.frames.size(); ++i) {
      out << i << ',' << format_double(sweep.frames[i].t) << '\n';
    }
  }
  for (std::size_t i = 0; i < sweep.frames.size(); ++i) {
    const Frame& f = sweep.frames[i];
    write_pgm(dir / "frames" / frame_name(i), f.width, f.height, f.pixels.data());
  }
}

Sweep read_sweep(const fs::path& dir) {
  Sweep sweep;

  const fs::path meta_path = dir / "meta.json";
  double sx = 1.0, sy = 1.0;
  {
    std::ifstream in = open_input(meta_path);
    json meta;
    try {
      meta = json::parse(in);
    } catch (const json::parse_error& e) {
      throw FormatError(meta_path.string() + ": " + e.what());
    }
    if (!meta.contains("subject_id")) throw FormatError(meta_path.string() + ": missing field 'subject_id'");
    const json& sid = meta["subject_id"];
    sweep.meta.subject_id = sid.is_string() ? sid.get<std::string>() : sid.dump();
    sweep.meta.observer_id = static_cast<int>(json_number(meta, "observer_id", meta_path));
    sweep.meta.repeat_index = static_cast<int>(json_number(meta, "repeat_index", meta_path));
    if (!meta.contains("lobe") || !meta["lobe"].is_string()) {
      throw FormatError(meta_path.string() + ": missing field 'lobe'");
    }
    sweep.meta.lobe = parse_lobe(meta["lobe"].get<std::string>());
    sweep.meta.nominal_frame_rate = json_number(meta, "nominal_frame_rate", meta_path);
    sweep.meta.nominal_pose_rate = json_number(meta, "nominal_pose_rate", meta_path);
    if (!meta.contains("pixel_spacing") || !meta["pixel_spacing"].is_array() || meta["pixel_spacing"].size() != 2) {
      throw FormatError(meta_path.string() + ": field 'pixel_spacing' must be [sx, sy]");
    }
    sx = meta["pixel_spacing"][0].get<double>();
    sy = meta["pixel_spacing"][1].get<double>();
    if (!meta.contains("calibration") || !meta["calibration"].is_array() || meta["calibration"].size() != 7) {
      throw FormatError(meta_path.string() + ": field 'calibration' must hold 7 numbers qw,qx,qy,qz,px,py,pz");
    }
    std::array<double, 7> c{};
    for (std::size_t i = 0; i < 7; ++i) c[i] = meta["calibration"][i].get<double>();
    const Quat q(c[0], c[1], c[2], c[3]);
    if (!(q.norm() > 0.0)) throw FormatError(meta_path.string() + ": calibration quaternion is zero");
    sweep.calibration.image_to_sensor = {q.normalized(), Vec3(c[4], c[5], c[6])};
  }

  {
    const fs::path path = dir / "poses.csv";
    std::ifstream in = open_input(path);
    CsvReader csv(in, path.string());
    csv.expect_header({kPoseFields.begin(), kPoseFields.end()});
    std::vector<std::string> row;
    while (csv.next(row)) {
      std::array<double, 8> v{};
      for (std::size_t i = 0; i < kPoseFields.size(); ++i) v[i] = csv.number(row, i, kPoseFields[i]);
      TimedPose pose(v[0], Quat(v[1], v[2], v[3], v[4]), Vec3(v[5], v[6], v[7]));
      if (!sweep.poses.empty() && !(pose.t() > sweep.poses.back().t())) {
        throw FormatError(csv.where() + ": pose timestamps must strictly increase");
      }
      sweep.poses.push_back(pose);
    }
  }

  {
    const fs::path path = dir / "frames.csv";
    std::ifstream in = open_input(path);
    CsvReader csv(in, path.string());
    csv.expect_header({"index", "t"});
    std::vector<std::string> row;
    while (csv.next(row)) {
      const double idx = csv.number(row, 0, "index");
      if (idx != static_cast<double>(sweep.frames.size())) {
        throw FormatError(csv.where() + ": frame indices must be consecutive from 0");
      }
      Frame f;
      f.t = csv.number(row, 1, "t");
      f.spacing_x = sx;
      f.spacing_y = sy;
      std::tie(f.width, f.height) = read_pgm(dir / "frames" / frame_name(sweep.frames.size()), f.pixels);
      sweep.frames.push_back(std::move(f));
    }
  }

  try {
    sweep.validate();
  } catch (const Error& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
  return sweep;
}

}  // namespace thyrovol::trackio
