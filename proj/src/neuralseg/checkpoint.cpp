#include "thyrovol/neuralseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "thyrovol/core/error.hpp"
#include "thyrovol/core/text.hpp"

namespace thyrovol::neuralseg {

namespace {

constexpr const char* kMagic = "thyrovol-net";
constexpr int kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint blob assumes a little-endian host");

void write_blob(std::ostream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_blob(std::istream& in, std::span<double> v, const std::string& name, const char* what) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != v.size() * sizeof(double)) {
    throw FormatError(name + ": truncated " + what + " blob (" + std::to_string(in.gcount()) + " of " +
                      std::to_string(v.size() * sizeof(double)) + " bytes)");
  }
}

}  // namespace

void write_checkpoint(const Network& net, std::ostream& out) {
  const ArchitectureSpec& s = net.spec();
  out << kMagic << ' ' << kVersion << '\n'
      << "num_encoders " << s.num_encoders << '\n'
      << "num_decoders " << s.num_decoders << '\n'
      << "in_channels " << s.in_channels << '\n'
      << "channels " << s.channels << '\n'
      << "kernel_size " << s.kernel_size << '\n'
      << "num_classes " << s.num_classes << '\n'
      << "dropout " << format_double(s.dropout) << '\n'
      << "bn_momentum " << format_double(s.bn_momentum) << '\n'
      << "bn_eps " << format_double(s.bn_eps) << '\n'
      << "input_size " << s.input_size << '\n'
      << "parameters " << net.parameters().size() << '\n'
      << "running_stats " << net.running_stats().size() << '\n'
      << "end\n";
  write_blob(out, net.parameters());
  write_blob(out, net.running_stats());
}

void write_checkpoint(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  write_checkpoint(net, out);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Network read_checkpoint(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(name + ": empty checkpoint");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != kMagic) throw FormatError(name + ": not a thyrovol network checkpoint");
    if (version != kVersion) {
      throw FormatError(name + ": unsupported checkpoint version " + std::to_string(version));
    }
  }
  std::map<std::string, std::string> kv;
  int lineno = 1;
  while (true) {
    if (!std::getline(in, line)) throw FormatError(name + ": header ends without 'end'");
    ++lineno;
    if (line == "end") break;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw FormatError(name + ":" + std::to_string(lineno) + ": expected 'key value'");
    kv[line.substr(0, sp)] = line.substr(sp + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(name + ": header lacks '" + key + "'");
    return it->second;
  };
  auto as_int = [&](const char* key) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(get(key), &pos);
      if (pos != get(key).size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::logic_error&) {
      throw FormatError(name + ": '" + key + "' is not an integer");
    }
  };
  auto as_double = [&](const char* key) {
    try {
      return std::stod(get(key));
    } catch (const std::logic_error&) {
      throw FormatError(name + ": '" + key + "' is not a number");
    }
  };

  ArchitectureSpec s;
  s.num_encoders = static_cast<int>(as_int("num_encoders"));
  s.num_decoders = static_cast<int>(as_int("num_decoders"));
  s.in_channels = static_cast<int>(as_int("in_channels"));
  s.channels = static_cast<int>(as_int("channels"));
  s.kernel_size = static_cast<int>(as_int("kernel_size"));
  s.num_classes = static_cast<int>(as_int("num_classes"));
  s.dropout = as_double("dropout");
  s.bn_momentum = as_double("bn_momentum");
  s.bn_eps = as_double("bn_eps");
  s.input_size = static_cast<int>(as_int("input_size"));
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw FormatError(name + ": invalid architecture: " + e.what());
  }
  Network net(s, 0);
  if (static_cast<std::size_t>(as_int("parameters")) != net.parameters().size() ||
      static_cast<std::size_t>(as_int("running_stats")) != net.running_stats().size()) {
    throw FormatError(name + ": parameter counts do not match the architecture");
  }
  read_blob(in, net.parameters(), name, "parameter");
  read_blob(in, net.running_stats(), name, "statistics");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(name + ": trailing bytes after the blob");
  return net;
}

Network read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in, path.string());
}

}  // namespace thyrovol::neuralseg
