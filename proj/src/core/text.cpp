#include "thyrovol/core/text.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "thyrovol/core/error.hpp"

namespace thyrovol {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  std::string s(buf);
  if (s.rfind("-0.", 0) == 0 && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> CsvReader::header() {
  std::string line;
  if (!std::getline(in_, line)) throw FormatError(name_ + ": empty file, expected a header line");
  ++line_;
  header_ = split(line, ',');
  return header_;
}

void CsvReader::expect_header(const std::vector<std::string>& fields) {
  const auto got = header();
  if (got != fields) {
    std::string want;
    for (std::size_t i = 0; i < fields.size(); ++i) want += (i ? "," : "") + fields[i];
    throw FormatError(where() + ": header must be '" + want + "'");
  }
}

bool CsvReader::next(std::vector<std::string>& row) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.empty() || line == "\r") continue;
    row = split(line, ',');
    if (row.size() < header_.size()) {
      throw FormatError(where() + ": missing field '" + header_[row.size()] + "'");
    }
    if (row.size() > header_.size()) throw FormatError(where() + ": too many fields");
    return true;
  }
  return false;
}

double CsvReader::number(const std::vector<std::string>& row, std::size_t idx, const std::string& field) const {
  const std::string& s = row.at(idx);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError(where() + ": field '" + field + "' is not a number: '" + s + "'");
  }
  return v;
}

long long CsvReader::integer(const std::vector<std::string>& row, std::size_t idx, const std::string& field) const {
  const std::string& s = row.at(idx);
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw FormatError(where() + ": field '" + field + "' is not an integer: '" + s + "'");
  }
  return v;
}

}  // namespace thyrovol
