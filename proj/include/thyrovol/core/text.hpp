#pragma once

#include <istream>
#include <string>
#include <vector>

namespace thyrovol {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

// Fixed-point text with `digits` decimals, used for report tables.
std::string format_fixed(double v, int digits);

// Minimal comma-separated reader with file:line diagnostics. No quoting.
class CsvReader {
 public:
  CsvReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  // Reads the header line and throws FormatError unless it matches exactly.
  void expect_header(const std::vector<std::string>& fields);
  // Reads the header line and returns its fields.
  std::vector<std::string> header();

  // Next non-empty data row; false at end of input. Rows must carry as many
  // fields as the header, otherwise FormatError names the first missing field.
  bool next(std::vector<std::string>& row);

  double number(const std::vector<std::string>& row, std::size_t idx, const std::string& field) const;
  long long integer(const std::vector<std::string>& row, std::size_t idx, const std::string& field) const;

  std::string where() const { return name_ + ":" + std::to_string(line_); }

 private:
  std::istream& in_;
  std::string name_;
  std::vector<std::string> header_;
  std::size_t line_ = 0;
};

std::vector<std::string> split(const std::string& s, char sep);

}  // namespace thyrovol
