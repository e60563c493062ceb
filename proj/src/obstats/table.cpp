#include "thyrovol/obstats/table.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>

#include "thyrovol/core/error.hpp"
#include "thyrovol/core/text.hpp"

namespace thyrovol::obstats {

namespace fs = std::filesystem;

const char* to_string(Modality m) {
  switch (m) {
    case Modality::Us2d: return "us2d";
    case Modality::Us3d: return "us3d";
    case Modality::Reference: return "reference";
  }
  return "?";
}

Modality parse_modality(const std::string& s) {
  if (s == "us2d") return Modality::Us2d;
  if (s == "us3d") return Modality::Us3d;
  if (s == "reference") return Modality::Reference;
  throw FormatError("modality must be us2d, us3d or reference, got '" + s + "'");
}

bool subject_less(const std::string& a, const std::string& b) {
  long long ia = 0, ib = 0;
  const auto ra = std::from_chars(a.data(), a.data() + a.size(), ia);
  const auto rb = std::from_chars(b.data(), b.data() + b.size(), ib);
  const bool na = ra.ec == std::errc{} && ra.ptr == a.data() + a.size();
  const bool nb = rb.ec == std::errc{} && rb.ptr == b.data() + b.size();
  if (na && nb && ia != ib) return ia < ib;
  if (na != nb) return na;
  return a < b;
}

void MeasurementTable::add(const Measurement& m) {
  if (!(m.volume_ml > 0.0)) {
    throw DataError("volume for subject " + m.subject + " must be > 0 ml, got " + format_double(m.volume_ml));
  }
  Key key{m.subject, m.observer, m.repeat, static_cast<int>(m.modality), m.lobe};
  if (index_.count(key)) {
    throw DataError("duplicate measurement (subject " + m.subject + ", observer " + std::to_string(m.observer) +
                    ", repeat " + std::to_string(m.repeat) + ", " + to_string(m.modality) + ", " + m.lobe + ")");
  }
  index_.emplace(std::move(key), records_.size());
  records_.push_back(m);
}

std::optional<double> MeasurementTable::find(const std::string& subject, int observer, int repeat, Modality modality,
                                             const std::string& lobe) const {
  auto it = index_.find(Key{subject, observer, repeat, static_cast<int>(modality), lobe});
  if (it == index_.end()) return std::nullopt;
  return records_[it->second].volume_ml;
}

std::vector<std::string> MeasurementTable::subjects() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records_) {
    if (seen.insert(r.subject).second) out.push_back(r.subject);
  }
  std::sort(out.begin(), out.end(), subject_less);
  return out;
}

std::vector<int> MeasurementTable::observers(Modality modality) const {
  std::set<int> s;
  for (const auto& r : records_) {
    if (r.modality == modality) s.insert(r.observer);
  }
  return {s.begin(), s.end()};
}

std::vector<int> MeasurementTable::repeats(Modality modality) const {
  std::set<int> s;
  for (const auto& r : records_) {
    if (r.modality == modality) s.insert(r.repeat);
  }
  return {s.begin(), s.end()};
}

void write_table_csv(const MeasurementTable& table, std::ostream& out) {
  out << "subject,observer,repeat,modality,lobe,volume_ml\n";
  for (const auto& r : table.records()) {
    out << r.subject << ',' << r.observer << ',' << r.repeat << ',' << to_string(r.modality) << ',' << r.lobe << ','
        << format_double(r.volume_ml) << '\n';
  }
}

MeasurementTable read_table_csv(std::istream& in, const std::string& name) {
  CsvReader csv(in, name);
  csv.expect_header({"subject", "observer", "repeat", "modality", "lobe", "volume_ml"});
  MeasurementTable table;
  std::vector<std::string> row;
  while (csv.next(row)) {
    Measurement m;
    m.subject = row[0];
    if (m.subject.empty()) throw FormatError(csv.where() + ": field 'subject' is empty");
    m.observer = static_cast<int>(csv.integer(row, 1, "observer"));
    m.repeat = static_cast<int>(csv.integer(row, 2, "repeat"));
    try {
      m.modality = parse_modality(row[3]);
    } catch (const FormatError& e) {
      throw FormatError(csv.where() + ": " + e.what());
    }
    m.lobe = row[4];
    if (m.lobe != "left" && m.lobe != "right" && m.lobe != "total") {
      throw FormatError(csv.where() + ": field 'lobe' must be left, right or total");
    }
    m.volume_ml = csv.number(row, 5, "volume_ml");
    try {
      table.add(m);
    } catch (const DataError& e) {
      throw FormatError(csv.where() + ": " + e.what());
    }
  }
  return table;
}

void write_table_csv(const MeasurementTable& table, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_table_csv(table, out);
}

MeasurementTable read_table_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_table_csv(in, path.string());
}

void write_reference_csv(const ReferenceVolumes& refs, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  std::vector<std::string> keys;
  for (const auto& [k, v] : refs) keys.push_back(k);
  std::sort(keys.begin(), keys.end(), subject_less);
  out << "subject,volume_ml\n";
  for (const auto& k : keys) out << k << ',' << format_double(refs.at(k)) << '\n';
}

ReferenceVolumes read_reference_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvReader csv(in, path.string());
  csv.expect_header({"subject", "volume_ml"});
  ReferenceVolumes refs;
  std::vector<std::string> row;
  while (csv.next(row)) {
    const double v = csv.number(row, 1, "volume_ml");
    if (!(v > 0.0)) throw FormatError(csv.where() + ": reference volume must be > 0");
    if (!refs.emplace(row[0], v).second) throw FormatError(csv.where() + ": duplicate subject " + row[0]);
  }
  return refs;
}

}  // namespace thyrovol::obstats
