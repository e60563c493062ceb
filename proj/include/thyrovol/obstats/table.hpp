#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace thyrovol::obstats {

enum class Modality { Us2d, Us3d, Reference };

const char* to_string(Modality m);
Modality parse_modality(const std::string& s);

struct Measurement {
  std::string subject;
  int observer = 1;
  int repeat = 1;
  Modality modality = Modality::Us2d;
  std::string lobe = "total";  // left | right | total
  double volume_ml = 0.0;
};

// Long-form volume records; (subject, observer, repeat, modality, lobe) is unique
// and every volume is positive.
class MeasurementTable {
 public:
  // DataError on a duplicate key or a non-positive volume.
  void add(const Measurement& m);

  const std::vector<Measurement>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  std::optional<double> find(const std::string& subject, int observer, int repeat, Modality modality,
                             const std::string& lobe = "total") const;

  // Sorted distinct subject ids (numeric ids in numeric order).
  std::vector<std::string> subjects() const;
  std::vector<int> observers(Modality modality) const;
  std::vector<int> repeats(Modality modality) const;

 private:
  using Key = std::tuple<std::string, int, int, int, std::string>;
  std::vector<Measurement> records_;
  std::map<Key, std::size_t> index_;
};

// Header: subject,observer,repeat,modality,lobe,volume_ml
void write_table_csv(const MeasurementTable& table, std::ostream& out);
MeasurementTable read_table_csv(std::istream& in, const std::string& name);
void write_table_csv(const MeasurementTable& table, const std::filesystem::path& path);
MeasurementTable read_table_csv(const std::filesystem::path& path);

// Reference volume per subject. Header: subject,volume_ml
using ReferenceVolumes = std::map<std::string, double>;
void write_reference_csv(const ReferenceVolumes& refs, const std::filesystem::path& path);
ReferenceVolumes read_reference_csv(const std::filesystem::path& path);

// Orders subject ids numerically when both parse as integers.
bool subject_less(const std::string& a, const std::string& b);

}  // namespace thyrovol::obstats
