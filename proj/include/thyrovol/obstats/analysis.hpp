#pragma once

#include <string>
#include <utility>
#include <vector>

#include "thyrovol/obstats/stats.hpp"
#include "thyrovol/obstats/table.hpp"

namespace thyrovol::obstats {

// One row of the comparison CSV.
struct Comparison {
  std::string name;
  BlandAltmanResult agreement;
  TTestResult test;
};

// Observer a minus observer b on the first repeat of every subject.
// MissingData lists every absent (subject, observer) cell.
Comparison compare_observers(const MeasurementTable& table, Modality modality, int a, int b,
                             const StatsConfig& cfg = {});

// Pairs (1,2), (1,3), (2,3) unless given explicitly.
std::vector<Comparison> interobserver_table(const MeasurementTable& table, Modality modality,
                                            const StatsConfig& cfg = {},
                                            const std::vector<std::pair<int, int>>& pairs = {{1, 2}, {1, 3}, {2, 3}});

struct ReferenceComparison {
  int observer = 0;
  double volume_mean = 0.0;
  double volume_sd = 0.0;
  double reference_mean = 0.0;
  double reference_sd = 0.0;
  Comparison comparison;  // observer minus reference
};

// First-repeat volumes of each observer present against the reference.
std::vector<ReferenceComparison> compare_to_reference(const MeasurementTable& table, Modality modality,
                                                      const ReferenceVolumes& refs, const StatsConfig& cfg = {});

struct IntraobserverResult {
  int observer = 0;
  Modality modality = Modality::Us2d;
  VariabilitySummary variability;
  Comparison repeats;  // repeat 1 minus repeat 2
};

// Uses every repeat recorded for the observer; each subject must carry the
// same repeat set.
IntraobserverResult intraobserver(const MeasurementTable& table, Modality modality, int observer,
                                  VariabilityMethod method, const StatsConfig& cfg = {});

// Paired t-test of per-subject variability percentages, 2D minus 3D.
TTestResult compare_modality_variability(const IntraobserverResult& us2d, const IntraobserverResult& us3d,
                                         const StatsConfig& cfg = {});

}  // namespace thyrovol::obstats
