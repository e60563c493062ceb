#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace thyrovol::obstats {

struct StatsConfig {
  double alpha = 0.05;
  double loa_multiplier = 1.96;

  void validate() const;  // ConfigError
};

struct BlandAltmanPoint {
  double mean = 0.0;
  double difference = 0.0;
};

struct BlandAltmanResult {
  std::size_t n = 0;
  double bias = 0.0;
  double sd = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
  std::vector<BlandAltmanPoint> points;
};

struct TTestResult {
  std::size_t n = 0;
  double mean_difference = 0.0;
  double sd_difference = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  bool significant = false;
  // Set when sd(d) = 0. With mean(d) = 0 the test reports t = 0, p = 1;
  // otherwise t = +-inf, p = 0.
  bool degenerate = false;
};

enum class VariabilityMethod { RangeRatio, CoefficientOfVariation };

const char* to_string(VariabilityMethod m);
VariabilityMethod parse_variability_method(const std::string& s);

double mean(std::span<const double> v);
// Sample standard deviation (n - 1). InsufficientData for n < 2.
double sample_sd(std::span<const double> v);

// d_i = a_i - b_i. InsufficientData for fewer than 2 pairs.
BlandAltmanResult bland_altman(std::span<const std::pair<double, double>> pairs, const StatsConfig& cfg = {});
BlandAltmanResult bland_altman(std::span<const double> a, std::span<const double> b, const StatsConfig& cfg = {});

// Two-sided paired t-test on d = x - y. InsufficientData for n < 2 or
// unequal lengths.
TTestResult paired_t_test(std::span<const double> x, std::span<const double> y, const StatsConfig& cfg = {});

// Percent spread of one subject's repeat volumes.
//   RangeRatio: 100 * (max - min) / mean
//   CoefficientOfVariation: 100 * sd / mean
double intraobserver_variability(std::span<const double> repeats, VariabilityMethod method);

struct VariabilitySummary {
  VariabilityMethod method = VariabilityMethod::RangeRatio;
  std::vector<double> per_subject;
  double mean = 0.0;
  double sd = 0.0;
};

// Per-subject percentages plus their mean and sample SD (sd = 0 for a single
// subject).
VariabilitySummary summarize_variability(const std::vector<std::vector<double>>& repeats_per_subject,
                                         VariabilityMethod method);

}  // namespace thyrovol::obstats
