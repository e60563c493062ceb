#include "thyrovol/obstats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "thyrovol/core/error.hpp"
#include "thyrovol/obstats/tdist.hpp"

namespace thyrovol::obstats {

void StatsConfig::validate() const {
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(loa_multiplier > 0.0)) throw ConfigError("limit-of-agreement multiplier must be > 0");
}

const char* to_string(VariabilityMethod m) {
  return m == VariabilityMethod::RangeRatio ? "range_ratio" : "cv";
}

VariabilityMethod parse_variability_method(const std::string& s) {
  if (s == "range_ratio") return VariabilityMethod::RangeRatio;
  if (s == "cv") return VariabilityMethod::CoefficientOfVariation;
  throw ConfigError("variability method must be range_ratio or cv, got '" + s + "'");
}

double mean(std::span<const double> v) {
  if (v.empty()) throw InsufficientDataError("mean of an empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) throw InsufficientDataError("standard deviation needs at least 2 values");
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

BlandAltmanResult bland_altman(std::span<const std::pair<double, double>> pairs, const StatsConfig& cfg) {
  cfg.validate();
  if (pairs.size() < 2) {
    throw InsufficientDataError("Bland-Altman analysis needs at least 2 pairs, got " + std::to_string(pairs.size()));
  }
  std::vector<double> d;
  d.reserve(pairs.size());
  BlandAltmanResult r;
  r.n = pairs.size();
  for (const auto& [a, b] : pairs) {
    d.push_back(a - b);
    r.points.push_back({0.5 * (a + b), a - b});
  }
  r.bias = mean(d);
  r.sd = sample_sd(d);
  r.loa_low = r.bias - cfg.loa_multiplier * r.sd;
  r.loa_high = r.bias + cfg.loa_multiplier * r.sd;
  return r;
}

BlandAltmanResult bland_altman(std::span<const double> a, std::span<const double> b, const StatsConfig& cfg) {
  if (a.size() != b.size()) throw InsufficientDataError("Bland-Altman samples differ in length");
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < a.size(); ++i) pairs.emplace_back(a[i], b[i]);
  return bland_altman(pairs, cfg);
}

TTestResult paired_t_test(std::span<const double> x, std::span<const double> y, const StatsConfig& cfg) {
  cfg.validate();
  if (x.size() != y.size()) {
    throw InsufficientDataError("paired t-test samples differ in length (" + std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw InsufficientDataError("paired t-test needs at least 2 pairs");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];

  TTestResult r;
  r.n = d.size();
  r.df = static_cast<double>(r.n - 1);
  r.mean_difference = mean(d);
  r.sd_difference = sample_sd(d);
  if (r.sd_difference == 0.0) {
    r.degenerate = true;
    if (r.mean_difference == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
      r.p = 0.0;
    }
  } else {
    r.t = r.mean_difference / (r.sd_difference / std::sqrt(static_cast<double>(r.n)));
    r.p = student_t_two_sided_p(r.t, r.df);
  }
  r.significant = r.p < cfg.alpha;
  return r;
}

double intraobserver_variability(std::span<const double> repeats, VariabilityMethod method) {
  if (repeats.size() < 2) throw InsufficientDataError("intraobserver variability needs at least 2 repeats");
  const double m = mean(repeats);
  if (!(m > 0.0)) throw DomainError("intraobserver variability needs a positive mean volume");
  if (method == VariabilityMethod::RangeRatio) {
    const auto [lo, hi] = std::minmax_element(repeats.begin(), repeats.end());
    return 100.0 * (*hi - *lo) / m;
  }
  return 100.0 * sample_sd(repeats) / m;
}

VariabilitySummary summarize_variability(const std::vector<std::vector<double>>& repeats_per_subject,
                                         VariabilityMethod method) {
  if (repeats_per_subject.empty()) throw InsufficientDataError("no subjects for intraobserver variability");
  VariabilitySummary s;
  s.method = method;
  for (const auto& r : repeats_per_subject) s.per_subject.push_back(intraobserver_variability(r, method));
  s.mean = mean(s.per_subject);
  s.sd = s.per_subject.size() > 1 ? sample_sd(s.per_subject) : 0.0;
  return s;
}

}  // namespace thyrovol::obstats
