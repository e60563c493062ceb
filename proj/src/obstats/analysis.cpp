#include "thyrovol/obstats/analysis.hpp"

#include "thyrovol/core/error.hpp"

namespace thyrovol::obstats {

namespace {

std::string modality_tag(Modality m) { return to_string(m); }

}  // namespace

Comparison compare_observers(const MeasurementTable& table, Modality modality, int a, int b,
                             const StatsConfig& cfg) {
  std::vector<double> va, vb;
  std::string missing;
  for (const auto& s : table.subjects()) {
    const auto xa = table.find(s, a, 1, modality);
    const auto xb = table.find(s, b, 1, modality);
    if (!xa) missing += " (" + s + ", " + std::to_string(a) + ")";
    if (!xb) missing += " (" + s + ", " + std::to_string(b) + ")";
    if (xa && xb) {
      va.push_back(*xa);
      vb.push_back(*xb);
    }
  }
  if (!missing.empty()) {
    throw MissingDataError(std::string("missing ") + to_string(modality) + " first-repeat volumes for (subject, observer):" +
                           missing);
  }
  Comparison c;
  c.name = "inter_" + modality_tag(modality) + "_" + std::to_string(a) + "_" + std::to_string(b);
  c.agreement = bland_altman(va, vb, cfg);
  c.test = paired_t_test(va, vb, cfg);
  return c;
}

std::vector<Comparison> interobserver_table(const MeasurementTable& table, Modality modality, const StatsConfig& cfg,
                                            const std::vector<std::pair<int, int>>& pairs) {
  std::vector<Comparison> out;
  for (const auto& [a, b] : pairs) out.push_back(compare_observers(table, modality, a, b, cfg));
  return out;
}

std::vector<ReferenceComparison> compare_to_reference(const MeasurementTable& table, Modality modality,
                                                      const ReferenceVolumes& refs, const StatsConfig& cfg) {
  std::vector<ReferenceComparison> out;
  const auto subjects = table.subjects();
  std::string missing_ref;
  for (const auto& s : subjects) {
    if (!refs.count(s)) missing_ref += " " + s;
  }
  if (!missing_ref.empty()) throw MissingDataError("no reference volume for subject(s):" + missing_ref);

  for (int obs : table.observers(modality)) {
    std::vector<double> v, r;
    std::string missing;
    for (const auto& s : subjects) {
      const auto x = table.find(s, obs, 1, modality);
      if (!x) {
        missing += " " + s;
        continue;
      }
      v.push_back(*x);
      r.push_back(refs.at(s));
    }
    if (!missing.empty()) {
      throw MissingDataError(std::string("observer ") + std::to_string(obs) + " has no first-repeat " +
                             to_string(modality) + " volume for subject(s):" + missing);
    }
    ReferenceComparison rc;
    rc.observer = obs;
    rc.volume_mean = mean(v);
    rc.volume_sd = sample_sd(v);
    rc.reference_mean = mean(r);
    rc.reference_sd = sample_sd(r);
    rc.comparison.name = "ref_" + modality_tag(modality) + "_" + std::to_string(obs);
    rc.comparison.agreement = bland_altman(v, r, cfg);
    rc.comparison.test = paired_t_test(v, r, cfg);
    out.push_back(std::move(rc));
  }
  return out;
}

IntraobserverResult intraobserver(const MeasurementTable& table, Modality modality, int observer,
                                  VariabilityMethod method, const StatsConfig& cfg) {
  const auto reps = table.repeats(modality);
  std::vector<std::vector<double>> per_subject;
  std::vector<double> r1, r2;
  std::string missing;
  for (const auto& s : table.subjects()) {
    std::vector<double> v;
    for (int rep : reps) {
      const auto x = table.find(s, observer, rep, modality);
      if (!x) {
        missing += " (" + s + ", repeat " + std::to_string(rep) + ")";
        continue;
      }
      v.push_back(*x);
    }
    if (v.size() == reps.size() && v.size() >= 2) {
      r1.push_back(v[0]);
      r2.push_back(v[1]);
    }
    per_subject.push_back(std::move(v));
  }
  if (!missing.empty()) {
    throw MissingDataError(std::string("observer ") + std::to_string(observer) + " lacks " + to_string(modality) +
                           " volumes for" + missing);
  }
  IntraobserverResult res;
  res.observer = observer;
  res.modality = modality;
  res.variability = summarize_variability(per_subject, method);
  res.repeats.name = "intra_" + modality_tag(modality) + "_" + std::to_string(observer);
  res.repeats.agreement = bland_altman(r1, r2, cfg);
  res.repeats.test = paired_t_test(r1, r2, cfg);
  return res;
}

TTestResult compare_modality_variability(const IntraobserverResult& us2d, const IntraobserverResult& us3d,
                                         const StatsConfig& cfg) {
  return paired_t_test(us2d.variability.per_subject, us3d.variability.per_subject, cfg);
}

}  // namespace thyrovol::obstats
