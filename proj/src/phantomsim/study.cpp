#include "thyrovol/phantomsim/study.hpp"

#include <thread>

#include "thyrovol/core/error.hpp"
#include "thyrovol/core/seed.hpp"
#include "thyrovol/neuralseg/segment.hpp"

namespace thyrovol::phantomsim {

namespace {

constexpr int kModality2d = 2;
constexpr int kModality3d = 3;

int lobe_code(trackio::Lobe lobe) { return lobe == trackio::Lobe::Right ? 0 : 1; }

struct SubjectRows {
  std::vector<obstats::Measurement> rows;
};

}  // namespace

StudyConfig::StudyConfig() { compounding.voxel_spacing = 1.0; }

void StudyConfig::validate() const {
  if (observers < 1) throw ConfigError("observers must be >= 1");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0)) throw ConfigError("threshold_fraction must lie in (0, 1)");
  observer.validate();
  protocol.validate();
  compounding.validate();
  volumetry.validate();
}

std::uint64_t measurement_seed(std::uint64_t seed, int subject, int observer, int repeat, int modality, int lobe) {
  return derive_seed(seed, {static_cast<std::uint64_t>(subject), static_cast<std::uint64_t>(observer),
                            static_cast<std::uint64_t>(repeat), static_cast<std::uint64_t>(modality),
                            static_cast<std::uint64_t>(lobe)});
}

ObserverModel sweep_observer(const StudyConfig& cfg, std::uint64_t seed, int subject, int observer, int repeat,
                             trackio::Lobe lobe) {
  ObserverModel obs = cfg.observer;
  obs.seed = measurement_seed(seed, subject, observer, repeat, kModality3d, lobe_code(lobe));
  return obs;
}

LabelVolume threshold_segment(const VoxelGrid& grid, double level) {
  LabelVolume out(grid.geometry, 0);
  for (std::size_t i = 0; i < grid.data.size(); ++i) out.data[i] = grid.data[i] >= level ? 1 : 0;
  return out;
}

Segmenter threshold_segmenter(const PhantomSpec& appearance, double fraction) {
  const double level = appearance.background_level + fraction * (appearance.thyroid_level() - appearance.background_level);
  return [level](const VoxelGrid& grid, trackio::Lobe) { return threshold_segment(grid, level); };
}

Segmenter network_segmenter(const neuralseg::Network& net) {
  return [net](const VoxelGrid& grid, trackio::Lobe lobe) {
    neuralseg::Network local = net;
    neuralseg::SegmentOptions opt;
    opt.mirror = lobe == trackio::Lobe::Left;
    return neuralseg::segment_volume(local, grid, opt);
  };
}

double measure_lobe_3d(const PhantomField& field, trackio::Lobe lobe, const ObserverModel& observer,
                       const StudyConfig& cfg, const Segmenter& segment) {
  const Trajectory plan = plan_sweep(field.spec().lobe(lobe), cfg.protocol);
  const SimulatedSweep sim = simulate_sweep(field, plan, observer, cfg.protocol.probe);
  const auto synced = trackio::synchronize(sim.sweep);
  compounder::CompoundingConfig cc = cfg.compounding;
  cc.threads = 1;
  const VoxelGrid grid = compounder::compound(synced, cc);
  return volumetry::mask_volume(segment(grid, lobe));
}

StudyResult run_study(const std::vector<PhantomSpec>& subjects, const StudyConfig& cfg, std::uint64_t seed,
                      const Segmenter& segment) {
  cfg.validate();
  if (subjects.empty()) throw EmptyInputError("study needs at least one subject");

  std::vector<SubjectRows> per_subject(subjects.size());
  auto run_subject = [&](std::size_t s) {
    const PhantomSpec& spec = subjects[s];
    const Segmenter seg = segment ? segment : threshold_segmenter(spec, cfg.threshold_fraction);
    const PhantomField field(spec);
    const std::string id = std::to_string(s + 1);
    const int subject = static_cast<int>(s) + 1;
    for (int o = 1; o <= cfg.observers; ++o) {
      for (int r = 1; r <= cfg.repeats; ++r) {
        try {
          ObserverModel obs = cfg.observer;
          obs.seed = measurement_seed(seed, subject, o, r, kModality2d, 0);
          const auto axes = virtual_observer_2d(spec, obs);
          const double v2d = volumetry::ellipsoid_volume(axes[0], cfg.volumetry) +
                             volumetry::ellipsoid_volume(axes[1], cfg.volumetry);
          double v3d = 0.0;
          for (trackio::Lobe lobe : {trackio::Lobe::Right, trackio::Lobe::Left}) {
            v3d += measure_lobe_3d(field, lobe, sweep_observer(cfg, seed, subject, o, r, lobe), cfg, seg);
          }
          per_subject[s].rows.push_back({id, o, r, obstats::Modality::Us2d, "total", v2d});
          per_subject[s].rows.push_back({id, o, r, obstats::Modality::Us3d, "total", v3d});
        } catch (const Error& e) {
          throw Error(e.kind(), "subject " + id + " observer " + std::to_string(o) + " repeat " + std::to_string(r) +
                                    ": " + e.what());
        }
      }
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), subjects.size());
  if (workers <= 1) {
    for (std::size_t s = 0; s < subjects.size(); ++s) run_subject(s);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t s = w; s < subjects.size(); s += workers) run_subject(s);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  StudyResult result;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    result.reference[std::to_string(s + 1)] = subjects[s].total_volume_ml();
    for (const auto& m : per_subject[s].rows) result.table.add(m);
  }
  return result;
}

}  // namespace thyrovol::phantomsim
