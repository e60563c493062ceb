#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "context.hpp"
#include "thyrovol/compounder/compound.hpp"
#include "thyrovol/compounder/volume_io.hpp"
#include "thyrovol/core/seed.hpp"
#include "thyrovol/core/text.hpp"
#include "thyrovol/neuralseg/checkpoint.hpp"
#include "thyrovol/neuralseg/segment.hpp"
#include "thyrovol/neuralseg/train.hpp"
#include "thyrovol/obstats/report.hpp"
#include "thyrovol/phantomsim/dataset.hpp"
#include "thyrovol/phantomsim/population.hpp"
#include "thyrovol/phantomsim/study.hpp"
#include "thyrovol/trackio/sweep_io.hpp"
#include "thyrovol/volumetry/volumetry.hpp"

namespace thyrovol::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

trackio::Lobe lobe_option(const std::string& s) {
  try {
    return trackio::parse_lobe(s);
  } catch (const FormatError&) {
    throw ConfigError("--lobe must be 'left' or 'right', got '" + s + "'");
  }
}

// Seed paths below the master seed. Renumbering them changes every output of
// a given --seed.
constexpr std::uint64_t kPopulationStream = 1;
constexpr std::uint64_t kStudyStream = 2;
constexpr std::uint64_t kTrainingPopulationStream = 3;
constexpr std::uint64_t kTrainingObserverStream = 4;
constexpr std::uint64_t kNetInitStream = 5;
constexpr std::uint64_t kShuffleStream = 6;

std::uint64_t lobe_index(trackio::Lobe lobe) { return lobe == trackio::Lobe::Right ? 0 : 1; }

std::string padded(int v, int width) {
  std::ostringstream s;
  s << std::setw(width) << std::setfill('0') << v;
  return s.str();
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  int subjects = 3;
  int observers = 3;
  int repeats = 3;
  int training = 0;
  std::string out;
  std::string model;
  std::string sweeps = "none";
  double voxel = 1.0;
  double axis_noise = 0.08;
  double pose_noise_mm = 1.40;
  double pose_noise_deg = 0.50;
  double jitter_mm = 2.0;
  double jitter_deg = 3.0;
  double threshold_fraction = phantomsim::kDefaultThresholdFraction;
  double correction_factor = 0.48;
};

void write_study_sweeps(Context& ctx, const std::vector<phantomsim::PhantomSpec>& subjects,
                        const phantomsim::StudyConfig& cfg, std::uint64_t study_seed, bool all) {
  const fs::path root = ctx.output("sweeps");
  const int observers = all ? cfg.observers : 1;
  const int repeats = all ? cfg.repeats : 1;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const int subject = static_cast<int>(s) + 1;
    const phantomsim::PhantomField field(subjects[s]);
    for (int o = 1; o <= observers; ++o) {
      for (int r = 1; r <= repeats; ++r) {
        for (trackio::Lobe lobe : {trackio::Lobe::Right, trackio::Lobe::Left}) {
          const auto plan = phantomsim::plan_sweep(subjects[s].lobe(lobe), cfg.protocol);
          auto sim = phantomsim::simulate_sweep(
              field, plan, phantomsim::sweep_observer(cfg, study_seed, subject, o, r, lobe), cfg.protocol.probe);
          sim.sweep.meta.subject_id = std::to_string(subject);
          sim.sweep.meta.observer_id = o;
          sim.sweep.meta.repeat_index = r;
          sim.sweep.meta.lobe = lobe;
          const std::string name = "s" + std::to_string(subject) + "_o" + std::to_string(o) + "_r" +
                                   std::to_string(r) + "_" + trackio::to_string(lobe);
          trackio::write_sweep(sim.sweep, root / name);
        }
      }
    }
  }
}

void write_training_volumes(Context& ctx, int count, const phantomsim::StudyConfig& cfg) {
  const auto phantoms = phantomsim::generate_population(
      phantomsim::PopulationConfig{}, derive_seed(ctx.seed, {kTrainingPopulationStream}), count);
  const fs::path root = ctx.output("training");
  for (int p = 0; p < count; ++p) {
    const phantomsim::PhantomField field(phantoms[static_cast<std::size_t>(p)]);
    for (trackio::Lobe lobe : {trackio::Lobe::Right, trackio::Lobe::Left}) {
      phantomsim::ObserverModel obs = cfg.observer;
      obs.seed = derive_seed(ctx.seed, {kTrainingObserverStream, static_cast<std::uint64_t>(p), lobe_index(lobe)});
      const auto lv = phantomsim::labelled_volume(field, lobe, obs, cfg);
      const fs::path dir = root / ("p" + padded(p + 1, 3) + "_" + trackio::to_string(lobe));
      fs::create_directories(dir);
      compounder::write_volume(lv.image, dir);
      compounder::write_labels(lv.mask, dir);
      nlohmann::ordered_json meta;
      meta["lobe"] = trackio::to_string(lobe);
      meta["reference_ml"] = phantoms[static_cast<std::size_t>(p)].lobe(lobe).volume_ml();
      write_text(dir / "sample.json", meta.dump(2) + "\n");
    }
  }
}

CommandFn simulate_command(const std::shared_ptr<SimulateOptions>& o) {
  return [o](Context& ctx) {
    if (o->subjects < 1) throw ConfigError("--subjects must be >= 1");
    if (o->training < 0) throw ConfigError("--training must be >= 0");
    phantomsim::StudyConfig cfg;
    cfg.observers = o->observers;
    cfg.repeats = o->repeats;
    cfg.threads = ctx.threads;
    cfg.compounding.voxel_spacing = o->voxel;
    cfg.observer.axis_noise_sd = o->axis_noise;
    cfg.observer.pose_noise_mm = o->pose_noise_mm;
    cfg.observer.pose_noise_deg = o->pose_noise_deg;
    cfg.observer.jitter_translation_mm = o->jitter_mm;
    cfg.observer.jitter_rotation_deg = o->jitter_deg;
    cfg.threshold_fraction = o->threshold_fraction;
    cfg.volumetry.correction_factor = o->correction_factor;
    cfg.validate();

    phantomsim::Segmenter seg;
    if (!o->model.empty()) {
      ctx.input(o->model);
      seg = phantomsim::network_segmenter(neuralseg::read_checkpoint(fs::path(o->model)));
    }
    ctx.open_output_dir(o->out);

    const auto subjects =
        phantomsim::generate_population(phantomsim::PopulationConfig{}, derive_seed(ctx.seed, {kPopulationStream}),
                                        o->subjects);
    const std::uint64_t study_seed = derive_seed(ctx.seed, {kStudyStream});
    const auto result = phantomsim::run_study(subjects, cfg, study_seed, seg);
    obstats::write_table_csv(result.table, ctx.output("study.csv"));
    obstats::write_reference_csv(result.reference, ctx.output("reference.csv"));
    if (o->sweeps != "none") write_study_sweeps(ctx, subjects, cfg, study_seed, o->sweeps == "all");
    if (o->training > 0) write_training_volumes(ctx, o->training, cfg);
    ctx.out << "simulated " << o->subjects << " subjects x " << cfg.observers << " observers x " << cfg.repeats
            << " repeats into " << o->out << '\n';
  };
}

// ---------------------------------------------------------------- compound

struct CompoundOptions {
  std::string sweep;
  std::string out;
  double spacing = 0.5;
  std::string kernel = "trilinear";
  int hole_fill = 1;
  double padding = 2.0;
};

CommandFn compound_command(const std::shared_ptr<CompoundOptions>& o) {
  return [o](Context& ctx) {
    compounder::CompoundingConfig cc;
    cc.voxel_spacing = o->spacing;
    cc.splat_kernel = compounder::parse_kernel(o->kernel);
    cc.hole_fill_radius = o->hole_fill;
    cc.padding = o->padding;
    cc.threads = ctx.threads;
    cc.validate();
    ctx.input(o->sweep);
    const trackio::Sweep sweep = trackio::read_sweep(o->sweep);
    const VoxelGrid grid = compounder::compound(trackio::synchronize(sweep), cc);
    ctx.open_output_dir(o->out);
    ctx.output("volume.json");
    ctx.output("volume.raw");
    compounder::write_volume(grid, o->out);
    const auto& d = grid.geometry.dims;
    ctx.out << "compounded " << sweep.frames.size() << " frames into " << d[0] << 'x' << d[1] << 'x' << d[2]
            << " voxels\n";
  };
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::string data;
  std::string out;
  int epochs = 20;
  int batch_size = 4;
  double lr = 1e-5;
  double momentum = 0.9;
  std::string optimizer = "sgd";
  int channels = 16;
  int levels = 4;
  int kernel = 5;
  double dropout = 0.5;
  int canvas = 64;
  int slices = 5;
  double val_fraction = 0.2;
};

struct VolumeSample {
  std::string name;
  std::string group;  // phantom: the name up to the last '_'
  phantomsim::LabelledVolume volume;
};

std::vector<VolumeSample> read_training_dir(Context& ctx, const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("training data directory not found: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<VolumeSample> out;
  for (const auto& d : dirs) {
    const fs::path meta_path = d / "sample.json";
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(read_text(meta_path));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(meta_path.string() + ": " + e.what());
    }
    if (!meta.contains("lobe") || !meta["lobe"].is_string()) {
      throw FormatError(meta_path.string() + ": field 'lobe' missing or not a string");
    }
    VolumeSample s;
    s.name = d.filename().string();
    const auto cut = s.name.rfind('_');
    s.group = cut == std::string::npos ? s.name : s.name.substr(0, cut);
    s.volume.lobe = trackio::parse_lobe(meta["lobe"].get<std::string>());
    s.volume.image = compounder::read_volume(d);
    s.volume.mask = compounder::read_labels(d);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw EmptyInputError("no training volumes under " + root.string());
  ctx.input(root);
  return out;
}

CommandFn train_command(const std::shared_ptr<TrainOptions>& o) {
  return [o](Context& ctx) {
    if (!(o->val_fraction >= 0.0 && o->val_fraction < 1.0)) throw ConfigError("--val-fraction must lie in [0, 1)");
    neuralseg::ArchitectureSpec spec;
    spec.channels = o->channels;
    spec.num_encoders = o->levels;
    spec.num_decoders = o->levels;
    spec.kernel_size = o->kernel;
    spec.dropout = o->dropout;
    spec.input_size = o->canvas;
    spec.validate();
    neuralseg::TrainConfig tc;
    tc.epochs = o->epochs;
    tc.batch_size = o->batch_size;
    tc.learning_rate = o->lr;
    tc.momentum = o->momentum;
    tc.optimizer = neuralseg::parse_optimizer(o->optimizer);
    tc.seed = derive_seed(ctx.seed, {kShuffleStream});
    tc.validate();
    phantomsim::SliceSetConfig sc;
    sc.canvas = o->canvas;
    sc.slices_per_sweep = o->slices;
    sc.validate();

    const auto volumes = read_training_dir(ctx, o->data);
    std::vector<std::string> groups;
    for (const auto& v : volumes) {
      if (groups.empty() || groups.back() != v.group) groups.push_back(v.group);
    }
    // Whole phantoms go to validation, taken from the end of the sorted list.
    std::size_t n_val = static_cast<std::size_t>(std::lround(o->val_fraction * static_cast<double>(groups.size())));
    if (o->val_fraction > 0.0) n_val = std::clamp<std::size_t>(n_val, 1, groups.size() - 1);
    if (groups.size() < 2) n_val = 0;
    const std::size_t first_val = groups.size() - n_val;
    std::vector<neuralseg::TrainingSample> train_set, val_set;
    for (const auto& v : volumes) {
      const auto g = std::find(groups.begin(), groups.end(), v.group) - groups.begin();
      auto& dst = static_cast<std::size_t>(g) >= first_val ? val_set : train_set;
      const auto slices = phantomsim::slices_from_volume(v.volume, sc);
      dst.insert(dst.end(), slices.begin(), slices.end());
    }
    ctx.out << "training on " << train_set.size() << " slices, validating on " << val_set.size() << '\n';

    const auto result = neuralseg::train(
        neuralseg::Network(spec, derive_seed(ctx.seed, {kNetInitStream})), train_set, val_set, tc,
        [&ctx](const neuralseg::EpochMetrics& m) {
          ctx.out << "epoch " << m.epoch << " train_loss " << format_fixed(m.train_loss, 4) << " val_loss "
                  << format_fixed(m.val_loss, 4) << " val_dice " << format_fixed(m.val_dice, 4) << '\n';
        });
    ctx.open_output_dir(o->out);
    neuralseg::write_checkpoint(result.model, ctx.output("model.ckpt"));
    std::ostringstream metrics;
    neuralseg::write_metrics_csv(result.epochs, metrics);
    write_text(ctx.output("metrics.csv"), metrics.str());
    ctx.out << "kept epoch " << result.best_epoch << '\n';
  };
}

// ---------------------------------------------------------------- segment

struct SegmentOptions {
  std::string volume;
  std::string model;
  std::string lobe = "right";
  std::string out;
  int batch_size = 8;
};

CommandFn segment_command(const std::shared_ptr<SegmentOptions>& o) {
  return [o](Context& ctx) {
    neuralseg::SegmentOptions opt;
    opt.mirror = lobe_option(o->lobe) == trackio::Lobe::Left;
    if (o->batch_size < 1) throw ConfigError("--batch-size must be >= 1");
    opt.batch_size = o->batch_size;
    ctx.input(o->volume);
    ctx.input(o->model);
    const VoxelGrid grid = compounder::read_volume(o->volume);
    neuralseg::Network net = neuralseg::read_checkpoint(fs::path(o->model));
    const LabelVolume mask = neuralseg::segment_volume(net, grid, opt);
    ctx.open_output_dir(o->out);
    ctx.output("mask.json");
    ctx.output("mask.raw");
    compounder::write_labels(mask, o->out);
    ctx.out << "segmented " << volumetry::foreground_count(mask.data) << " voxels, "
            << format_fixed(volumetry::mask_volume(mask), 3) << " ml\n";
  };
}

// ---------------------------------------------------------------- volume

struct VolumeOptions {
  std::string method = "ellipsoid";
  std::string axes;
  std::string mask;
  std::string out;
  double correction_factor = 0.48;
};

volumetry::LobeAxes parse_axes(const std::string& s) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) throw ConfigError("--axes expects L,W,D in cm, got '" + s + "'");
  double v[3];
  for (int i = 0; i < 3; ++i) {
    std::size_t used = 0;
    try {
      v[i] = std::stod(parts[static_cast<std::size_t>(i)], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != parts[static_cast<std::size_t>(i)].size()) {
      throw ConfigError("--axes: '" + parts[static_cast<std::size_t>(i)] + "' is not a number");
    }
  }
  return {v[0], v[1], v[2]};
}

CommandFn volume_command(const std::shared_ptr<VolumeOptions>& o) {
  return [o](Context& ctx) {
    double ml = 0.0;
    if (o->method == "ellipsoid") {
      if (o->axes.empty()) throw ConfigError("--method ellipsoid needs --axes L,W,D");
      volumetry::VolumetryConfig vc;
      vc.correction_factor = o->correction_factor;
      ml = volumetry::ellipsoid_volume(parse_axes(o->axes), vc);
    } else if (o->method == "mask") {
      if (o->mask.empty()) throw ConfigError("--method mask needs --mask DIR");
      ctx.input(o->mask);
      ml = volumetry::mask_volume(compounder::read_labels(o->mask));
    } else {
      throw ConfigError("--method must be 'ellipsoid' or 'mask', got '" + o->method + "'");
    }
    std::ostringstream line;
    line << std::setprecision(12) << ml;
    ctx.out << line.str() << '\n';
    if (!o->out.empty()) {
      ctx.open_output_dir(o->out);
      write_text(ctx.output("volume.csv"), "method,volume_ml\n" + o->method + "," + format_double(ml) + "\n");
    }
  };
}

// ---------------------------------------------------------------- stats / report

struct StatsOptions {
  std::string table;
  std::string reference;
  std::string out;
  double alpha = 0.05;
  double loa = 1.96;
  std::string variability = "range_ratio";
};

obstats::StatsConfig stats_config(const StatsOptions& o) {
  obstats::StatsConfig c;
  c.alpha = o.alpha;
  c.loa_multiplier = o.loa;
  c.validate();
  return c;
}

std::vector<std::pair<int, int>> observer_pairs(const std::vector<int>& observers) {
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < observers.size(); ++i) {
    for (std::size_t j = i + 1; j < observers.size(); ++j) pairs.emplace_back(observers[i], observers[j]);
  }
  return pairs;
}

constexpr obstats::Modality kModalities[] = {obstats::Modality::Us2d, obstats::Modality::Us3d};

// Statistics errors do not know which file the numbers came from.
template <class F>
void with_table_context(const std::string& table, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    throw Error(e.kind(), table + ": " + e.what());
  }
}

std::optional<obstats::ReferenceVolumes> read_reference(Context& ctx, const std::string& path) {
  if (path.empty()) return std::nullopt;
  ctx.input(path);
  return obstats::read_reference_csv(fs::path(path));
}

std::vector<obstats::Comparison> study_comparisons(const obstats::MeasurementTable& table,
                                                   const std::optional<obstats::ReferenceVolumes>& refs,
                                                   const obstats::StatsConfig& sc, obstats::VariabilityMethod method) {
  std::vector<obstats::Comparison> rows;
  for (auto m : kModalities) {
    const auto obs = table.observers(m);
    if (obs.size() < 2) continue;
    const auto inter = obstats::interobserver_table(table, m, sc, observer_pairs(obs));
    rows.insert(rows.end(), inter.begin(), inter.end());
  }
  if (refs) {
    for (auto m : kModalities) {
      if (table.observers(m).empty()) continue;
      for (const auto& r : obstats::compare_to_reference(table, m, *refs, sc)) rows.push_back(r.comparison);
    }
  }
  for (auto m : kModalities) {
    if (table.repeats(m).size() < 2) continue;
    for (int obs : table.observers(m)) rows.push_back(obstats::intraobserver(table, m, obs, method, sc).repeats);
  }
  if (rows.empty()) throw InsufficientDataError("nothing to compare (one observer, one repeat, no reference)");
  return rows;
}

const char* modality_label(obstats::Modality m) { return m == obstats::Modality::Us2d ? "2D" : "3D"; }

// File name -> content. Nothing is written until all of it is computed.
std::map<std::string, std::string> report_files(Context& ctx, const obstats::MeasurementTable& table,
                                                const std::optional<obstats::ReferenceVolumes>& refs,
                                                const obstats::StatsConfig& sc, obstats::VariabilityMethod method) {
  std::map<std::string, std::string> files;
  if (table.repeats(obstats::Modality::Us2d).size() >= 2 && table.repeats(obstats::Modality::Us3d).size() >= 2) {
    std::vector<obstats::IntraobserverResult> intra[2];
    for (int mi = 0; mi < 2; ++mi) {
      const auto m = kModalities[mi];
      for (int obs : table.observers(m)) {
        intra[mi].push_back(obstats::intraobserver(table, m, obs, method, sc));
        const std::string title = "Intraobserver " + std::string(modality_label(m)) + " US, observer " +
                                  std::to_string(obs) + ": repeat 1 - repeat 2";
        files["fig6_intra_" + std::string(obstats::to_string(m)) + "_o" + std::to_string(obs) + ".svg"] =
            obstats::bland_altman_svg(intra[mi].back().repeats.agreement, title);
      }
    }
    std::ostringstream t1;
    obstats::write_intraobserver_table(intra[0], intra[1], sc, t1);
    files["table1_intraobserver.csv"] = t1.str();
  } else {
    ctx.err << "thyrovol report: note: fewer than two repeats, no intraobserver table\n";
  }

  std::vector<obstats::Comparison> inter[2];
  for (int mi = 0; mi < 2; ++mi) {
    const auto m = kModalities[mi];
    const auto obs = table.observers(m);
    if (obs.size() < 2) throw InsufficientDataError("interobserver comparison needs two observers");
    inter[mi] = obstats::interobserver_table(table, m, sc, observer_pairs(obs));
    for (const auto& c : inter[mi]) {
      files["fig7_" + c.name + ".svg"] =
          obstats::bland_altman_svg(c.agreement, "Interobserver " + std::string(modality_label(m)) + " US: " + c.name);
    }
  }
  std::ostringstream t2;
  obstats::write_interobserver_table(inter[0], inter[1], t2);
  files["table2_interobserver.csv"] = t2.str();

  if (refs) {
    std::ostringstream t3;
    obstats::write_reference_table(obstats::compare_to_reference(table, obstats::Modality::Us2d, *refs, sc),
                                   obstats::compare_to_reference(table, obstats::Modality::Us3d, *refs, sc), t3);
    files["table3_reference.csv"] = t3.str();
  }
  return files;
}

CommandFn stats_command(const std::shared_ptr<StatsOptions>& o) {
  return [o](Context& ctx) {
    const obstats::StatsConfig sc = stats_config(*o);
    const auto method = obstats::parse_variability_method(o->variability);
    ctx.input(o->table);
    const auto table = obstats::read_table_csv(fs::path(o->table));
    const auto refs = read_reference(ctx, o->reference);
    std::vector<obstats::Comparison> rows;
    with_table_context(o->table, [&] { rows = study_comparisons(table, refs, sc, method); });
    ctx.open_output_dir(o->out);
    std::ostringstream csv;
    obstats::write_comparisons_csv(rows, csv);
    write_text(ctx.output("study_stats.csv"), csv.str());
    ctx.out << "wrote " << rows.size() << " comparisons\n";
  };
}

CommandFn report_command(const std::shared_ptr<StatsOptions>& o) {
  return [o](Context& ctx) {
    const obstats::StatsConfig sc = stats_config(*o);
    const auto method = obstats::parse_variability_method(o->variability);
    ctx.input(o->table);
    const auto table = obstats::read_table_csv(fs::path(o->table));
    const auto refs = read_reference(ctx, o->reference);
    std::map<std::string, std::string> files;
    with_table_context(o->table, [&] { files = report_files(ctx, table, refs, sc, method); });
    ctx.open_output_dir(o->out);
    for (const auto& [name, text] : files) write_text(ctx.output(name), text);
    ctx.out << "wrote " << files.size() << " report files to " << o->out << '\n';
  };
}

}  // namespace

CommandFn add_simulate(CLI::App& app) {
  auto o = std::make_shared<SimulateOptions>();
  auto* c = app.add_subcommand("simulate", "Simulate a phantom study: 2D caliper and 3D sweep volumes per observer");
  c->add_option("--out", o->out, "Output directory")->required();
  c->add_option("--subjects", o->subjects, "Number of subjects");
  c->add_option("--observers", o->observers, "Virtual observers");
  c->add_option("--repeats", o->repeats, "Repeats per observer");
  c->add_option("--model", o->model, "Network checkpoint for 3D segmentation (default: intensity threshold)");
  c->add_option("--voxel", o->voxel, "Compounding voxel spacing, mm");
  c->add_option("--axis-noise", o->axis_noise, "2D caliper error sd, relative");
  c->add_option("--pose-noise-mm", o->pose_noise_mm, "Tracker position RMS, mm");
  c->add_option("--pose-noise-deg", o->pose_noise_deg, "Tracker rotation RMS, degrees");
  c->add_option("--jitter-mm", o->jitter_mm, "Sweep placement sd per axis, mm");
  c->add_option("--jitter-deg", o->jitter_deg, "Sweep tilt sd per axis, degrees");
  c->add_option("--threshold-fraction", o->threshold_fraction, "Threshold segmenter level between background and thyroid");
  c->add_option("--correction-factor", o->correction_factor, "Ellipsoid factor for the 2D volumes");
  c->add_option("--sweeps", o->sweeps, "Write sweeps: none, first (observer 1, repeat 1) or all")
      ->check(CLI::IsMember({"none", "first", "all"}));
  c->add_option("--training", o->training, "Also write labelled volumes of this many separate training phantoms");
  return simulate_command(o);
}

CommandFn add_compound(CLI::App& app) {
  auto o = std::make_shared<CompoundOptions>();
  auto* c = app.add_subcommand("compound", "Compound a tracked sweep into a voxel volume");
  c->add_option("--sweep", o->sweep, "Sweep directory")->required();
  c->add_option("--out", o->out, "Output directory")->required();
  c->add_option("--spacing", o->spacing, "Voxel spacing, mm");
  c->add_option("--kernel", o->kernel, "Splat kernel: trilinear or nearest");
  c->add_option("--hole-fill", o->hole_fill, "Hole filling radius, voxels");
  c->add_option("--padding", o->padding, "Margin around the sweep, mm");
  return compound_command(o);
}

CommandFn add_train(CLI::App& app) {
  auto o = std::make_shared<TrainOptions>();
  auto* c = app.add_subcommand("train", "Train the segmentation network on labelled volumes from simulate --training");
  c->add_option("--data", o->data, "Directory of labelled volumes")->required();
  c->add_option("--out", o->out, "Output directory")->required();
  c->add_option("--epochs", o->epochs, "Epochs");
  c->add_option("--batch-size", o->batch_size, "Mini-batch size");
  c->add_option("--lr", o->lr, "Learning rate");
  c->add_option("--momentum", o->momentum, "SGD momentum");
  c->add_option("--optimizer", o->optimizer, "sgd or adam");
  c->add_option("--channels", o->channels, "Feature maps per layer");
  c->add_option("--levels", o->levels, "Encoder and decoder blocks");
  c->add_option("--kernel", o->kernel, "Convolution kernel size");
  c->add_option("--dropout", o->dropout, "Channel dropout rate");
  c->add_option("--canvas", o->canvas, "Network input edge, pixels");
  c->add_option("--slices", o->slices, "Axial slices per volume");
  c->add_option("--val-fraction", o->val_fraction, "Share of phantoms held out for validation");
  return train_command(o);
}

CommandFn add_segment(CLI::App& app) {
  auto o = std::make_shared<SegmentOptions>();
  auto* c = app.add_subcommand("segment", "Segment a compounded volume with a trained network");
  c->add_option("--volume", o->volume, "Volume directory")->required();
  c->add_option("--model", o->model, "Network checkpoint")->required();
  c->add_option("--out", o->out, "Output directory")->required();
  c->add_option("--lobe", o->lobe, "right or left; left volumes are mirrored for inference");
  c->add_option("--batch-size", o->batch_size, "Slices per inference batch");
  return segment_command(o);
}

CommandFn add_volume(CLI::App& app) {
  auto o = std::make_shared<VolumeOptions>();
  auto* c = app.add_subcommand("volume", "Lobe volume in ml from caliper axes or a mask");
  c->add_option("--method", o->method, "ellipsoid or mask");
  c->add_option("--axes", o->axes, "Length,width,depth in cm");
  c->add_option("--mask", o->mask, "Mask directory");
  c->add_option("--correction-factor", o->correction_factor, "Ellipsoid correction factor");
  c->add_option("--out", o->out, "Also write volume.csv and a manifest here");
  return volume_command(o);
}

namespace {

void add_stats_options(CLI::App* c, StatsOptions& o) {
  c->add_option("--table", o.table, "Measurement table CSV")->required();
  c->add_option("--reference", o.reference, "Reference volume CSV");
  c->add_option("--out", o.out, "Output directory")->required();
  c->add_option("--alpha", o.alpha, "Significance level");
  c->add_option("--loa", o.loa, "Limits of agreement multiplier");
  c->add_option("--variability", o.variability, "Intraobserver variability: range_ratio or cv");
}

}  // namespace

CommandFn add_stats(CLI::App& app) {
  auto o = std::make_shared<StatsOptions>();
  add_stats_options(app.add_subcommand("stats", "Bland-Altman and paired t-tests for a measurement table"), *o);
  return stats_command(o);
}

CommandFn add_report(CLI::App& app) {
  auto o = std::make_shared<StatsOptions>();
  add_stats_options(app.add_subcommand("report", "Variability tables as CSV and Bland-Altman plots as SVG"), *o);
  return report_command(o);
}

}  // namespace thyrovol::cli
