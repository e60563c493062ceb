#include "thyrovol/phantomsim/sweep_sim.hpp"

#include <cmath>
#include <random>

#include "thyrovol/core/error.hpp"

namespace thyrovol::phantomsim {

namespace {

Quat rotation_vector_deg(const Vec3& v) {
  const double deg = v.norm();
  if (deg == 0.0) return Quat::Identity();
  return axis_angle_deg(v / deg, deg);
}

}  // namespace

void Trajectory::validate() const {
  if (!(duration > 0.0) || !std::isfinite(duration)) throw ConfigError("sweep duration must be > 0");
  if (!start.allFinite() || !velocity.allFinite()) throw ConfigError("trajectory must be finite");
}

void ProbeSettings::validate() const {
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) throw ConfigError("frame_rate must be > 0");
  if (!(pose_rate > 0.0) || !std::isfinite(pose_rate)) throw ConfigError("pose_rate must be > 0");
  if (width < 2 || height < 2) throw ConfigError("probe image must be at least 2x2 pixels");
  if (!(pixel_spacing > 0.0)) throw ConfigError("pixel_spacing must be > 0");
}

void SweepProtocol::validate() const {
  probe.validate();
  if (!(speed > 0.0)) throw ConfigError("sweep speed must be > 0");
  if (!(margin >= 0.0)) throw ConfigError("sweep margin must be >= 0");
}

Trajectory plan_sweep(const LobeSpec& lobe, const SweepProtocol& protocol) {
  protocol.validate();
  lobe.validate();
  // Extent along z of the (possibly rotated) bounding box of the lobe.
  const Eigen::Matrix3d r = lobe.rotation.toRotationMatrix();
  double half_z = 0.0;
  for (int i = 0; i < 3; ++i) half_z += std::abs(r(2, i)) * lobe.semi_axes[i];
  const ProbeSettings& p = protocol.probe;
  Trajectory t;
  t.start = Vec3(lobe.center.x() - 0.5 * (p.width - 1) * p.pixel_spacing,
                 lobe.center.y() - 0.5 * (p.height - 1) * p.pixel_spacing, lobe.center.z() - half_z - protocol.margin);
  t.velocity = Vec3(0.0, 0.0, protocol.speed);
  t.duration = 2.0 * (half_z + protocol.margin) / protocol.speed;
  return t;
}

SimulatedSweep simulate_sweep(const PhantomField& field, const Trajectory& planned, const ObserverModel& observer,
                              const ProbeSettings& probe) {
  planned.validate();
  probe.validate();
  observer.validate();

  // Independent streams so switching one noise source off leaves the others
  // unchanged.
  std::mt19937_64 jitter_rng(observer.seed ^ 0x6A09E667F3BCC909ull);
  std::mt19937_64 track_rng(observer.seed ^ 0xBB67AE8584CAA73Bull);
  std::normal_distribution<double> n01(0.0, 1.0);

  Vec3 offset, tilt;
  for (int i = 0; i < 3; ++i) offset[i] = observer.jitter_translation_mm * n01(jitter_rng);
  for (int i = 0; i < 3; ++i) tilt[i] = observer.jitter_rotation_deg * n01(jitter_rng);
  // Tilt about the image centre, not about pixel (0, 0).
  const Vec3 centre_local(0.5 * (probe.width - 1) * probe.pixel_spacing, 0.5 * (probe.height - 1) * probe.pixel_spacing,
                          0.0);
  const Quat q_tilt = rotation_vector_deg(tilt);
  auto actual = [&](double t) {
    const RigidTransform nominal = planned.at(t);
    RigidTransform a;
    a.rotation = (nominal.rotation * q_tilt).normalized();
    a.translation = nominal.apply(centre_local) - a.rotation * centre_local + offset;
    return a;
  };

  SimulatedSweep out;
  trackio::Sweep& sw = out.sweep;
  sw.meta.nominal_frame_rate = probe.frame_rate;
  sw.meta.nominal_pose_rate = probe.pose_rate;

  // Poses: actual path plus OU tracker drift (per-axis sd = RMS / sqrt 3).
  const long n_poses = static_cast<long>(std::ceil(planned.duration * probe.pose_rate - 1e-9)) + 1;
  const double dt = 1.0 / probe.pose_rate;
  const double rho = std::exp(-dt / observer.pose_noise_correlation_s);
  const double innov = std::sqrt(1.0 - rho * rho);
  const double sp = observer.pose_noise_mm / std::sqrt(3.0), sr = observer.pose_noise_deg / std::sqrt(3.0);
  Vec3 dp, dr;
  for (int i = 0; i < 3; ++i) dp[i] = sp * n01(track_rng);
  for (int i = 0; i < 3; ++i) dr[i] = sr * n01(track_rng);
  for (long j = 0; j < n_poses; ++j) {
    const double t = static_cast<double>(j) / probe.pose_rate;
    if (j > 0) {
      for (int i = 0; i < 3; ++i) dp[i] = rho * dp[i] + innov * sp * n01(track_rng);
      for (int i = 0; i < 3; ++i) dr[i] = rho * dr[i] + innov * sr * n01(track_rng);
    }
    const RigidTransform a = actual(t);
    out.true_poses.emplace_back(t, a);
    RigidTransform reported;
    reported.rotation = (a.rotation * rotation_vector_deg(dr)).normalized();
    reported.translation = a.translation + dp;
    sw.poses.emplace_back(t, reported);
  }

  // Frames along the actual path.
  const long n_frames = static_cast<long>(std::floor(planned.duration * probe.frame_rate + 1e-9));
  if (n_frames < 1) throw ConfigError("sweep too short for a single frame");
  sw.frames.reserve(static_cast<std::size_t>(n_frames));
  for (long i = 0; i < n_frames; ++i) {
    trackio::Frame f;
    f.t = static_cast<double>(i) / probe.frame_rate;
    f.width = probe.width;
    f.height = probe.height;
    f.spacing_x = probe.pixel_spacing;
    f.spacing_y = probe.pixel_spacing;
    f.pixels.resize(static_cast<std::size_t>(probe.width) * probe.height);
    const RigidTransform pose = trackio::interpolate_pose(out.true_poses, f.t);
    const Vec3 ex = pose.rotation * Vec3(probe.pixel_spacing, 0, 0);
    const Vec3 ey = pose.rotation * Vec3(0, probe.pixel_spacing, 0);
    for (int row = 0; row < probe.height; ++row) {
      Vec3 p = pose.translation + row * ey;
      for (int col = 0; col < probe.width; ++col, p += ex) {
        f.pixels[static_cast<std::size_t>(row) * probe.width + col] = trackio::quantize_intensity(field(p));
      }
    }
    sw.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace thyrovol::phantomsim
