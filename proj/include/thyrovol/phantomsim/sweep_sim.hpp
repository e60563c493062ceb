#pragma once

#include <vector>

#include "thyrovol/phantomsim/observer.hpp"
#include "thyrovol/phantomsim/phantom.hpp"
#include "thyrovol/trackio/sweep.hpp"

namespace thyrovol::phantomsim {

// Planned freehand sweep: a straight, constant-speed probe path. The image
// plane spans the probe's local x (lateral) and y (depth) axes; pixel (0, 0)
// sits at the pose translation.
struct Trajectory {
  Vec3 start = Vec3::Zero();
  Vec3 velocity = Vec3(0.0, 0.0, 25.0);  // mm/s
  Quat orientation = Quat::Identity();
  double duration = 2.0;  // s

  void validate() const;  // ConfigError
  RigidTransform at(double t) const { return {orientation, start + t * velocity}; }
};

struct ProbeSettings {
  int width = 36;             // pixels
  int height = 30;
  double pixel_spacing = 1.0;  // mm, square pixels
  double frame_rate = 89.0;    // Hz
  double pose_rate = 80.0;     // Hz

  void validate() const;  // ConfigError
};

// How an observer lines up a sweep over one lobe.
struct SweepProtocol {
  ProbeSettings probe;
  double speed = 25.0;   // mm/s
  double margin = 6.0;   // mm beyond the lobe ends along z

  void validate() const;
};

// Straight sweep along +z centred laterally on the lobe, from margin before
// its cranial end to margin past its caudal end.
Trajectory plan_sweep(const LobeSpec& lobe, const SweepProtocol& protocol);

struct SimulatedSweep {
  trackio::Sweep sweep;                     // frames + reported (noisy) poses
  std::vector<trackio::TimedPose> true_poses;  // same timestamps, noise-free
};

// Frames at frame_rate over [0, duration) (floor(duration * frame_rate)
// frames) sampled from the phantom along the jittered path; poses at
// pose_rate over [0, ceil(duration * pose_rate) / pose_rate], so the pose
// stream always brackets the last frame. ConfigError on bad rates.
SimulatedSweep simulate_sweep(const PhantomField& field, const Trajectory& planned, const ObserverModel& observer,
                              const ProbeSettings& probe);

}  // namespace thyrovol::phantomsim
