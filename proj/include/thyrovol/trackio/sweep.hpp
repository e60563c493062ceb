#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "thyrovol/core/geometry.hpp"

namespace thyrovol::trackio {

// One 6-DoF tracking sample. The quaternion is normalized on construction.
class TimedPose {
 public:
  TimedPose(double t, const Quat& q, const Vec3& p);
  TimedPose(double t, const RigidTransform& pose) : TimedPose(t, pose.rotation, pose.translation) {}

  double t() const { return t_; }
  const RigidTransform& pose() const { return pose_; }
  const Quat& q() const { return pose_.rotation; }
  const Vec3& p() const { return pose_.translation; }

 private:
  double t_;
  RigidTransform pose_;
};

// 8-bit grayscale ultrasound frame; intensity(x, y) = pixel / 255 lies in [0,1].
struct Frame {
  double t = 0.0;
  int width = 0;
  int height = 0;
  double spacing_x = 1.0;  // mm per column
  double spacing_y = 1.0;  // mm per row
  std::vector<std::uint8_t> pixels;

  float intensity(int x, int y) const {
    return static_cast<float>(pixels[static_cast<std::size_t>(y) * width + x]) / 255.0f;
  }
  // Image-plane position of pixel (col, row), z = 0.
  Vec3 plane_position(int col, int row) const { return {col * spacing_x, row * spacing_y, 0.0}; }

  void validate() const;
};

// Quantizes an intensity in [0,1] to the stored 8-bit level.
std::uint8_t quantize_intensity(double v);

struct Calibration {
  RigidTransform image_to_sensor;
};

enum class Lobe { Left, Right };

const char* to_string(Lobe lobe);
Lobe parse_lobe(const std::string& s);

struct SweepMeta {
  std::string subject_id = "0";
  int observer_id = 1;
  int repeat_index = 1;
  Lobe lobe = Lobe::Right;
  double nominal_frame_rate = 89.0;
  double nominal_pose_rate = 80.0;
};

struct Sweep {
  std::vector<Frame> frames;
  std::vector<TimedPose> poses;
  Calibration calibration;
  SweepMeta meta;

  // Checks non-emptiness, shared frame geometry and strictly increasing pose
  // timestamps. Throws DataError / FormatError.
  void validate() const;
};

struct SyncedFrame {
  std::reference_wrapper<const Frame> frame;
  RigidTransform image_to_world;
};

// Pose at time t. Translation is linearly interpolated and rotation is slerped
// along the shortest arc between the bracketing samples. A timestamp that hits
// a sample exactly returns that sample unchanged.
RigidTransform interpolate_pose(std::span<const TimedPose> poses, double t);

// One image_to_world transform per frame, in frame order:
// sensor_to_world(frame.t) ∘ calibration.image_to_sensor.
std::vector<SyncedFrame> synchronize(const Sweep& sweep);

// True when timestamps strictly increase.
bool strictly_increasing(std::span<const TimedPose> poses);

}  // namespace thyrovol::trackio
