#pragma once

#include <utility>

namespace leanloc {

inline constexpr double kDefaultCameraHeight = 1.7;

/// 4-DoF camera pose: ground position, yaw and pitch at fixed height, no roll.
/// Angles in degrees; yaw is kept in [0, 360).
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double z = kDefaultCameraHeight;
  double yaw = 0.0;
  double pitch = 0.0;

  bool operator==(const Pose&) const = default;
};

double normalize_yaw(double yaw_deg);
Pose make_pose(double x, double y, double yaw_deg, double pitch_deg, double z = kDefaultCameraHeight);

struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const;
  double dot(const Quaternion& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
  Quaternion operator-() const { return {-w, -x, -y, -z}; }
  bool operator==(const Quaternion&) const = default;
};

/// w > 0, or w == 0 and the first nonzero component positive.
Quaternion canonical(const Quaternion& q);
Quaternion normalized(const Quaternion& q);

/// Hamilton product a * b (apply b, then a).
Quaternion multiply(const Quaternion& a, const Quaternion& b);

// Convention: world z is up. At yaw = pitch = 0 the camera looks along +x
// with +y to its left. Yaw turns about world up (counter-clockwise seen from
// above), then pitch turns about the camera's right axis, positive upward.
Quaternion yaw_pitch_to_quat(double yaw_deg, double pitch_deg);

struct YawPitch {
  double yaw = 0.0;
  double pitch = 0.0;
};

/// Inverse of yaw_pitch_to_quat for roll-free rotations. Sign invariant;
/// non-unit input is normalized. At |pitch| = 90 the yaw is reported as 0.
YawPitch quat_to_yaw_pitch(const Quaternion& q);

/// Rotation angle between two orientations, 2 acos |<a, b>|, in degrees.
double quat_angular_distance(const Quaternion& a, const Quaternion& b);

/// Rectangular area of interest on the ground plane.
struct Aoi {
  double x0 = 0.0;
  double y0 = 0.0;
  double width = 0.0;
  double height = 0.0;

  void validate() const;
  bool contains(double x, double y) const {
    return x >= x0 && x <= x0 + width && y >= y0 && y <= y0 + height;
  }
  bool operator==(const Aoi&) const = default;
};

/// Network target: AOI-normalized position plus orientation quaternion
/// (q1 = w). Predicted labels may be off-unit and outside [0, 1].
struct PoseLabel {
  double x = 0.0;
  double y = 0.0;
  double q1 = 1.0, q2 = 0.0, q3 = 0.0, q4 = 0.0;

  Quaternion quat() const { return {q1, q2, q3, q4}; }
  bool operator==(const PoseLabel&) const = default;
};

PoseLabel pose_to_label(const Pose& pose, const Aoi& aoi);

/// Extrapolates linearly outside the AOI; z comes from `height`.
Pose label_to_pose(const PoseLabel& label, const Aoi& aoi, double height = kDefaultCameraHeight);

}  // namespace leanloc
