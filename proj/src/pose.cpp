#include "leanloc/pose.hpp"

#include <algorithm>
#include <cmath>

#include "leanloc/error.hpp"

namespace leanloc {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kRadToDeg = 180.0 / kPi;

}  // namespace

double normalize_yaw(double yaw_deg) {
  double y = std::fmod(yaw_deg, 360.0);
  if (y < 0.0) y += 360.0;
  // fmod of a tiny negative value can round up to exactly 360.
  if (y >= 360.0) y = 0.0;
  return y;
}

Pose make_pose(double x, double y, double yaw_deg, double pitch_deg, double z) {
  return Pose{x, y, z, normalize_yaw(yaw_deg), pitch_deg};
}

double Quaternion::norm() const { return std::sqrt(dot(*this)); }

Quaternion canonical(const Quaternion& q) {
  const double c[4] = {q.w, q.x, q.y, q.z};
  for (double v : c) {
    if (v > 0.0) return q;
    if (v < 0.0) return -q;
  }
  return q;
}

Quaternion normalized(const Quaternion& q) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorKind::Domain, "cannot normalize a zero-norm quaternion");
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Quaternion multiply(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quaternion yaw_pitch_to_quat(double yaw_deg, double pitch_deg) {
  const double hy = 0.5 * normalize_yaw(yaw_deg) * kDegToRad;
  const double hp = 0.5 * pitch_deg * kDegToRad;
  // Yaw about +z, then pitch about the body right axis (-y); positive pitch looks up.
  const Quaternion yaw{std::cos(hy), 0.0, 0.0, std::sin(hy)};
  const Quaternion pitch{std::cos(hp), 0.0, -std::sin(hp), 0.0};
  return canonical(multiply(yaw, pitch));
}

YawPitch quat_to_yaw_pitch(const Quaternion& q_in) {
  const Quaternion q = normalized(q_in);
  // Camera forward = R * e_x, the first column of the rotation matrix.
  const double fx = 1.0 - 2.0 * (q.y * q.y + q.z * q.z);
  const double fy = 2.0 * (q.x * q.y + q.w * q.z);
  const double fz = 2.0 * (q.x * q.z - q.w * q.y);
  const double horizontal = std::hypot(fx, fy);
  const double pitch = std::atan2(fz, horizontal) * kRadToDeg;
  if (horizontal < 1e-12) return {0.0, pitch};
  return {normalize_yaw(std::atan2(fy, fx) * kRadToDeg), pitch};
}

double quat_angular_distance(const Quaternion& a, const Quaternion& b) {
  const Quaternion na = normalized(a);
  const Quaternion nb = normalized(b);
  const Quaternion sb = na.dot(nb) < 0.0 ? -nb : nb;
  // 4 atan2(|a - b|, |a + b|) equals 2 acos(a.b) but stays accurate near zero.
  const Quaternion diff{na.w - sb.w, na.x - sb.x, na.y - sb.y, na.z - sb.z};
  const Quaternion sum{na.w + sb.w, na.x + sb.x, na.y + sb.y, na.z + sb.z};
  return 4.0 * std::atan2(diff.norm(), sum.norm()) * kRadToDeg;
}

void Aoi::validate() const {
  if (!(width > 0.0 && height > 0.0)) fail(ErrorKind::Config, "AOI width and height must be positive");
}

PoseLabel pose_to_label(const Pose& pose, const Aoi& aoi) {
  aoi.validate();
  if (!aoi.contains(pose.x, pose.y))
    fail(ErrorKind::Domain, "pose (" + std::to_string(pose.x) + ", " + std::to_string(pose.y) +
                                ") lies outside the AOI");
  const Quaternion q = yaw_pitch_to_quat(pose.yaw, pose.pitch);
  return {(pose.x - aoi.x0) / aoi.width, (pose.y - aoi.y0) / aoi.height, q.w, q.x, q.y, q.z};
}

Pose label_to_pose(const PoseLabel& label, const Aoi& aoi, double height) {
  const auto q = label.quat();
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorKind::Domain, "degenerate label: zero-norm quaternion");
  const auto [yaw, pitch] = quat_to_yaw_pitch(q);
  return Pose{aoi.x0 + label.x * aoi.width, aoi.y0 + label.y * aoi.height, height, yaw, pitch};
}

}  // namespace leanloc
