#pragma once

#include <cstdint>
#include <span>

#include "leanloc/image.hpp"
#include "leanloc/pose.hpp"
#include "leanloc/scene.hpp"

namespace leanloc {

/// Pinhole camera. The horizontal field of view fixes the focal length;
/// pixels are square.
struct CameraIntrinsics {
  int width = 160;
  int height = 120;
  double hfov_deg = 60.0;
  double near = 0.1;
  double far = 2000.0;

  void validate() const;
  double focal_px() const;
  bool operator==(const CameraIntrinsics&) const = default;
};

/// Hidden-line tolerances recorded alongside every dataset.
struct EdgeTolerances {
  static constexpr double kCreaseAngleDeg = SceneModel::kCreaseAngleDeg;
  static constexpr double kMinDepthBias = 0.01;     // meters
  static constexpr double kRelativeDepthBias = 1e-3;
  static constexpr int kMinVisiblePixels = 3;
};

/// Distance along each pixel's ray to the nearest surface; sky pixels hold `far`.
using DepthMap = Image<float>;
/// 1 where a building surface is the nearest hit, 0 for sky.
using FaceImage = Image<std::uint8_t>;

struct EdgeImage {
  Image<std::uint8_t> mask;
  int visible_edge_count = 0;

  bool operator==(const EdgeImage&) const = default;
};

struct LeanTriplet {
  EdgeImage edge;
  FaceImage face;
  DepthMap depth;
  Pose pose;
};

/// World-space view frame of a posed camera.
struct CameraFrame {
  Vec3 eye;
  Vec3 forward, right, up;

  static CameraFrame from_pose(const Pose& pose);
  /// Unnormalized world direction through the given image-plane point
  /// (pixel units, origin top-left); its forward component is 1.
  Vec3 ray_direction(const CameraIntrinsics& cam, double u, double v) const;
};

DepthMap render_depth(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam);
FaceImage render_faces(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam);
EdgeImage render_edges(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam);

/// All three lean images from a single z-buffer pass.
LeanTriplet render_triplet(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam);

/// Brute-force reference: nearest ray/triangle hit through the center of
/// pixel (col, row), honoring the same near/far clipping as the rasterizer.
double ray_cast_depth(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam,
                      int col, int row);

/// Same, for an arbitrary image-plane point.
double ray_cast_depth_at(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam,
                         double u, double v);

}  // namespace leanloc
