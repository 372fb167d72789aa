#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace leanloc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

enum class SurfaceKind : std::uint8_t { Wall, Roof, Floor };

struct Triangle {
  std::array<std::uint32_t, 3> v;
  int building_id = 0;
  SurfaceKind kind = SurfaceKind::Wall;
};

/// Building outline on the ground plane. Counter-clockwise, implicitly closed.
struct Footprint {
  std::vector<Vec2> polygon;
  double height = 0.0;
  int building_id = 0;
};

struct Bounds2 {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;

  bool contains(const Vec2& p) const {
    return p.x() >= min_x && p.x() <= max_x && p.y() >= min_y && p.y() <= max_y;
  }
};

/// Mesh edge after welding coincident vertex indices. `faces[1]` is -1 for
/// boundary edges. `flipped` records that the second face winds the shared
/// edge in the same direction as the first (inconsistent orientation).
struct MeshEdge {
  std::uint32_t a = 0, b = 0;
  std::int32_t faces[2] = {-1, -1};
  bool non_manifold = false;
  bool flipped = false;
  bool crease = false;  // dihedral angle above the crease threshold
  int building_id = 0;
};

struct BuildingBox {
  Vec3 lo, hi;
};

/// Untextured city model: building walls and roofs plus their 2D footprints.
///
/// Immutable once constructed. The constructor validates the invariants and
/// precomputes face normals, the welded edge graph used by the edge renderer
/// and per-building boxes used for culling.
class SceneModel {
 public:
  static constexpr double kCreaseAngleDeg = 30.0;

  SceneModel() = default;
  SceneModel(std::vector<Vec3> vertices, std::vector<Triangle> triangles,
             std::vector<Footprint> footprints, Bounds2 bounds);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Footprint>& footprints() const { return footprints_; }
  const Bounds2& bounds() const { return bounds_; }

  const std::vector<Vec3>& face_normals() const { return normals_; }
  const std::vector<MeshEdge>& edges() const { return edges_; }
  /// Indexed by building id; same order as footprints().
  const std::vector<BuildingBox>& building_boxes() const { return boxes_; }

  bool empty() const { return triangles_.empty(); }

 private:
  void build_derived();

  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Footprint> footprints_;
  Bounds2 bounds_;

  std::vector<Vec3> normals_;
  std::vector<MeshEdge> edges_;
  std::vector<BuildingBox> boxes_;
};

struct SynthCityConfig {
  double extent_x = 200.0;
  double extent_y = 200.0;
  double block_size = 40.0;
  double street_width = 10.0;
  double min_height = 8.0;
  double max_height = 30.0;
  double jitter = 0.2;  // fraction of block size, in [0, 1)
  std::uint64_t seed = 7;

  void validate() const;
  bool operator==(const SynthCityConfig&) const = default;
};

SceneModel synth_city(const SynthCityConfig& config);

/// Reads the OBJ subset documented in docs/mesh_format.md.
SceneModel load_mesh(const std::filesystem::path& path);
SceneModel parse_mesh(std::string_view text);

void write_mesh(const SceneModel& scene, const std::filesystem::path& path);
std::string format_mesh(const SceneModel& scene);

/// Strict containment: points on a footprint boundary are outside.
bool is_inside_building(const SceneModel& scene, const Vec2& point);

bool point_in_polygon_strict(std::span<const Vec2> polygon, const Vec2& point);

/// Counter-clockwise convex hull (Andrew's monotone chain), collinear points dropped.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

}  // namespace leanloc
