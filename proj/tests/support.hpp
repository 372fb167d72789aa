#pragma once

// Shared fixtures and hand-rolled generators for the test binaries.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "leanloc/raster.hpp"
#include "leanloc/scene.hpp"

namespace testsupport {

using leanloc::Vec2;
using leanloc::Vec3;

struct Box {
  double x0, y0, x1, y1, h;
  double z0 = 0.0;  // base height; only box_obj honors it
};

// Closed-top, open-bottom extruded boxes like the synth city emits: outward
// walls, upward roof, one building per box.
inline leanloc::SceneModel make_boxes(const std::vector<Box>& boxes, std::optional<leanloc::Bounds2> bounds = {}) {
  using namespace leanloc;
  std::vector<Vec3> v;
  std::vector<Triangle> t;
  std::vector<Footprint> fp;
  Bounds2 b{1e300, 1e300, -1e300, -1e300};
  for (std::size_t n = 0; n < boxes.size(); ++n) {
    const Box& q = boxes[n];
    const int id = static_cast<int>(n);
    const auto base = static_cast<std::uint32_t>(v.size());
    const Vec2 c[4] = {{q.x0, q.y0}, {q.x1, q.y0}, {q.x1, q.y1}, {q.x0, q.y1}};
    for (const auto& p : c) v.emplace_back(p.x(), p.y(), 0.0);
    for (const auto& p : c) v.emplace_back(p.x(), p.y(), q.h);
    for (std::uint32_t e = 0; e < 4; ++e) {
      const std::uint32_t a = base + e, bb = base + (e + 1) % 4;
      t.push_back({{a, bb, bb + 4}, id, SurfaceKind::Wall});
      t.push_back({{a, bb + 4, a + 4}, id, SurfaceKind::Wall});
    }
    t.push_back({{base + 4, base + 5, base + 6}, id, SurfaceKind::Roof});
    t.push_back({{base + 4, base + 6, base + 7}, id, SurfaceKind::Roof});
    fp.push_back({{c[0], c[1], c[2], c[3]}, q.h, id});
    b.min_x = std::min(b.min_x, q.x0);
    b.min_y = std::min(b.min_y, q.y0);
    b.max_x = std::max(b.max_x, q.x1);
    b.max_y = std::max(b.max_y, q.y1);
  }
  if (boxes.empty()) b = {};
  return SceneModel(std::move(v), std::move(t), std::move(fp), bounds.value_or(b));
}

// Axis-aligned box with a floor as an OBJ group: 8 vertices, 12 triangles.
inline std::string box_obj(const Box& q, int first_vertex, const std::string& name) {
  std::string s = "o " + name + "\n";
  const double xs[2] = {q.x0, q.x1}, ys[2] = {q.y0, q.y1}, zs[2] = {q.z0, q.h};
  for (double z : zs)
    for (int k = 0; k < 4; ++k) {
      const int ix = (k == 1 || k == 2), iy = (k >= 2);
      s += "v " + std::to_string(xs[ix]) + " " + std::to_string(ys[iy]) + " " + std::to_string(z) + "\n";
    }
  const int f = first_vertex;
  auto tri = [&](int a, int b, int c) {
    s += "f " + std::to_string(f + a) + " " + std::to_string(f + b) + " " + std::to_string(f + c) + "\n";
  };
  for (int e = 0; e < 4; ++e) {
    const int a = e, b = (e + 1) % 4;
    tri(a, b, b + 4);
    tri(a, b + 4, a + 4);
  }
  tri(4, 5, 6);
  tri(4, 6, 7);
  tri(0, 2, 1);
  tri(0, 3, 2);
  return s;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("leanloc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// Test-local generator; independent of the library's Rng.
struct Gen {
  std::mt19937_64 eng;
  explicit Gen(std::uint64_t seed) : eng(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
};

// Independent ray caster: nearest hit along the ray through image point (u, v),
// with the id of the plane it lies on (triangles sharing a plane share an id).
struct Hit {
  double distance = -1.0;  // < 0: sky
  Vec3 normal = Vec3::Zero();
  double offset = 0.0;  // plane: normal . p = offset
};

inline Hit cast_ray(const leanloc::SceneModel& scene, const leanloc::Pose& pose, const leanloc::CameraIntrinsics& cam,
                    double u, double v) {
  const double yaw = pose.yaw * M_PI / 180.0, pitch = pose.pitch * M_PI / 180.0;
  const Vec3 fwd(std::cos(yaw) * std::cos(pitch), std::sin(yaw) * std::cos(pitch), std::sin(pitch));
  const Vec3 right(std::sin(yaw), -std::cos(yaw), 0.0);
  const Vec3 up = right.cross(fwd);
  const double f = 0.5 * cam.width / std::tan(0.5 * cam.hfov_deg * M_PI / 180.0);
  const Vec3 eye(pose.x, pose.y, pose.z);
  const Vec3 dir = fwd + ((u - 0.5 * cam.width) / f) * right + ((0.5 * cam.height - v) / f) * up;
  Hit best;
  double best_t = 1e300;
  const auto& verts = scene.vertices();
  for (const auto& tri : scene.triangles()) {
    const Vec3& a = verts[tri.v[0]];
    const Vec3& b = verts[tri.v[1]];
    const Vec3& c = verts[tri.v[2]];
    // Plane intersection followed by a barycentric inside test.
    const Vec3 n = (b - a).cross(c - a);
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-15 * n.norm() * dir.norm()) continue;
    const double t = n.dot(a - eye) / denom;  // in units of dir (forward component 1)
    if (t < cam.near || t >= best_t) continue;
    const Vec3 p = eye + t * dir;
    const double w0 = (b - p).cross(c - p).dot(n), w1 = (c - p).cross(a - p).dot(n), w2 = (a - p).cross(b - p).dot(n);
    if (w0 < 0 || w1 < 0 || w2 < 0) continue;
    best_t = t;
    best.distance = t * dir.norm();
    best.normal = n.normalized();
    best.offset = best.normal.dot(a);
  }
  if (best.distance >= cam.far) best = Hit{};
  return best;
}

inline bool same_surface(const Hit& a, const Hit& b) {
  if ((a.distance < 0) != (b.distance < 0)) return false;
  if (a.distance < 0) return true;
  return a.normal.dot(b.normal) > 1.0 - 1e-9 && std::abs(a.offset - b.offset) < 1e-6;
}

}  // namespace testsupport
