#include "leanloc/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "leanloc/error.hpp"

namespace leanloc {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;

// Barycentric slack so that pixels centred exactly on a shared edge are
// covered by at least one of the two triangles.
constexpr double kCoverageSlack = 1e-9;

struct ScreenVertex {
  double u, v, z;
};

// Camera space: x right, y up, z forward.
struct ViewTransform {
  CameraFrame frame;
  double focal;
  double cx, cy;

  Vec3 to_camera(const Vec3& w) const {
    const Vec3 d = w - frame.eye;
    return {d.dot(frame.right), d.dot(frame.up), d.dot(frame.forward)};
  }
  ScreenVertex project(const Vec3& c) const {
    return {cx + focal * c.x() / c.z(), cy - focal * c.y() / c.z(), c.z()};
  }
};

ViewTransform make_view(const Pose& pose, const CameraIntrinsics& cam) {
  return {CameraFrame::from_pose(pose), cam.focal_px(), 0.5 * cam.width, 0.5 * cam.height};
}

// True when every corner of the box lies outside one frustum plane.
bool box_outside_frustum(const BuildingBox& box, const ViewTransform& view, const CameraIntrinsics& cam) {
  if (!box.lo.allFinite()) return true;
  Vec3 corners[8];
  for (int k = 0; k < 8; ++k) {
    const Vec3 w((k & 1) ? box.hi.x() : box.lo.x(), (k & 2) ? box.hi.y() : box.lo.y(),
                 (k & 4) ? box.hi.z() : box.lo.z());
    corners[k] = view.to_camera(w);
  }
  const double hx = view.cx / view.focal;
  const double hy = view.cy / view.focal;
  auto all_outside = [&](auto&& outside) {
    for (const auto& c : corners)
      if (!outside(c)) return false;
    return true;
  };
  return all_outside([&](const Vec3& c) { return c.z() < cam.near; }) ||
         all_outside([&](const Vec3& c) { return c.x() > hx * c.z(); }) ||
         all_outside([&](const Vec3& c) { return c.x() < -hx * c.z(); }) ||
         all_outside([&](const Vec3& c) { return c.y() > hy * c.z(); }) ||
         all_outside([&](const Vec3& c) { return c.y() < -hy * c.z(); });
}

struct ZBuffer {
  int width = 0, height = 0;
  std::vector<double> inv_z;
  std::vector<std::int32_t> tri;

  ZBuffer(int w, int h)
      : width(w), height(h), inv_z(static_cast<std::size_t>(w) * h, 0.0),
        tri(static_cast<std::size_t>(w) * h, -1) {}
};

void raster_triangle(ZBuffer& zb, const ScreenVertex& a, const ScreenVertex& b, const ScreenVertex& c,
                     std::int32_t id) {
  const double area = (b.u - a.u) * (c.v - a.v) - (c.u - a.u) * (b.v - a.v);
  if (!(std::abs(area) > 1e-12)) return;
  const double inv_area = 1.0 / area;

  const double min_u = std::min({a.u, b.u, c.u});
  const double max_u = std::max({a.u, b.u, c.u});
  const double min_v = std::min({a.v, b.v, c.v});
  const double max_v = std::max({a.v, b.v, c.v});
  const int c0 = std::max(0, static_cast<int>(std::ceil(min_u - 0.5)));
  const int c1 = std::min(zb.width - 1, static_cast<int>(std::floor(max_u - 0.5)));
  const int r0 = std::max(0, static_cast<int>(std::ceil(min_v - 0.5)));
  const int r1 = std::min(zb.height - 1, static_cast<int>(std::floor(max_v - 0.5)));
  if (c0 > c1 || r0 > r1) return;

  const double iza = 1.0 / a.z, izb = 1.0 / b.z, izc = 1.0 / c.z;
  for (int row = r0; row <= r1; ++row) {
    const double pv = row + 0.5;
    for (int col = c0; col <= c1; ++col) {
      const double pu = col + 0.5;
      const double wa = ((c.u - b.u) * (pv - b.v) - (pu - b.u) * (c.v - b.v)) * inv_area;
      const double wb = ((a.u - c.u) * (pv - c.v) - (pu - c.u) * (a.v - c.v)) * inv_area;
      const double wc = 1.0 - wa - wb;
      if (wa < -kCoverageSlack || wb < -kCoverageSlack || wc < -kCoverageSlack) continue;
      const double iz = wa * iza + wb * izb + wc * izc;
      const std::size_t idx = static_cast<std::size_t>(row) * zb.width + col;
      if (iz > zb.inv_z[idx]) {
        zb.inv_z[idx] = iz;
        zb.tri[idx] = id;
      }
    }
  }
}

// Clips a camera-space triangle against z >= near; returns the vertex count (0, 3 or 4).
int clip_near(const Vec3 (&in)[3], double near, Vec3 (&out)[4]) {
  int n = 0;
  for (int k = 0; k < 3; ++k) {
    const Vec3& p = in[k];
    const Vec3& q = in[(k + 1) % 3];
    const bool p_in = p.z() >= near;
    const bool q_in = q.z() >= near;
    if (p_in) out[n++] = p;
    if (p_in != q_in) {
      const double t = (near - p.z()) / (q.z() - p.z());
      Vec3 r = p + t * (q - p);
      r.z() = near;
      out[n++] = r;
    }
  }
  return n;
}

struct RenderPass {
  ViewTransform view;
  ZBuffer zb;
  DepthMap depth;
  std::vector<char> culled;  // per building
};

RenderPass zbuffer_pass(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam) {
  cam.validate();
  RenderPass pass{make_view(pose, cam), ZBuffer(cam.width, cam.height),
                  DepthMap(cam.width, cam.height, static_cast<float>(cam.far)), {}};
  const auto& verts = scene.vertices();
  const auto& tris = scene.triangles();
  const auto& boxes = scene.building_boxes();
  pass.culled.resize(boxes.size());
  for (std::size_t b = 0; b < boxes.size(); ++b)
    pass.culled[b] = box_outside_frustum(boxes[b], pass.view, cam) ? 1 : 0;

  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& tri = tris[t];
    if (pass.culled[tri.building_id]) continue;
    const Vec3 cv[3] = {pass.view.to_camera(verts[tri.v[0]]), pass.view.to_camera(verts[tri.v[1]]),
                        pass.view.to_camera(verts[tri.v[2]])};
    if (cv[0].z() < cam.near && cv[1].z() < cam.near && cv[2].z() < cam.near) continue;
    Vec3 clipped[4];
    const int n = clip_near(cv, cam.near, clipped);
    if (n < 3) continue;
    ScreenVertex sv[4];
    for (int k = 0; k < n; ++k) sv[k] = pass.view.project(clipped[k]);
    const auto id = static_cast<std::int32_t>(t);
    raster_triangle(pass.zb, sv[0], sv[1], sv[2], id);
    if (n == 4) raster_triangle(pass.zb, sv[0], sv[2], sv[3], id);
  }

  // Resolve each covered pixel to the exact ray/plane distance of its winning triangle.
  const auto& normals = scene.face_normals();
  const auto& eye = pass.view.frame.eye;
  const auto far_f = static_cast<float>(cam.far);
  for (int row = 0; row < cam.height; ++row) {
    for (int col = 0; col < cam.width; ++col) {
      const std::size_t idx = static_cast<std::size_t>(row) * cam.width + col;
      const std::int32_t id = pass.zb.tri[idx];
      if (id < 0) continue;
      const Vec3 dir = pass.view.frame.ray_direction(cam, col + 0.5, row + 0.5);
      const Vec3& n = normals[id];
      const double denom = n.dot(dir);
      double t = 1.0 / pass.zb.inv_z[idx];
      if (std::abs(denom) > 1e-12) {
        const double exact = n.dot(verts[tris[id].v[0]] - eye) / denom;
        if (exact > 0.0) t = exact;
      }
      const double dist = std::max(cam.near, t * dir.norm());
      const auto df = static_cast<float>(dist);
      if (dist >= cam.far || df >= far_f) {
        pass.zb.tri[idx] = -1;
        continue;
      }
      pass.depth.data[idx] = df;
    }
  }
  return pass;
}

FaceImage faces_from(const RenderPass& pass) {
  FaceImage face(pass.depth.width, pass.depth.height, 0);
  for (std::size_t i = 0; i < face.size(); ++i) face.data[i] = pass.zb.tri[i] >= 0 ? 1 : 0;
  return face;
}

// Moller-Trumbore. Returns the ray parameter of the hit (in units of `dir`),
// or -1 when the ray misses the triangle.
double ray_triangle(const Vec3& origin, const Vec3& dir, const std::vector<Vec3>& verts, const Triangle& tri) {
  const Vec3& p0 = verts[tri.v[0]];
  const Vec3 e1 = verts[tri.v[1]] - p0;
  const Vec3 e2 = verts[tri.v[2]] - p0;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-14) return -1.0;
  const double inv_det = 1.0 / det;
  const Vec3 tvec = origin - p0;
  const double bu = tvec.dot(pvec) * inv_det;
  if (bu < 0.0 || bu > 1.0) return -1.0;
  const Vec3 qvec = tvec.cross(e1);
  const double bv = dir.dot(qvec) * inv_det;
  if (bv < 0.0 || bu + bv > 1.0) return -1.0;
  return e2.dot(qvec) * inv_det;
}

EdgeImage edges_from(const SceneModel& scene, const RenderPass& pass, const CameraIntrinsics& cam) {
  EdgeImage out{Image<std::uint8_t>(cam.width, cam.height, 0), 0};
  const auto& verts = scene.vertices();
  const auto& normals = scene.face_normals();
  const auto& tris = scene.triangles();
  const auto& view = pass.view;
  const Vec3& eye = view.frame.eye;

  std::vector<int> pixels;
  for (const auto& e : scene.edges()) {
    if (pass.culled[e.building_id]) continue;
    const Vec3& wa = verts[e.a];
    const Vec3& wb = verts[e.b];
    bool candidate = e.faces[1] < 0 || e.non_manifold || e.crease;
    if (!candidate) {
      const bool front0 = normals[e.faces[0]].dot(eye - wa) > 0.0;
      double s1 = normals[e.faces[1]].dot(eye - wa);
      if (e.flipped) s1 = -s1;
      candidate = front0 != (s1 > 0.0);
    }
    if (!candidate) continue;

    Vec3 ca = view.to_camera(wa);
    Vec3 cb = view.to_camera(wb);
    if (ca.z() < cam.near && cb.z() < cam.near) continue;
    if (ca.z() < cam.near || cb.z() < cam.near) {
      const double t = (cam.near - ca.z()) / (cb.z() - ca.z());
      Vec3 r = ca + t * (cb - ca);
      r.z() = cam.near;
      (ca.z() < cam.near ? ca : cb) = r;
    }
    const ScreenVertex sa = view.project(ca);
    const ScreenVertex sb = view.project(cb);
    const double length = std::hypot(sb.u - sa.u, sb.v - sa.v);
    const int samples = std::max(2, static_cast<int>(std::ceil(2.0 * length)) + 1);

    pixels.clear();
    for (int k = 0; k < samples; ++k) {
      const double s = static_cast<double>(k) / (samples - 1);
      // Screen-uniform parameter s mapped back to the 3D segment (1/z is affine in s).
      const double denom = (1.0 - s) * cb.z() + s * ca.z();
      const double t = denom > 0.0 ? s * ca.z() / denom : s;
      const Vec3 pc = ca + t * (cb - ca);
      const double u = view.cx + view.focal * pc.x() / pc.z();
      const double v = view.cy - view.focal * pc.y() / pc.z();
      if (!(u >= 0.0 && v >= 0.0 && u < cam.width && v < cam.height)) continue;
      const int col = static_cast<int>(u);
      const int row = static_cast<int>(v);
      const double dist = pc.norm();
      if (dist >= cam.far) continue;

      const std::size_t idx = static_cast<std::size_t>(row) * cam.width + col;
      const Vec3 dir = view.frame.right * pc.x() + view.frame.up * pc.y() + view.frame.forward * pc.z();
      const Vec3 unit = dir / dist;
      bool visible = true;
      // Occluders are the surfaces winning this pixel and its neighbours; each
      // is intersected exactly along the sample's own ray.
      std::int32_t seen[9];
      int nseen = 0;
      for (int dr = -1; dr <= 1 && visible; ++dr)
        for (int dc = -1; dc <= 1 && visible; ++dc) {
          const int r = row + dr, c = col + dc;
          if (r < 0 || c < 0 || r >= cam.height || c >= cam.width) continue;
          const std::int32_t occ = pass.zb.tri[static_cast<std::size_t>(r) * cam.width + c];
          if (occ < 0 || occ == e.faces[0] || occ == e.faces[1]) continue;
          if (std::find(seen, seen + nseen, occ) != seen + nseen) continue;
          seen[nseen++] = occ;
          const double hit = ray_triangle(eye, unit, verts, tris[occ]);
          if (!(hit > 0.0)) continue;
          const double bias = std::max(EdgeTolerances::kMinDepthBias, EdgeTolerances::kRelativeDepthBias * hit);
          if (hit + bias < dist) visible = false;
        }
      if (!visible) continue;
      out.mask.data[idx] = 1;
      pixels.push_back(static_cast<int>(idx));
    }
    std::sort(pixels.begin(), pixels.end());
    const auto distinct = std::unique(pixels.begin(), pixels.end()) - pixels.begin();
    if (distinct >= EdgeTolerances::kMinVisiblePixels) ++out.visible_edge_count;
  }
  return out;
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (width <= 0 || height <= 0) fail(ErrorKind::Config, "image dimensions must be positive");
  if (!(near > 0.0 && far > near)) fail(ErrorKind::Config, "clip distances must satisfy 0 < near < far");
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) fail(ErrorKind::Config, "horizontal FOV must lie in (0, 180)");
}

double CameraIntrinsics::focal_px() const { return 0.5 * width / std::tan(0.5 * hfov_deg * kDegToRad); }

CameraFrame CameraFrame::from_pose(const Pose& pose) {
  const double yaw = pose.yaw * kDegToRad;
  const double pitch = pose.pitch * kDegToRad;
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  CameraFrame f;
  f.eye = Vec3(pose.x, pose.y, pose.z);
  f.forward = Vec3(cy * cp, sy * cp, sp);
  f.right = Vec3(sy, -cy, 0.0);
  f.up = Vec3(-cy * sp, -sy * sp, cp);
  return f;
}

Vec3 CameraFrame::ray_direction(const CameraIntrinsics& cam, double u, double v) const {
  const double f = cam.focal_px();
  return forward + ((u - 0.5 * cam.width) / f) * right + ((0.5 * cam.height - v) / f) * up;
}

DepthMap render_depth(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam) {
  return zbuffer_pass(scene, pose, cam).depth;
}

FaceImage render_faces(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam) {
  return faces_from(zbuffer_pass(scene, pose, cam));
}

EdgeImage render_edges(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam) {
  return edges_from(scene, zbuffer_pass(scene, pose, cam), cam);
}

LeanTriplet render_triplet(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam) {
  RenderPass pass = zbuffer_pass(scene, pose, cam);
  LeanTriplet out;
  out.edge = edges_from(scene, pass, cam);
  out.face = faces_from(pass);
  out.depth = std::move(pass.depth);
  out.pose = pose;
  return out;
}

double ray_cast_depth_at(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam,
                         double u, double v) {
  cam.validate();
  const CameraFrame frame = CameraFrame::from_pose(pose);
  const Vec3 dir = frame.ray_direction(cam, u, v);  // forward component 1, so t is view depth
  const auto& verts = scene.vertices();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& tri : scene.triangles()) {
    const double t = ray_triangle(frame.eye, dir, verts, tri);
    if (t >= cam.near && t < best) best = t;
  }
  if (!std::isfinite(best)) return cam.far;
  const double dist = best * dir.norm();
  return dist >= cam.far ? cam.far : dist;
}

double ray_cast_depth(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam, int col,
                      int row) {
  return ray_cast_depth_at(scene, pose, cam, col + 0.5, row + 0.5);
}

}  // namespace leanloc
