#include <thread>

#include "doctest.h"
#include "leanloc/raster.hpp"
#include "support.hpp"

using namespace leanloc;
using testsupport::Box;

namespace {

Pose random_outdoor_pose(const SceneModel& s, testsupport::Gen& gen, double lo = 0, double hi = 200) {
  for (;;) {
    const Pose p = make_pose(gen.uniform(lo, hi), gen.uniform(lo, hi), gen.uniform(0, 360), gen.uniform(0, 15));
    if (!is_inside_building(s, {p.x, p.y})) return p;
  }
}

bool face_matches_depth(const LeanTriplet& t, const CameraIntrinsics& cam) {
  const auto far_f = static_cast<float>(cam.far);
  for (std::size_t i = 0; i < t.depth.size(); ++i)
    if ((t.face.data[i] != 0) != (t.depth.data[i] < far_f)) return false;
  return true;
}

}  // namespace

TEST_CASE("camera intrinsics") {
  CameraIntrinsics cam;
  CHECK(cam.focal_px() == doctest::Approx(80.0 / std::tan(M_PI / 6)));
  CameraIntrinsics bad = cam;
  bad.near = 0;
  CHECK_THROWS(bad.validate());
  bad = cam;
  bad.far = bad.near;
  CHECK_THROWS(bad.validate());
  bad = cam;
  bad.hfov_deg = 180;
  CHECK_THROWS(bad.validate());
  bad = cam;
  bad.width = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("camera frame convention") {
  const CameraFrame f = CameraFrame::from_pose(make_pose(1, 2, 90, 0));
  CHECK(f.forward.isApprox(Vec3(0, 1, 0), 1e-12));
  CHECK(f.right.isApprox(Vec3(1, 0, 0), 1e-12));
  CHECK(f.up.isApprox(Vec3(0, 0, 1), 1e-12));
  CHECK(f.eye.isApprox(Vec3(1, 2, 1.7), 1e-12));
  const CameraIntrinsics cam;
  // Top-left pixel corner looks up and to the left.
  const Vec3 d = f.ray_direction(cam, 0, 0);
  CHECK(d.dot(f.forward) == doctest::Approx(1.0));
  CHECK(d.dot(f.right) < 0);
  CHECK(d.dot(f.up) > 0);
}

TEST_CASE("empty scene renders sky everywhere") {
  const SceneModel s = testsupport::make_boxes({}, Bounds2{-10, -10, 10, 10});
  const CameraIntrinsics cam;
  const LeanTriplet t = render_triplet(s, make_pose(0, 0, 30, 5), cam);
  for (float d : t.depth.data) REQUIRE(d == static_cast<float>(cam.far));
  for (auto f : t.face.data) REQUIRE(f == 0);
  for (auto e : t.edge.mask.data) REQUIRE(e == 0);
  CHECK(t.edge.visible_edge_count == 0);
  CHECK(ray_cast_depth(s, make_pose(0, 0, 30, 5), cam, 10, 10) == cam.far);
}

TEST_CASE("facing a wall: analytic center depth and a full face mask") {
  // Close enough that the bottom image row still meets the wall above z = 0.
  const double d = 3.5;
  const SceneModel s = testsupport::make_boxes({{d, -500, d + 1, 500, 500}});
  const CameraIntrinsics cam;
  const Pose p = make_pose(0, 0, 0, 0);
  const DepthMap depth = render_depth(s, p, cam);
  CHECK(std::abs(depth.at(80, 60) - d) < 1e-3 * d);
  CHECK(ray_cast_depth_at(s, p, cam, 80, 60) == doctest::Approx(d).epsilon(1e-12));
  const FaceImage face = render_faces(s, p, cam);
  for (auto f : face.data) REQUIRE(f == 1);
}

TEST_CASE("unit box on the optical axis at distance 5") {
  const SceneModel s = parse_mesh(testsupport::box_obj({4.5, -0.5, 5.5, 0.5, 2.2, 1.2}, 1, "box"));
  const CameraIntrinsics cam;
  const Pose p = make_pose(0, 0, 0, 0);
  CHECK(ray_cast_depth_at(s, p, cam, 80, 60) == doctest::Approx(4.5).epsilon(1e-12));
  CHECK(ray_cast_depth(s, p, cam, 80, 60) == doctest::Approx(4.5).epsilon(1e-4));
  CHECK(std::abs(render_depth(s, p, cam).at(80, 60) - 4.5) < 4.5e-3);
}

TEST_CASE("near-plane clipping matches between rasterizer and ray caster") {
  // The camera stands 0.05 m in front of a wall, closer than the near plane.
  const SceneModel s = testsupport::make_boxes({{0.05, -5, 1, 5, 5}, {20, -50, 21, 50, 50}});
  const CameraIntrinsics cam;
  const Pose p = make_pose(0, 0, 0, 0);
  const DepthMap depth = render_depth(s, p, cam);
  for (int row = 0; row < cam.height; row += 7)
    for (int col = 0; col < cam.width; col += 7) {
      const double r = ray_cast_depth(s, p, cam, col, row);
      REQUIRE(std::abs(depth.at(col, row) - r) <= 1e-3 * r);
    }
}

TEST_CASE("render_depth agrees with ray_cast_depth on random synth-city poses") {
  const SceneModel s = synth_city({});
  const CameraIntrinsics cam;
  testsupport::Gen gen(77);
  std::size_t total = 0, agree = 0;
  for (int n = 0; n < 10; ++n) {
    const Pose p = random_outdoor_pose(s, gen);
    const DepthMap depth = render_depth(s, p, cam);
    for (int row = 0; row < cam.height; ++row)
      for (int col = 0; col < cam.width; ++col) {
        const double r = ray_cast_depth(s, p, cam, col, row);
        ++total;
        agree += std::abs(depth.at(col, row) - r) <= 1e-3 * r;
      }
  }
  CHECK(static_cast<double>(agree) / total >= 0.999);
}

TEST_CASE("depth values stay in [near, far] and faces equal depth < far") {
  const SceneModel s = synth_city({});
  const CameraIntrinsics cam;
  testsupport::Gen gen(12);
  for (int n = 0; n < 40; ++n) {
    const Pose p = random_outdoor_pose(s, gen, -20, 220);
    const LeanTriplet t = render_triplet(s, p, cam);
    REQUIRE(t.depth.width == cam.width);
    REQUIRE(t.face.width == cam.width);
    REQUIRE(t.edge.mask.width == cam.width);
    REQUIRE(t.depth.height == cam.height);
    REQUIRE(t.face.height == cam.height);
    REQUIRE(t.edge.mask.height == cam.height);
    REQUIRE(t.pose == p);
    for (float d : t.depth.data) REQUIRE((d >= cam.near && d <= cam.far));
    REQUIRE(face_matches_depth(t, cam));
    REQUIRE(render_faces(s, p, cam) == t.face);
    REQUIRE(render_depth(s, p, cam) == t.depth);
    REQUIRE(render_edges(s, p, cam) == t.edge);
  }
}

TEST_CASE("edge pixels are local to surface discontinuities") {
  const SceneModel s = synth_city({});
  const CameraIntrinsics cam;
  testsupport::Gen gen(21);
  for (int n = 0; n < 6; ++n) {
    const Pose p = random_outdoor_pose(s, gen);
    const LeanTriplet t = render_triplet(s, p, cam);
    std::vector<testsupport::Hit> hits(static_cast<std::size_t>(cam.width) * cam.height);
    for (int row = 0; row < cam.height; ++row)
      for (int col = 0; col < cam.width; ++col)
        hits[static_cast<std::size_t>(row) * cam.width + col] = testsupport::cast_ray(s, p, cam, col + 0.5, row + 0.5);
    auto hit = [&](int c, int r) -> const testsupport::Hit& { return hits[static_cast<std::size_t>(r) * cam.width + c]; };
    auto inside = [&](int c, int r) { return c >= 0 && r >= 0 && c < cam.width && r < cam.height; };
    for (int row = 0; row < cam.height; ++row)
      for (int col = 0; col < cam.width; ++col) {
        if (!t.edge.mask.at(col, row)) continue;
        bool near_face = false, near_break = false;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int c = col + dc, r = row + dr;
            if (!inside(c, r)) continue;
            near_face |= t.face.at(c, r) != 0;
            if (inside(c + 1, r) && !testsupport::same_surface(hit(c, r), hit(c + 1, r))) near_break = true;
            if (inside(c, r + 1) && !testsupport::same_surface(hit(c, r), hit(c, r + 1))) near_break = true;
          }
        // Image-border pixels may see a discontinuity just outside the frame.
        const bool border = col == 0 || row == 0 || col == cam.width - 1 || row == cam.height - 1;
        CAPTURE(col);
        CAPTURE(row);
        REQUIRE(near_face);
        REQUIRE((near_break || border));
      }
  }
}

TEST_CASE("rendering is deterministic and pure across threads") {
  const SceneModel s = synth_city({});
  const CameraIntrinsics cam;
  testsupport::Gen gen(3);
  std::vector<Pose> poses;
  for (int n = 0; n < 16; ++n) poses.push_back(random_outdoor_pose(s, gen));
  std::vector<LeanTriplet> serial;
  for (const auto& p : poses) serial.push_back(render_triplet(s, p, cam));
  std::vector<LeanTriplet> parallel(poses.size());
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < 4; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t n = w; n < poses.size(); n += 4) parallel[n] = render_triplet(s, poses[n], cam);
      });
  }
  for (std::size_t n = 0; n < poses.size(); ++n) {
    REQUIRE(serial[n].depth == parallel[n].depth);
    REQUIRE(serial[n].face == parallel[n].face);
    REQUIRE(serial[n].edge == parallel[n].edge);
  }
}

TEST_CASE("a building outside the view changes no pixel") {
  SynthCityConfig c;
  const SceneModel base = synth_city(c);
  // Same city plus one extra box far behind the camera (camera at the west
  // edge looking east).
  std::string obj = format_mesh(base);
  obj += testsupport::box_obj({-80, 90, -70, 110, 40}, static_cast<int>(base.vertices().size()) + 1, "extra");
  const SceneModel more = parse_mesh(obj);
  const CameraIntrinsics cam;
  for (double yaw : {0.0, 20.0, 340.0})
    for (double pitch : {0.0, 15.0}) {
      const Pose p = make_pose(-5, 100, yaw, pitch);
      const LeanTriplet a = render_triplet(base, p, cam);
      const LeanTriplet b = render_triplet(more, p, cam);
      REQUIRE(a.depth == b.depth);
      REQUIRE(a.face == b.face);
      REQUIRE(a.edge == b.edge);
    }
}

TEST_CASE("edge count of a single box from a generic exterior pose") {
  const SceneModel s = testsupport::make_boxes({{20, 5, 30, 15, 5}});
  const EdgeImage e = render_edges(s, make_pose(0, 0, 21.8, 0), CameraIntrinsics{});
  CHECK(e.visible_edge_count == 7);
  // Looking down onto a low box shows its roof: the four roof rim edges, the
  // three front verticals and two ground edges.
  const SceneModel low = testsupport::make_boxes({{16, 12, 20, 16, 1}});
  Pose above = make_pose(0, 0, 37.9, 0);
  above.z = 4.0;
  CHECK(render_edges(low, above, CameraIntrinsics{}).visible_edge_count == 9);
}
