#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <tuple>

#include "doctest.h"
#include "leanloc/error.hpp"
#include "leanloc/scene.hpp"
#include "support.hpp"

using namespace leanloc;
using testsupport::Box;

namespace {

// Winding-number oracle; boundary points are reported separately.
struct WindingResult {
  int winding = 0;
  bool on_boundary = false;
};

WindingResult winding(const std::vector<Vec2>& poly, const Vec2& p) {
  WindingResult r;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    const double cross = (b - a).x() * (p - a).y() - (b - a).y() * (p - a).x();
    if (cross == 0.0 && std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
        std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y()))
      r.on_boundary = true;
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && cross > 0) ++r.winding;
    } else if (b.y() <= p.y() && cross < 0) {
      --r.winding;
    }
  }
  return r;
}

bool oracle_inside(const SceneModel& s, const Vec2& p) {
  for (const auto& fp : s.footprints()) {
    const auto w = winding(fp.polygon, p);
    if (!w.on_boundary && w.winding != 0) return true;
  }
  return false;
}

double signed_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

void check_invariants(const SceneModel& s) {
  const auto nv = s.vertices().size();
  for (const auto& t : s.triangles()) {
    for (auto v : t.v) REQUIRE(v < nv);
    REQUIRE(t.building_id >= 0);
    REQUIRE(static_cast<std::size_t>(t.building_id) < s.footprints().size());
  }
  for (const auto& v : s.vertices()) REQUIRE(s.bounds().contains(v.head<2>()));
  for (std::size_t i = 0; i < s.footprints().size(); ++i) {
    const auto& fp = s.footprints()[i];
    REQUIRE(fp.building_id == static_cast<int>(i));
    REQUIRE(fp.height > 0.0);
    REQUIRE(signed_area(fp.polygon) > 0.0);
  }
}

// Exact separating-axis test between two convex CCW polygons (touching counts as disjoint).
bool convex_overlap(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  auto separated = [](const std::vector<Vec2>& p, const std::vector<Vec2>& q) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Vec2 e = p[(i + 1) % p.size()] - p[i];
      const Vec2 axis(e.y(), -e.x());
      double pmax = -1e300, qmin = 1e300;
      for (const auto& v : p) pmax = std::max(pmax, axis.dot(v));
      for (const auto& v : q) qmin = std::min(qmin, axis.dot(v));
      if (qmin >= pmax) return true;
    }
    return false;
  };
  return !separated(a, b) && !separated(b, a);
}

using TriKey = std::tuple<std::array<double, 9>, int, SurfaceKind>;

std::multiset<TriKey> triangle_keys(const SceneModel& s) {
  std::multiset<TriKey> keys;
  for (const auto& t : s.triangles()) {
    // Rotate so the lexicographically smallest vertex comes first; winding is kept.
    std::array<std::array<double, 3>, 3> v;
    for (int k = 0; k < 3; ++k) {
      const Vec3& p = s.vertices()[t.v[k]];
      v[k] = {p.x(), p.y(), p.z()};
    }
    const int first = static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
    std::array<double, 9> flat;
    for (int k = 0; k < 3; ++k)
      for (int c = 0; c < 3; ++c) flat[3 * k + c] = v[(first + k) % 3][c];
    keys.emplace(flat, t.building_id, t.kind);
  }
  return keys;
}

std::set<std::pair<double, double>> point_set(const std::vector<Vec2>& poly) {
  std::set<std::pair<double, double>> s;
  for (const auto& p : poly) s.emplace(p.x(), p.y());
  return s;
}

}  // namespace

TEST_CASE("synth city: block tiling of a 100 x 100 extent gives 2 x 2 buildings") {
  SynthCityConfig c;
  c.extent_x = c.extent_y = 100;
  c.block_size = 40;
  c.street_width = 10;
  const SceneModel s = synth_city(c);
  CHECK(s.footprints().size() == 4);
  check_invariants(s);
}

TEST_CASE("synth city: no jitter and a fixed height give exact block rectangles") {
  SynthCityConfig c;
  c.jitter = 0.0;
  c.min_height = c.max_height = 10.0;
  const SceneModel s = synth_city(c);
  REQUIRE(s.footprints().size() == 16);
  for (const auto& fp : s.footprints()) {
    CHECK(fp.height == 10.0);
    REQUIRE(fp.polygon.size() == 4);
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& p : fp.polygon) {
      x0 = std::min(x0, p.x());
      x1 = std::max(x1, p.x());
      y0 = std::min(y0, p.y());
      y1 = std::max(y1, p.y());
    }
    CHECK(x1 - x0 == doctest::Approx(40.0).epsilon(1e-12));
    CHECK(y1 - y0 == doctest::Approx(40.0).epsilon(1e-12));
    CHECK(signed_area(fp.polygon) == doctest::Approx(1600.0).epsilon(1e-12));
  }
  for (const auto& v : s.vertices()) CHECK((v.z() == 0.0 || v.z() == 10.0));
}

TEST_CASE("synth city: same seed gives a byte-identical model") {
  SynthCityConfig c;
  CHECK(format_mesh(synth_city(c)) == format_mesh(synth_city(c)));
  SynthCityConfig d = c;
  d.seed = 8;
  CHECK(format_mesh(synth_city(c)) != format_mesh(synth_city(d)));
}

TEST_CASE("synth city: invariants, disjoint footprints and vertical walls over 1000 seeds") {
  testsupport::Gen gen(1234);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    SynthCityConfig c;
    c.seed = seed;
    c.extent_x = gen.uniform(50, 300);
    c.extent_y = gen.uniform(50, 300);
    c.block_size = gen.uniform(10, 50);
    c.street_width = gen.uniform(1, 20);
    c.min_height = gen.uniform(1, 20);
    c.max_height = c.min_height + gen.uniform(0, 40);
    c.jitter = gen.uniform(0, 0.99);
    const SceneModel s = synth_city(c);
    check_invariants(s);
    const auto& fps = s.footprints();
    for (std::size_t a = 0; a < fps.size(); ++a)
      for (std::size_t b = a + 1; b < fps.size(); ++b) REQUIRE_FALSE(convex_overlap(fps[a].polygon, fps[b].polygon));
    for (std::size_t t = 0; t < s.triangles().size(); ++t) {
      const Vec3& n = s.face_normals()[t];
      if (s.triangles()[t].kind == SurfaceKind::Wall) REQUIRE(std::abs(n.z()) < 1e-12);
      if (s.triangles()[t].kind == SurfaceKind::Roof) REQUIRE(n.z() == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("synth city: configuration errors") {
  SynthCityConfig c;
  c.extent_x = 30;  // smaller than one block
  CHECK_THROWS_AS(synth_city(c), Error);
  SynthCityConfig d;
  d.street_width = 0;
  CHECK_THROWS_AS(d.validate(), Error);
  SynthCityConfig e;
  e.jitter = 1.0;
  CHECK_THROWS_AS(e.validate(), Error);
  SynthCityConfig f;
  f.min_height = 0;
  CHECK_THROWS_AS(f.validate(), Error);
  try {
    synth_city(c);
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::Config);
  }
}

TEST_CASE("is_inside_building: centroid, street and boundary") {
  const SceneModel s = testsupport::make_boxes({{0, 0, 10, 10, 5}, {20, 0, 30, 10, 5}});
  CHECK(is_inside_building(s, {5, 5}));
  CHECK(is_inside_building(s, {25, 5}));
  CHECK_FALSE(is_inside_building(s, {15, 5}));
  CHECK_FALSE(is_inside_building(s, {10, 5}));
  CHECK_FALSE(is_inside_building(s, {0, 0}));
  CHECK_FALSE(is_inside_building(s, {5, 10}));
  CHECK(is_inside_building(s, {1e-9, 5}));
}

TEST_CASE("is_inside_building agrees with a winding-number oracle on 10,000 points") {
  for (std::uint64_t seed : {7u, 11u, 99u}) {
    SynthCityConfig c;
    c.seed = seed;
    c.jitter = 0.6;
    const SceneModel s = synth_city(c);
    testsupport::Gen gen(seed);
    for (int n = 0; n < 10000; ++n) {
      Vec2 p(gen.uniform(-5, 205), gen.uniform(-5, 205));
      // Every tenth point is snapped onto a footprint vertex or edge midpoint.
      if (n % 10 == 0) {
        const auto& fp = s.footprints()[gen.integer(0, static_cast<int>(s.footprints().size()) - 1)];
        const auto& a = fp.polygon[gen.integer(0, static_cast<int>(fp.polygon.size()) - 1)];
        p = a;
      }
      REQUIRE(is_inside_building(s, p) == oracle_inside(s, p));
    }
  }
}

TEST_CASE("point_in_polygon_strict on a concave polygon") {
  const std::vector<Vec2> l = {{0, 0}, {4, 0}, {4, 1}, {1, 1}, {1, 4}, {0, 4}};
  CHECK(point_in_polygon_strict(l, {0.5, 3}));
  CHECK(point_in_polygon_strict(l, {3, 0.5}));
  CHECK_FALSE(point_in_polygon_strict(l, {3, 3}));
  CHECK_FALSE(point_in_polygon_strict(l, {1, 2}));
  CHECK_FALSE(point_in_polygon_strict(l, {2, 1}));
  testsupport::Gen gen(5);
  for (int n = 0; n < 10000; ++n) {
    const Vec2 p(gen.uniform(-1, 5), gen.uniform(-1, 5));
    const auto w = winding(l, p);
    REQUIRE(point_in_polygon_strict(l, p) == (!w.on_boundary && w.winding != 0));
  }
}

TEST_CASE("convex_hull drops interior and collinear points") {
  const auto h = convex_hull({{0, 0}, {2, 0}, {1, 0}, {2, 2}, {0, 2}, {1, 1}, {1, 2}});
  CHECK(h.size() == 4);
  CHECK(signed_area(h) == doctest::Approx(4.0));
}

TEST_CASE("parse_mesh: single box") {
  const SceneModel s = parse_mesh(testsupport::box_obj({0, 0, 3, 2, 7}, 1, "b"));
  CHECK(s.vertices().size() == 8);
  CHECK(s.triangles().size() == 12);
  REQUIRE(s.footprints().size() == 1);
  CHECK(s.footprints()[0].height == 7.0);
  CHECK(signed_area(s.footprints()[0].polygon) == doctest::Approx(6.0));
  int walls = 0, roofs = 0, floors = 0;
  for (const auto& t : s.triangles()) {
    walls += t.kind == SurfaceKind::Wall;
    roofs += t.kind == SurfaceKind::Roof;
    floors += t.kind == SurfaceKind::Floor;
  }
  CHECK(walls == 8);
  CHECK(roofs == 2);
  CHECK(floors == 2);
}

TEST_CASE("parse_mesh: four-box fixture city") {
  std::string obj = "# fixture\n";
  const Box boxes[4] = {{0, 0, 10, 10, 5}, {20, 0, 30, 10, 8}, {0, 20, 10, 30, 6}, {20, 20, 30, 30, 9}};
  for (int b = 0; b < 4; ++b) obj += testsupport::box_obj(boxes[b], 1 + 8 * b, "building_" + std::to_string(b));
  const SceneModel s = parse_mesh(obj);
  REQUIRE(s.footprints().size() == 4);
  CHECK(s.bounds().min_x == 0);
  CHECK(s.bounds().min_y == 0);
  CHECK(s.bounds().max_x == 30);
  CHECK(s.bounds().max_y == 30);
  for (int b = 0; b < 4; ++b) CHECK(s.footprints()[b].height == boxes[b].h);
}

TEST_CASE("parse_mesh: buildings from connected components when no groups are given") {
  std::string obj = testsupport::box_obj({0, 0, 1, 1, 1}, 1, "x") + testsupport::box_obj({5, 5, 6, 6, 2}, 9, "y");
  std::string ungrouped;
  for (std::size_t pos = 0; pos < obj.size();) {
    const auto eol = obj.find('\n', pos);
    const auto line = obj.substr(pos, eol - pos + 1);
    if (line[0] != 'o') ungrouped += line;
    pos = eol + 1;
  }
  const SceneModel s = parse_mesh(ungrouped);
  CHECK(s.footprints().size() == 2);
}

TEST_CASE("parse_mesh: errors") {
  auto kind_of = [](const std::string& text) {
    try {
      parse_mesh(text);
    } catch (const Error& e) {
      return std::make_pair(e.kind(), std::string(e.what()));
    }
    return std::make_pair(ErrorKind::Domain, std::string("no error"));
  };
  const auto beyond = kind_of("v 0 0 0\nv 1 0 0\nv 0 1 1\nf 1 2 4\n");
  CHECK(beyond.first == ErrorKind::Parse);
  CHECK(beyond.second.find("line 4") != std::string::npos);
  CHECK(kind_of("v 0 0 0\n").first == ErrorKind::Parse);
  CHECK(kind_of("v 0 0 0\n").second.find("empty") != std::string::npos);
  CHECK(kind_of("v 0 0 0\nv 1 0 0\nv 0 1 1\nv 1 1 1\nf 1 2 3 4\n").second.find("line 5") != std::string::npos);
  CHECK(kind_of("v 0 0 zero\n").second.find("line 1") != std::string::npos);
  CHECK(kind_of("v 0 0 0\nbogus 1\n").second.find("line 2") != std::string::npos);
  CHECK_THROWS_AS(load_mesh("/nonexistent/leanloc/mesh.obj"), Error);
}

TEST_CASE("mesh round-trip reproduces the model up to vertex order") {
  for (std::uint64_t seed : {1u, 7u, 42u}) {
    SynthCityConfig c;
    c.seed = seed;
    const SceneModel a = synth_city(c);
    testsupport::TempDir dir("mesh");
    write_mesh(a, dir / "city.obj");
    const SceneModel b = load_mesh(dir / "city.obj");
    CHECK(triangle_keys(a) == triangle_keys(b));
    REQUIRE(a.footprints().size() == b.footprints().size());
    for (std::size_t i = 0; i < a.footprints().size(); ++i) {
      CHECK(point_set(a.footprints()[i].polygon) == point_set(b.footprints()[i].polygon));
      CHECK(a.footprints()[i].height == b.footprints()[i].height);
    }
    CHECK(format_mesh(a) == format_mesh(b));
  }
}

TEST_CASE("scene invariants are enforced on construction") {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 1}};
  std::vector<Footprint> fp = {{{{0, 0}, {1, 0}, {0, 1}}, 1.0, 0}};
  CHECK_THROWS_AS(SceneModel(v, {{{0, 1, 3}, 0, SurfaceKind::Wall}}, fp, {0, 0, 1, 1}), Error);
  CHECK_THROWS_AS(SceneModel(v, {{{0, 1, 2}, 1, SurfaceKind::Wall}}, fp, {0, 0, 1, 1}), Error);
  CHECK_THROWS_AS(SceneModel(v, {{{0, 1, 2}, 0, SurfaceKind::Wall}}, fp, {0, 0, 0.5, 1}), Error);
  CHECK_NOTHROW(SceneModel(v, {{{0, 1, 2}, 0, SurfaceKind::Wall}}, fp, {0, 0, 1, 1}));
}

TEST_CASE("edge graph of a box") {
  const SceneModel s = testsupport::make_boxes({{0, 0, 2, 2, 3}});
  // 4 verticals, 4 wall diagonals, 4 roof rim, 1 roof diagonal, 4 ground rim.
  CHECK(s.edges().size() == 17);
  int boundary = 0, crease = 0;
  for (const auto& e : s.edges()) {
    boundary += e.faces[1] < 0;
    crease += e.crease;
    CHECK_FALSE(e.flipped);
    CHECK_FALSE(e.non_manifold);
  }
  CHECK(boundary == 4);
  CHECK(crease == 8);
}
