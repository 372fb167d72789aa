#include "leanloc/scene.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>


#include "leanloc/error.hpp"
#include "leanloc/rng.hpp"

namespace leanloc {

namespace {

constexpr double kPi = 3.14159265358979323846;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 ab = b - a;
  const Vec2 ap = p - a;
  const double scale = std::max({1.0, ab.cwiseAbs().maxCoeff(), ap.cwiseAbs().maxCoeff()});
  if (std::abs(cross2(ab, ap)) > 1e-12 * scale * scale) return false;
  const double dot = ab.dot(ap);
  return dot >= 0.0 && dot <= ab.squaredNorm();
}

}  // namespace

SceneModel::SceneModel(std::vector<Vec3> vertices, std::vector<Triangle> triangles,
                       std::vector<Footprint> footprints, Bounds2 bounds)
    : vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      footprints_(std::move(footprints)),
      bounds_(bounds) {
  for (std::size_t f = 0; f < footprints_.size(); ++f) {
    const auto& fp = footprints_[f];
    if (fp.building_id != static_cast<int>(f))
      fail(ErrorKind::Integrity, "footprint " + std::to_string(f) + " has building id " +
                                     std::to_string(fp.building_id));
    if (!(fp.height > 0.0))
      fail(ErrorKind::Integrity, "footprint " + std::to_string(f) + " has non-positive height");
    if (fp.polygon.size() < 3)
      fail(ErrorKind::Integrity, "footprint " + std::to_string(f) + " has fewer than 3 vertices");
  }
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    for (auto idx : tri.v)
      if (idx >= vertices_.size())
        fail(ErrorKind::Integrity, "triangle " + std::to_string(t) + " references vertex " +
                                       std::to_string(idx) + " beyond vertex count");
    if (tri.building_id < 0 || tri.building_id >= static_cast<int>(footprints_.size()))
      fail(ErrorKind::Integrity, "triangle " + std::to_string(t) + " references unknown building " +
                                     std::to_string(tri.building_id));
  }
  for (const auto& v : vertices_)
    if (!bounds_.contains(v.head<2>()))
      fail(ErrorKind::Integrity, "scene bounds do not contain every vertex");
  build_derived();
}

void SceneModel::build_derived() {
  normals_.resize(triangles_.size());
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    const Vec3 n = (vertices_[tri.v[1]] - vertices_[tri.v[0]])
                       .cross(vertices_[tri.v[2]] - vertices_[tri.v[0]]);
    const double len = n.norm();
    normals_[t] = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
  }

  // Weld vertices that share a position so adjacency survives duplicated
  // vertices in loaded meshes.
  std::vector<std::uint32_t> weld(vertices_.size());
  {
    std::map<std::tuple<double, double, double>, std::uint32_t> seen;
    for (std::uint32_t i = 0; i < vertices_.size(); ++i) {
      const auto key = std::make_tuple(vertices_[i].x(), vertices_[i].y(), vertices_[i].z());
      weld[i] = seen.emplace(key, i).first->second;
    }
  }

  struct HalfEdge {
    std::uint32_t lo, hi;
    std::int32_t face;
    bool forward;  // face traverses lo -> hi
  };
  std::vector<HalfEdge> half;
  half.reserve(triangles_.size() * 3);
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    if (normals_[t].isZero()) continue;  // degenerate triangles contribute no edges
    const auto& tri = triangles_[t];
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = weld[tri.v[k]];
      const std::uint32_t b = weld[tri.v[(k + 1) % 3]];
      if (a == b) continue;
      half.push_back({std::min(a, b), std::max(a, b), static_cast<std::int32_t>(t), a < b});
    }
  }
  std::sort(half.begin(), half.end(), [](const HalfEdge& x, const HalfEdge& y) {
    return std::tie(x.lo, x.hi, x.face) < std::tie(y.lo, y.hi, y.face);
  });

  const double cos_crease = std::cos(kCreaseAngleDeg * kPi / 180.0);
  edges_.clear();
  for (std::size_t i = 0; i < half.size();) {
    std::size_t j = i;
    while (j < half.size() && half[j].lo == half[i].lo && half[j].hi == half[i].hi) ++j;
    MeshEdge e;
    e.a = half[i].lo;
    e.b = half[i].hi;
    e.faces[0] = half[i].face;
    e.building_id = triangles_[half[i].face].building_id;
    if (j - i == 2) {
      e.faces[1] = half[i + 1].face;
      e.flipped = half[i].forward == half[i + 1].forward;
      Vec3 n1 = normals_[e.faces[1]];
      if (e.flipped) n1 = -n1;
      e.crease = normals_[e.faces[0]].dot(n1) < cos_crease;
    } else if (j - i > 2) {
      e.non_manifold = true;
    }
    edges_.push_back(e);
    i = j;
  }

  boxes_.assign(footprints_.size(), BuildingBox{Vec3::Constant(INFINITY), Vec3::Constant(-INFINITY)});
  for (const auto& tri : triangles_) {
    auto& box = boxes_[tri.building_id];
    for (auto idx : tri.v) {
      box.lo = box.lo.cwiseMin(vertices_[idx]);
      box.hi = box.hi.cwiseMax(vertices_[idx]);
    }
  }
}

void SynthCityConfig::validate() const {
  if (!(extent_x > 0.0 && extent_y > 0.0)) fail(ErrorKind::Config, "city extent must be positive");
  if (!(block_size > 0.0)) fail(ErrorKind::Config, "block size must be positive");
  if (!(street_width > 0.0)) fail(ErrorKind::Config, "street width must be positive");
  if (!(min_height > 0.0)) fail(ErrorKind::Config, "minimum building height must be positive");
  if (!(max_height >= min_height)) fail(ErrorKind::Config, "height range is inverted");
  if (!(jitter >= 0.0 && jitter < 1.0)) fail(ErrorKind::Config, "jitter must lie in [0, 1)");
}

SceneModel synth_city(const SynthCityConfig& config) {
  config.validate();
  const double pitch = config.block_size + config.street_width;
  const auto nx = static_cast<int>(std::floor((config.extent_x + config.street_width) / pitch));
  const auto ny = static_cast<int>(std::floor((config.extent_y + config.street_width) / pitch));
  if (nx < 1 || ny < 1) fail(ErrorKind::Config, "city extent is too small for a single block");

  Rng rng(config.seed);
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Footprint> footprints;
  const double max_offset = config.jitter * config.block_size / 4.0;

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x0 = i * pitch;
      const double y0 = j * pitch;
      const double x1 = x0 + config.block_size;
      const double y1 = y0 + config.block_size;
      // Each corner moves inward by less than a quarter block on both axes,
      // which keeps the quad convex and inside its block.
      double off[8];
      for (double& o : off) o = max_offset > 0.0 ? rng.uniform(0.0, max_offset) : 0.0;
      std::vector<Vec2> poly{Vec2(x0 + off[0], y0 + off[1]), Vec2(x1 - off[2], y0 + off[3]),
                             Vec2(x1 - off[4], y1 - off[5]), Vec2(x0 + off[6], y1 - off[7])};
      const double height = config.max_height > config.min_height
                                ? rng.uniform(config.min_height, config.max_height)
                                : config.min_height;
      const int id = static_cast<int>(footprints.size());

      const auto base = static_cast<std::uint32_t>(vertices.size());
      const auto n = static_cast<std::uint32_t>(poly.size());
      for (const auto& p : poly) vertices.emplace_back(p.x(), p.y(), 0.0);
      for (const auto& p : poly) vertices.emplace_back(p.x(), p.y(), height);
      for (std::uint32_t k = 0; k < n; ++k) {
        const std::uint32_t b0 = base + k, b1 = base + (k + 1) % n;
        const std::uint32_t t0 = b0 + n, t1 = b1 + n;
        triangles.push_back({{b0, b1, t1}, id, SurfaceKind::Wall});
        triangles.push_back({{b0, t1, t0}, id, SurfaceKind::Wall});
      }
      for (std::uint32_t k = 1; k + 1 < n; ++k)
        triangles.push_back({{base + n, base + n + k, base + n + k + 1}, id, SurfaceKind::Roof});

      footprints.push_back({std::move(poly), height, id});
    }
  }
  return SceneModel(std::move(vertices), std::move(triangles), std::move(footprints),
                    Bounds2{0.0, 0.0, config.extent_x, config.extent_y});
}

bool point_in_polygon_strict(std::span<const Vec2> polygon, const Vec2& point) {
  const std::size_t n = polygon.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = polygon[j];
    const Vec2& b = polygon[i];
    if (on_segment(a, b, point)) return false;
    if ((b.y() > point.y()) != (a.y() > point.y())) {
      const double x_cross = b.x() + (point.y() - b.y()) * (a.x() - b.x()) / (a.y() - b.y());
      if (point.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool is_inside_building(const SceneModel& scene, const Vec2& point) {
  const auto& boxes = scene.building_boxes();
  for (const auto& fp : scene.footprints()) {
    const auto& box = boxes[fp.building_id];
    if (box.lo.allFinite() &&
        (point.x() < box.lo.x() || point.x() > box.hi.x() || point.y() < box.lo.y() ||
         point.y() > box.hi.y()))
      continue;
    if (point_in_polygon_strict(fp.polygon, point)) return true;
  }
  return false;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> points) {
  std::sort(points.begin(), points.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) return points;
  std::vector<Vec2> hull(2 * points.size());
  std::size_t k = 0;
  for (const auto& p : points) {
    while (k >= 2 && cross2(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    const auto& p = points[i];
    while (k >= lower && cross2(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

// ---------------------------------------------------------------------------
// Mesh text format

namespace {

struct LineCursor {
  std::string_view rest;

  std::string_view next_token() {
    const auto start = rest.find_first_not_of(" \t\r");
    if (start == std::string_view::npos) {
      rest = {};
      return {};
    }
    rest.remove_prefix(start);
    const auto end = rest.find_first_of(" \t\r");
    const auto tok = rest.substr(0, end);
    rest.remove_prefix(end == std::string_view::npos ? rest.size() : end);
    return tok;
  }
};

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  fail(ErrorKind::Parse, "mesh line " + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view tok, std::size_t line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(value))
    parse_error(line, "invalid number '" + std::string(tok) + "'");
  return value;
}

std::uint32_t parse_vertex_ref(std::string_view tok, std::size_t line) {
  const auto slash = tok.find('/');
  const auto head = tok.substr(0, slash);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
  if (ec != std::errc() || ptr != head.data() + head.size())
    parse_error(line, "invalid vertex reference '" + std::string(tok) + "'");
  if (value < 1) parse_error(line, "vertex references must be positive 1-based indices");
  if (value > static_cast<long long>(UINT32_MAX)) parse_error(line, "vertex reference too large");
  return static_cast<std::uint32_t>(value - 1);
}

SurfaceKind classify(const Vec3& normal) {
  if (normal.z() > 0.5) return SurfaceKind::Roof;
  if (normal.z() < -0.5) return SurfaceKind::Floor;
  return SurfaceKind::Wall;
}

// Groups triangles by connected component over shared vertex indices.
std::vector<int> connected_components(std::size_t vertex_count, const std::vector<Triangle>& tris) {
  std::vector<std::uint32_t> parent(vertex_count);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& t : tris) {
    const auto r0 = find(t.v[0]);
    for (int k = 1; k < 3; ++k) {
      const auto r = find(t.v[k]);
      if (r != r0) parent[std::max(r, r0)] = std::min(r, r0);
    }
  }
  std::map<std::uint32_t, int> ids;
  std::vector<int> groups(tris.size());
  for (std::size_t t = 0; t < tris.size(); ++t)
    groups[t] = ids.emplace(find(tris[t].v[0]), static_cast<int>(ids.size())).first->second;
  return groups;
}

}  // namespace

SceneModel parse_mesh(std::string_view text) {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<std::size_t> face_lines;
  std::vector<int> face_group;
  int group = -1;
  int group_count = 0;
  bool saw_group = false;

  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    LineCursor cur{text.substr(0, eol)};
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);

    const auto kw = cur.next_token();
    if (kw.empty() || kw.front() == '#') continue;
    if (kw == "v") {
      double xyz[3];
      for (double& c : xyz) {
        const auto tok = cur.next_token();
        if (tok.empty()) parse_error(line_no, "vertex needs three coordinates");
        c = parse_double(tok, line_no);
      }
      vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
    } else if (kw == "f") {
      Triangle tri;
      int count = 0;
      for (auto tok = cur.next_token(); !tok.empty(); tok = cur.next_token()) {
        if (count == 3) parse_error(line_no, "only triangular faces are supported");
        tri.v[count++] = parse_vertex_ref(tok, line_no);
      }
      if (count != 3) parse_error(line_no, "face needs three vertex references");
      if (!saw_group) group = 0;
      triangles.push_back(tri);
      face_lines.push_back(line_no);
      face_group.push_back(group);
    } else if (kw == "o" || kw == "g") {
      saw_group = true;
      group = group_count++;
    } else if (kw == "vn" || kw == "vt" || kw == "s" || kw == "usemtl" || kw == "mtllib") {
      continue;  // ignored OBJ statements
    } else {
      parse_error(line_no, "unknown statement '" + std::string(kw) + "'");
    }
  }

  for (std::size_t t = 0; t < triangles.size(); ++t)
    for (auto idx : triangles[t].v)
      if (idx >= vertices.size())
        parse_error(face_lines[t], "vertex index " + std::to_string(idx + 1) +
                                       " beyond vertex count " + std::to_string(vertices.size()));
  if (triangles.empty()) fail(ErrorKind::Parse, "empty model: mesh contains no triangles");

  if (!saw_group) face_group = connected_components(vertices.size(), triangles);

  // Renumber groups densely in order of first face; empty groups vanish.
  std::map<int, int> dense;
  for (int g : face_group) dense.emplace(g, static_cast<int>(dense.size()));

  std::vector<std::vector<Vec2>> group_points(dense.size());
  std::vector<double> zmin(dense.size(), INFINITY), zmax(dense.size(), -INFINITY);
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const int id = dense[face_group[t]];
    auto& tri = triangles[t];
    tri.building_id = id;
    const Vec3 n = (vertices[tri.v[1]] - vertices[tri.v[0]]).cross(vertices[tri.v[2]] - vertices[tri.v[0]]);
    tri.kind = classify(n.norm() > 0.0 ? Vec3(n.normalized()) : Vec3::UnitX());
    for (auto idx : tri.v) {
      group_points[id].push_back(vertices[idx].head<2>());
      zmin[id] = std::min(zmin[id], vertices[idx].z());
      zmax[id] = std::max(zmax[id], vertices[idx].z());
    }
  }

  std::vector<Footprint> footprints;
  for (std::size_t id = 0; id < group_points.size(); ++id) {
    auto hull = convex_hull(std::move(group_points[id]));
    if (hull.size() < 3) fail(ErrorKind::Parse, "building group " + std::to_string(id) + " has a degenerate footprint");
    const double height = zmax[id] - zmin[id];
    if (!(height > 0.0)) fail(ErrorKind::Parse, "building group " + std::to_string(id) + " has zero height");
    footprints.push_back({std::move(hull), height, static_cast<int>(id)});
  }

  Bounds2 bounds{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (const auto& v : vertices) {
    bounds.min_x = std::min(bounds.min_x, v.x());
    bounds.min_y = std::min(bounds.min_y, v.y());
    bounds.max_x = std::max(bounds.max_x, v.x());
    bounds.max_y = std::max(bounds.max_y, v.y());
  }
  return SceneModel(std::move(vertices), std::move(triangles), std::move(footprints), bounds);
}

SceneModel load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open mesh file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_mesh(buf.str());
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

std::string format_mesh(const SceneModel& scene) {
  std::string out = "# leanloc mesh v1\n";
  for (const auto& v : scene.vertices()) {
    out += "v ";
    append_number(out, v.x());
    out += ' ';
    append_number(out, v.y());
    out += ' ';
    append_number(out, v.z());
    out += '\n';
  }
  std::vector<std::vector<std::size_t>> by_building(scene.footprints().size());
  for (std::size_t t = 0; t < scene.triangles().size(); ++t)
    by_building[scene.triangles()[t].building_id].push_back(t);
  for (std::size_t b = 0; b < by_building.size(); ++b) {
    if (by_building[b].empty()) continue;
    out += "o building_" + std::to_string(b) + "\n";
    for (auto t : by_building[b]) {
      const auto& tri = scene.triangles()[t];
      out += "f " + std::to_string(tri.v[0] + 1) + ' ' + std::to_string(tri.v[1] + 1) + ' ' +
             std::to_string(tri.v[2] + 1) + '\n';
    }
  }
  return out;
}

void write_mesh(const SceneModel& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write mesh file " + path.string());
  out << format_mesh(scene);
  if (!out) fail(ErrorKind::Io, "failed writing mesh file " + path.string());
}

}  // namespace leanloc
