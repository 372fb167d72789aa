#include "leanloc/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "leanloc/error.hpp"
#include "leanloc/fileio.hpp"
#include "leanloc/png_io.hpp"

namespace leanloc {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Combo c) {
  switch (c) {
    case Combo::E: return "E";
    case Combo::F: return "F";
    case Combo::D: return "D";
    case Combo::EF: return "EF";
    case Combo::EFD: return "EFD";
  }
  return "?";
}

Combo combo_from_string(std::string_view s) {
  std::string upper(s);
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (auto c : {Combo::E, Combo::F, Combo::D, Combo::EF, Combo::EFD})
    if (to_string(c) == upper) return c;
  fail(ErrorKind::Config, "unknown input combo '" + std::string(s) + "' (expected E, F, D, EF or EFD)");
}

int channel_count(Combo c) {
  switch (c) {
    case Combo::E:
    case Combo::F:
    case Combo::D: return 1;
    case Combo::EF: return 2;
    case Combo::EFD: return 3;
  }
  return 0;
}

SceneModel load_scene(const SceneSource& source) {
  if (source.kind == SceneSource::Kind::Mesh) return load_mesh(source.mesh_path);
  return synth_city(source.synth);
}

const ManifestRecord* Manifest::find(std::int64_t id) const {
  for (const auto& r : records)
    if (r.sample.id == id) return &r;
  return nullptr;
}

ImageFiles image_files_for(std::int64_t id) {
  char name[32];
  std::snprintf(name, sizeof name, "%08lld.png", static_cast<long long>(id));
  return {std::string("edge/") + name, std::string("face/") + name, std::string("depth/") + name};
}

std::uint16_t quantize_depth(float depth, double near, double far) {
  const double t = (static_cast<double>(depth) - near) / (far - near);
  const double code = std::round(std::clamp(t, 0.0, 1.0) * 65535.0);
  return static_cast<std::uint16_t>(code);
}

float dequantize_depth(std::uint16_t code, double near, double far) {
  return static_cast<float>(near + (far - near) * (code / 65535.0));
}

void create_image_dirs(const fs::path& root) {
  std::error_code ec;
  for (const char* sub : {"edge", "face", "depth"}) {
    fs::create_directories(root / sub, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + (root / sub).string() + ": " + ec.message());
  }
}

ImageFiles write_triplet_images(const fs::path& root, std::int64_t id, const LeanTriplet& triplet,
                                const CameraIntrinsics& camera) {
  const ImageFiles files = image_files_for(id);

  Image<std::uint8_t> edge(triplet.edge.mask.width, triplet.edge.mask.height);
  for (std::size_t i = 0; i < edge.size(); ++i) edge.data[i] = triplet.edge.mask.data[i] ? 255 : 0;
  Image<std::uint8_t> face(triplet.face.width, triplet.face.height);
  for (std::size_t i = 0; i < face.size(); ++i) face.data[i] = triplet.face.data[i] ? 255 : 0;
  Image<std::uint16_t> depth(triplet.depth.width, triplet.depth.height);
  for (std::size_t i = 0; i < depth.size(); ++i)
    depth.data[i] = quantize_depth(triplet.depth.data[i], camera.near, camera.far);

  png::write_file(root / files.edge, png::encode_gray8(edge));
  png::write_file(root / files.face, png::encode_gray8(face));
  png::write_file(root / files.depth, png::encode_gray16(depth));
  return files;
}

LeanTriplet read_triplet_images(const fs::path& root, const ManifestRecord& record,
                                const CameraIntrinsics& camera) {
  if (!record.files) fail(ErrorKind::Integrity, "record " + std::to_string(record.sample.id) + " has no images");
  LeanTriplet t;
  t.pose = record.sample.pose;
  auto load8 = [&](const std::string& rel) {
    try {
      return png::decode_gray8(png::read_file(root / rel));
    } catch (const Error& e) {
      fail(e.kind(), (root / rel).string() + ": " + e.what());
    }
  };
  const auto edge = load8(record.files->edge);
  const auto face = load8(record.files->face);
  Image<std::uint16_t> depth;
  try {
    depth = png::decode_gray16(png::read_file(root / record.files->depth));
  } catch (const Error& e) {
    fail(e.kind(), (root / record.files->depth).string() + ": " + e.what());
  }
  t.edge.mask = Image<std::uint8_t>(edge.width, edge.height);
  for (std::size_t i = 0; i < edge.size(); ++i) t.edge.mask.data[i] = edge.data[i] ? 1 : 0;
  t.face = FaceImage(face.width, face.height);
  for (std::size_t i = 0; i < face.size(); ++i) t.face.data[i] = face.data[i] ? 1 : 0;
  t.depth = DepthMap(depth.width, depth.height);
  for (std::size_t i = 0; i < depth.size(); ++i)
    t.depth.data[i] = dequantize_depth(depth.data[i], camera.near, camera.far);
  t.edge.visible_edge_count = -1;  // not stored
  return t;
}

// ---------------------------------------------------------------------------
// JSON schema

namespace {

json scene_to_json(const SceneSource& s) {
  if (s.kind == SceneSource::Kind::Mesh) return {{"kind", "mesh"}, {"path", s.mesh_path}};
  const auto& c = s.synth;
  return {{"kind", "synth"},
          {"extent_x", c.extent_x},
          {"extent_y", c.extent_y},
          {"block_size", c.block_size},
          {"street_width", c.street_width},
          {"min_height", c.min_height},
          {"max_height", c.max_height},
          {"jitter", c.jitter},
          {"seed", c.seed}};
}

SceneSource scene_from_json(const json& j) {
  SceneSource s;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "mesh") {
    s.kind = SceneSource::Kind::Mesh;
    s.mesh_path = j.at("path").get<std::string>();
  } else if (kind == "synth") {
    auto& c = s.synth;
    c.extent_x = j.at("extent_x").get<double>();
    c.extent_y = j.at("extent_y").get<double>();
    c.block_size = j.at("block_size").get<double>();
    c.street_width = j.at("street_width").get<double>();
    c.min_height = j.at("min_height").get<double>();
    c.max_height = j.at("max_height").get<double>();
    c.jitter = j.at("jitter").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } else {
    throw std::invalid_argument("unknown scene kind '" + kind + "'");
  }
  return s;
}

json header_to_json(const ManifestHeader& h) {
  const auto& g = h.grid;
  const auto& c = h.camera;
  json j = {
      {"kind", "header"},
      {"schema_version", h.schema_version},
      {"units", "meters, degrees"},
      {"scene", scene_to_json(h.scene)},
      {"aoi", {{"x", g.aoi.x0}, {"y", g.aoi.y0}, {"width", g.aoi.width}, {"height", g.aoi.height}}},
      {"grid",
       {{"step", g.step},
        {"yaw_step", g.yaw_step},
        {"pitch_min", g.pitch_min},
        {"pitch_max", g.pitch_max},
        {"pitch_step", g.pitch_step},
        {"z", g.z},
        {"position_endpoints", "inclusive"}}},
      {"camera",
       {{"width", c.width}, {"height", c.height}, {"hfov_deg", c.hfov_deg}, {"near", c.near}, {"far", c.far}}},
      {"render",
       {{"crease_angle_deg", EdgeTolerances::kCreaseAngleDeg},
        {"depth_bias_min", EdgeTolerances::kMinDepthBias},
        {"depth_bias_relative", EdgeTolerances::kRelativeDepthBias},
        {"edge_min_pixels", EdgeTolerances::kMinVisiblePixels},
        {"min_edges", ValidityRules::kMinEdges},
        {"min_sky_fraction", static_cast<double>(ValidityRules::kSkyNumerator) / ValidityRules::kSkyDenominator},
        {"depth_encoding", "png16-linear"}}},
      {"combo", std::string(to_string(h.combo))},
      {"validation_fraction", h.validation_fraction},
      {"split_seed", h.split_seed},
      {"shuffled", h.shuffled()},
  };
  if (h.shuffle_seed) j["shuffle_seed"] = *h.shuffle_seed;
  return j;
}

ManifestHeader header_from_json(const json& j) {
  ManifestHeader h;
  h.schema_version = j.at("schema_version").get<int>();
  if (h.schema_version != kSchemaVersion)
    throw std::invalid_argument("unsupported schema version " + std::to_string(h.schema_version));
  h.scene = scene_from_json(j.at("scene"));
  const auto& a = j.at("aoi");
  h.grid.aoi = Aoi{a.at("x").get<double>(), a.at("y").get<double>(), a.at("width").get<double>(),
                   a.at("height").get<double>()};
  const auto& g = j.at("grid");
  h.grid.step = g.at("step").get<double>();
  h.grid.yaw_step = g.at("yaw_step").get<double>();
  h.grid.pitch_min = g.at("pitch_min").get<double>();
  h.grid.pitch_max = g.at("pitch_max").get<double>();
  h.grid.pitch_step = g.at("pitch_step").get<double>();
  h.grid.z = g.at("z").get<double>();
  const auto& c = j.at("camera");
  h.camera = CameraIntrinsics{c.at("width").get<int>(), c.at("height").get<int>(), c.at("hfov_deg").get<double>(),
                              c.at("near").get<double>(), c.at("far").get<double>()};
  h.combo = combo_from_string(j.at("combo").get<std::string>());
  h.validation_fraction = j.at("validation_fraction").get<double>();
  h.split_seed = j.at("split_seed").get<std::uint64_t>();
  if (j.at("shuffled").get<bool>()) h.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
  return h;
}

json label_to_json(const PoseLabel& l) { return json::array({l.x, l.y, l.q1, l.q2, l.q3, l.q4}); }

PoseLabel label_from_json(const json& j) {
  if (!j.is_array() || j.size() != 6) throw std::invalid_argument("label must be an array of 6 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>(), j[4].get<double>(), j[5].get<double>()};
}

json record_to_json(const ManifestRecord& r) {
  const auto& s = r.sample;
  json j = {{"id", s.id},
            {"grid", {s.grid.i, s.grid.j, s.grid.k, s.grid.l}},
            {"pose", {{"x", s.pose.x}, {"y", s.pose.y}, {"z", s.pose.z}, {"yaw", s.pose.yaw}, {"pitch", s.pose.pitch}}},
            {"label", label_to_json(s.label)},
            {"validity", std::string(to_string(s.validity))},
            {"split", std::string(to_string(s.split))},
            {"shuffled", s.shuffled}};
  if (r.files) j["files"] = {{"edge", r.files->edge}, {"face", r.files->face}, {"depth", r.files->depth}};
  return j;
}

ManifestRecord record_from_json(const json& j) {
  ManifestRecord r;
  auto& s = r.sample;
  s.id = j.at("id").get<std::int64_t>();
  const auto& g = j.at("grid");
  if (!g.is_array() || g.size() != 4) throw std::invalid_argument("grid must be an array of 4 integers");
  s.grid = GridIndex{g[0].get<int>(), g[1].get<int>(), g[2].get<int>(), g[3].get<int>()};
  const auto& p = j.at("pose");
  s.pose = Pose{p.at("x").get<double>(), p.at("y").get<double>(), p.at("z").get<double>(),
                p.at("yaw").get<double>(), p.at("pitch").get<double>()};
  s.label = label_from_json(j.at("label"));
  const auto validity = j.at("validity").get<std::string>();
  const auto v = validity_from_string(validity);
  if (!v) throw std::invalid_argument("unknown validity reason '" + validity + "'");
  s.validity = *v;
  const auto split = j.at("split").get<std::string>();
  const auto sp = split_from_string(split);
  if (!sp) throw std::invalid_argument("unknown split '" + split + "'");
  s.split = *sp;
  s.shuffled = j.at("shuffled").get<bool>();
  if (j.contains("files")) {
    const auto& f = j.at("files");
    r.files = ImageFiles{f.at("edge").get<std::string>(), f.at("face").get<std::string>(),
                         f.at("depth").get<std::string>()};
  }
  if (s.validity == Validity::Valid && !r.files) throw std::invalid_argument("valid record without image files");
  return r;
}

// Calls fn(line_number, line) for each non-empty line.
template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    auto line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    fn(line_no, line);
  }
}

}  // namespace

std::string format_manifest(const Manifest& manifest) {
  std::string out = header_to_json(manifest.header).dump();
  out += '\n';
  for (const auto& r : manifest.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

Manifest parse_manifest(std::string_view text) {
  Manifest m;
  bool have_header = false;
  std::unordered_set<std::int64_t> ids;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto where = "manifest line " + std::to_string(line_no) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, where + "invalid JSON (" + e.what() + ")");
    }
    if (!have_header) {
      if (!j.is_object() || j.value("kind", "") != "header") fail(ErrorKind::Parse, where + "expected manifest header");
      try {
        m.header = header_from_json(j);
      } catch (const Error& e) {
        fail(ErrorKind::Parse, where + e.what());
      } catch (const std::exception& e) {
        fail(ErrorKind::Parse, where + "bad header (" + e.what() + ")");
      }
      have_header = true;
      return;
    }
    ManifestRecord r;
    try {
      r = record_from_json(j);
    } catch (const std::exception& e) {
      fail(ErrorKind::Parse, where + "bad record (" + e.what() + ")");
    }
    if (!ids.insert(r.sample.id).second)
      fail(ErrorKind::Integrity, where + "duplicate sample id " + std::to_string(r.sample.id));
    m.records.push_back(std::move(r));
  });
  if (!have_header) fail(ErrorKind::Parse, "manifest has no header");
  return m;
}

void write_manifest(const fs::path& file, const Manifest& manifest) {
  std::unordered_set<std::int64_t> ids;
  for (const auto& r : manifest.records)
    if (!ids.insert(r.sample.id).second)
      fail(ErrorKind::Integrity, "duplicate sample id " + std::to_string(r.sample.id));
  write_text_atomic(file, format_manifest(manifest));
}

Manifest read_manifest(const fs::path& file) {
  const auto text = read_text(file);
  try {
    return parse_manifest(text);
  } catch (const Error& e) {
    fail(e.kind(), file.string() + ": " + e.what());
  }
}

void check_integrity(const Manifest& manifest, const fs::path& root) {
  for (const auto& r : manifest.records) {
    if (!r.files) continue;
    for (const auto* rel : {&r.files->edge, &r.files->face, &r.files->depth})
      if (!fs::is_regular_file(root / *rel))
        fail(ErrorKind::Integrity, "record " + std::to_string(r.sample.id) + ": missing image file " +
                                       (root / *rel).string());
  }
}

Manifest write_dataset(const ManifestHeader& header, std::span<const SampleRecord> records,
                       std::span<const LeanTriplet> triplets, const fs::path& out_dir) {
  if (records.size() != triplets.size())
    fail(ErrorKind::Integrity, "records and triplets are not aligned");
  std::unordered_set<std::int64_t> ids;
  for (const auto& r : records)
    if (!ids.insert(r.id).second) fail(ErrorKind::Integrity, "duplicate sample id " + std::to_string(r.id));

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());
  create_image_dirs(out_dir);

  Manifest m;
  m.header = header;
  m.records.reserve(records.size());
  for (std::size_t n = 0; n < records.size(); ++n) {
    ManifestRecord r{records[n], std::nullopt};
    if (records[n].validity == Validity::Valid)
      r.files = write_triplet_images(out_dir, records[n].id, triplets[n], header.camera);
    m.records.push_back(std::move(r));
  }
  write_manifest(out_dir / kManifestFileName, m);
  return m;
}

ChannelStack stack_channels(const LeanTriplet& triplet, Combo combo, double near, double far) {
  ChannelStack out;
  out.width = triplet.face.width;
  out.height = triplet.face.height;
  out.channels = channel_count(combo);
  const std::size_t plane = static_cast<std::size_t>(out.width) * out.height;
  out.data.resize(plane * out.channels);
  const bool want_e = combo == Combo::E || combo == Combo::EF || combo == Combo::EFD;
  const bool want_f = combo == Combo::F || combo == Combo::EF || combo == Combo::EFD;
  const bool want_d = combo == Combo::D || combo == Combo::EFD;
  float* dst = out.data.data();
  if (want_e) {
    for (std::size_t i = 0; i < plane; ++i) dst[i] = triplet.edge.mask.data[i] ? 1.0f : 0.0f;
    dst += plane;
  }
  if (want_f) {
    for (std::size_t i = 0; i < plane; ++i) dst[i] = triplet.face.data[i] ? 1.0f : 0.0f;
    dst += plane;
  }
  if (want_d) {
    const double span = far - near;
    for (std::size_t i = 0; i < plane; ++i)
      dst[i] = static_cast<float>(std::clamp((triplet.depth.data[i] - near) / span, 0.0, 1.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predictions

std::string format_predictions(const PredictionSet& preds) {
  std::string out = json{{"kind", "predictions"}, {"schema_version", preds.schema_version}, {"manifest", preds.manifest}}.dump();
  out += '\n';
  for (const auto& p : preds.predictions) {
    out += json{{"id", p.id}, {"label", label_to_json(p.label)}}.dump();
    out += '\n';
  }
  return out;
}

PredictionSet parse_predictions(std::string_view text) {
  PredictionSet preds;
  bool have_header = false;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto where = "predictions line " + std::to_string(line_no) + ": ";
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("kind", "") != "predictions") fail(ErrorKind::Parse, where + "expected predictions header");
        preds.schema_version = j.at("schema_version").get<int>();
        if (preds.schema_version != kSchemaVersion)
          fail(ErrorKind::Parse, where + "unsupported schema version " + std::to_string(preds.schema_version));
        preds.manifest = j.at("manifest").get<std::string>();
        have_header = true;
        return;
      }
      preds.predictions.push_back({j.at("id").get<std::int64_t>(), label_from_json(j.at("label"))});
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(ErrorKind::Parse, where + e.what());
    }
  });
  if (!have_header) fail(ErrorKind::Parse, "predictions file has no header");
  return preds;
}

void write_predictions(const fs::path& file, const PredictionSet& preds) {
  write_text_atomic(file, format_predictions(preds));
}

PredictionSet read_predictions(const fs::path& file) {
  const auto text = read_text(file);
  try {
    return parse_predictions(text);
  } catch (const Error& e) {
    fail(e.kind(), file.string() + ": " + e.what());
  }
}

void check_predictions(const PredictionSet& preds, const Manifest& manifest) {
  std::unordered_set<std::int64_t> known;
  for (const auto& r : manifest.records) known.insert(r.sample.id);
  std::unordered_set<std::int64_t> seen;
  std::vector<std::int64_t> unknown;
  for (const auto& p : preds.predictions) {
    if (!seen.insert(p.id).second) fail(ErrorKind::Integrity, "duplicate prediction for id " + std::to_string(p.id));
    if (!known.count(p.id)) unknown.push_back(p.id);
  }
  if (!unknown.empty()) {
    std::string list;
    for (std::size_t n = 0; n < unknown.size() && n < 20; ++n) list += (n ? ", " : "") + std::to_string(unknown[n]);
    if (unknown.size() > 20) list += ", ...";
    fail(ErrorKind::Integrity, std::to_string(unknown.size()) + " predicted ids are not in the manifest: " + list);
  }
}

}  // namespace leanloc
