#include <algorithm>
#include <fstream>
#include <string>

#include "doctest.h"
#include "leanloc/dataset.hpp"
#include "leanloc/error.hpp"
#include "leanloc/png_io.hpp"
#include "support.hpp"

using namespace leanloc;
namespace fs = std::filesystem;

namespace {

ManifestHeader small_header() {
  ManifestHeader h;
  h.scene.synth.extent_x = 100;
  h.scene.synth.extent_y = 100;
  h.grid.aoi = Aoi{0, 0, 100, 100};
  h.grid.step = 50;
  h.combo = Combo::EF;
  h.split_seed = 11;
  return h;
}

SampleRecord sample(std::int64_t id, Validity v, Split s = Split::Train) {
  SampleRecord r;
  r.id = id;
  r.grid = GridIndex{static_cast<int>(id), 0, 0, 0};
  r.pose = make_pose(static_cast<double>(id), 2.5, 10.0 * static_cast<double>(id), 3);
  r.label = pose_to_label(r.pose, Aoi{0, 0, 100, 100});
  r.validity = v;
  r.split = s;
  return r;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Domain;
}

std::string what_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("combo names and channel counts") {
  CHECK(channel_count(Combo::E) == 1);
  CHECK(channel_count(Combo::F) == 1);
  CHECK(channel_count(Combo::D) == 1);
  CHECK(channel_count(Combo::EF) == 2);
  CHECK(channel_count(Combo::EFD) == 3);
  for (auto c : {Combo::E, Combo::F, Combo::D, Combo::EF, Combo::EFD}) CHECK(combo_from_string(to_string(c)) == c);
  CHECK_THROWS_AS(combo_from_string("FE"), Error);
}

TEST_CASE("depth quantization endpoints and error bound") {
  const double near = 0.1, far = 1000;
  CHECK(quantize_depth(static_cast<float>(near), near, far) == 0);
  CHECK(quantize_depth(static_cast<float>(far), near, far) == 65535);
  CHECK(quantize_depth(0.0f, near, far) == 0);
  CHECK(quantize_depth(5000.0f, near, far) == 65535);
  CHECK(dequantize_depth(0, near, far) == doctest::Approx(near));
  CHECK(dequantize_depth(65535, near, far) == doctest::Approx(far));
  // Half a code step of rounding plus float storage.
  const double bound = (far - near) / 65535.0;
  testsupport::Gen gen(5);
  for (int n = 0; n < 10000; ++n) {
    const auto d = static_cast<float>(gen.uniform(near, far));
    REQUIRE(std::abs(dequantize_depth(quantize_depth(d, near, far), near, far) - d) <= bound);
  }
}

TEST_CASE("png codecs are lossless") {
  testsupport::Gen gen(6);
  Image<std::uint8_t> a(37, 11);
  for (auto& v : a.data) v = static_cast<std::uint8_t>(gen.integer(0, 255));
  CHECK(png::decode_gray8(png::encode_gray8(a)) == a);
  Image<std::uint16_t> b(13, 29);
  for (auto& v : b.data) v = static_cast<std::uint16_t>(gen.integer(0, 65535));
  CHECK(png::decode_gray16(png::encode_gray16(b)) == b);
  CHECK(png::encode_gray16(b) == png::encode_gray16(b));
  CHECK_THROWS_AS(png::decode_gray8({1, 2, 3}), Error);
  CHECK_THROWS_AS(png::decode_gray16(png::encode_gray8(a)), Error);
}

TEST_CASE("image file naming") {
  const ImageFiles f = image_files_for(42);
  CHECK(f.edge == "edge/00000042.png");
  CHECK(f.face == "face/00000042.png");
  CHECK(f.depth == "depth/00000042.png");
}

TEST_CASE("dataset write/read round trip") {
  testsupport::TempDir dir("dataset");
  const SceneModel scene = synth_city({});
  const CameraIntrinsics cam;
  const ManifestHeader header = small_header();
  std::vector<SampleRecord> records{sample(0, Validity::Valid), sample(1, Validity::NoSkyline),
                                    sample(2, Validity::Valid, Split::Validation),
                                    sample(3, Validity::Valid, Split::Test)};
  records[0].pose = make_pose(-3, 50, 0, 3);
  records[2].pose = make_pose(50, -3, 90, 0);
  records[3].pose = make_pose(25, 25.5, 45, 1.5);
  std::vector<LeanTriplet> triplets;
  for (const auto& r : records) triplets.push_back(render_triplet(scene, r.pose, cam));

  const Manifest written = write_dataset(header, records, triplets, dir.path());
  const Manifest read = read_manifest(dir.path() / kManifestFileName);
  CHECK(format_manifest(read) == format_manifest(written));
  REQUIRE(read.records.size() == records.size());
  for (std::size_t n = 0; n < records.size(); ++n) CHECK(read.records[n].sample == records[n]);
  CHECK_FALSE(read.records[1].files.has_value());
  CHECK_FALSE(fs::exists(dir.path() / "edge/00000001.png"));
  CHECK(read.header.combo == Combo::EF);
  CHECK(read.header.split_seed == 11);
  CHECK(read.header.grid.step == 50);
  CHECK_FALSE(read.header.shuffled());
  CHECK(read.find(2) == &read.records[2]);
  CHECK(read.find(99) == nullptr);
  CHECK_NOTHROW(check_integrity(read, dir.path()));

  const double bound = (cam.far - cam.near) / 65535.0;
  for (std::size_t n : {0u, 2u, 3u}) {
    const LeanTriplet back = read_triplet_images(dir.path(), read.records[n], cam);
    CHECK(back.edge.mask == triplets[n].edge.mask);
    CHECK(back.face == triplets[n].face);
    for (std::size_t i = 0; i < back.depth.size(); ++i)
      REQUIRE(std::abs(back.depth.data[i] - triplets[n].depth.data[i]) <= bound);
  }

  fs::remove(dir.path() / "face/00000002.png");
  CHECK(kind_of([&] { check_integrity(read, dir.path()); }) == ErrorKind::Integrity);
  CHECK(what_of([&] { check_integrity(read, dir.path()); }).find("face/00000002.png") != std::string::npos);
  CHECK_THROWS_AS(read_triplet_images(dir.path(), read.records[2], cam), Error);
  CHECK(kind_of([&] { read_triplet_images(dir.path(), read.records[1], cam); }) == ErrorKind::Integrity);
}

TEST_CASE("empty manifest and shuffled header round trip") {
  Manifest m;
  m.header = small_header();
  m.header.shuffle_seed = 77;
  const Manifest back = parse_manifest(format_manifest(m));
  CHECK(back.records.empty());
  CHECK(back.header.shuffle_seed == std::optional<std::uint64_t>(77));
  SceneSource mesh;
  mesh.kind = SceneSource::Kind::Mesh;
  mesh.mesh_path = "city.obj";
  m.header.scene = mesh;
  CHECK(parse_manifest(format_manifest(m)).header.scene == mesh);
}

TEST_CASE("manifest structural errors") {
  Manifest m;
  m.header = small_header();
  m.records = {{sample(0, Validity::NoSkyline), std::nullopt}, {sample(0, Validity::TooFewEdges), std::nullopt}};
  testsupport::TempDir dir("dup");
  CHECK(kind_of([&] { write_manifest(dir.path() / "m.jsonl", m); }) == ErrorKind::Integrity);

  const std::string text = format_manifest(m);
  CHECK(kind_of([&] { parse_manifest(text); }) == ErrorKind::Integrity);
  CHECK(what_of([&] { parse_manifest(text); }).find("manifest line 3") != std::string::npos);

  m.records.pop_back();
  std::string good = format_manifest(m);
  CHECK(kind_of([&] { parse_manifest(""); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse_manifest(good.substr(good.find('\n') + 1)); }) == ErrorKind::Parse);
  CHECK(what_of([&] { parse_manifest(good + "{not json\n"); }).find("manifest line 3") != std::string::npos);

  std::string bad_reason = good;
  bad_reason.replace(bad_reason.find("NoSkyline"), 9, "Cloudy");
  CHECK(kind_of([&] { parse_manifest(bad_reason); }) == ErrorKind::Parse);
  CHECK(what_of([&] { parse_manifest(bad_reason); }).find("Cloudy") != std::string::npos);

  std::string bad_version = good;
  bad_version.replace(bad_version.find("\"schema_version\":1"), 18, "\"schema_version\":9");
  CHECK(kind_of([&] { parse_manifest(bad_version); }) == ErrorKind::Parse);

  // A valid record must name its images.
  Manifest v;
  v.header = small_header();
  v.records = {{sample(4, Validity::Valid), std::nullopt}};
  CHECK(kind_of([&] { parse_manifest(format_manifest(v)); }) == ErrorKind::Parse);

  CHECK(kind_of([&] { read_manifest(dir.path() / "missing.jsonl"); }) == ErrorKind::Io);
}

TEST_CASE("stack_channels") {
  const CameraIntrinsics cam;
  LeanTriplet sky;
  sky.depth = DepthMap(4, 3, static_cast<float>(cam.far));
  sky.face = FaceImage(4, 3, 0);
  sky.edge.mask = Image<std::uint8_t>(4, 3, 0);
  const ChannelStack efd = stack_channels(sky, Combo::EFD, cam.near, cam.far);
  CHECK(efd.channels == 3);
  CHECK(efd.data.size() == 36u);
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 4; ++col) {
      CHECK(efd.at(0, col, row) == 0);
      CHECK(efd.at(1, col, row) == 0);
      CHECK(efd.at(2, col, row) == 1);
    }

  const SceneModel s = synth_city({});
  const LeanTriplet t = render_triplet(s, make_pose(-5, 100, 0, 3), cam);
  const ChannelStack ef = stack_channels(t, Combo::EF, cam.near, cam.far);
  CHECK(ef.channels == 2);
  const ChannelStack e = stack_channels(t, Combo::E, cam.near, cam.far);
  const ChannelStack f = stack_channels(t, Combo::F, cam.near, cam.far);
  const ChannelStack d = stack_channels(t, Combo::D, cam.near, cam.far);
  const ChannelStack all = stack_channels(t, Combo::EFD, cam.near, cam.far);
  for (int row = 0; row < cam.height; ++row)
    for (int col = 0; col < cam.width; ++col) {
      REQUIRE(e.at(0, col, row) == (t.edge.mask.at(col, row) ? 1.0f : 0.0f));
      REQUIRE(f.at(0, col, row) == (t.face.at(col, row) ? 1.0f : 0.0f));
      REQUIRE(ef.at(0, col, row) == e.at(0, col, row));
      REQUIRE(ef.at(1, col, row) == f.at(0, col, row));
      REQUIRE(all.at(2, col, row) == d.at(0, col, row));
      REQUIRE(d.at(0, col, row) == doctest::Approx((t.depth.at(col, row) - cam.near) / (cam.far - cam.near)));
    }
}

TEST_CASE("prediction sets") {
  PredictionSet p;
  p.manifest = "manifest.jsonl";
  p.predictions = {{3, {0.1, 0.2, 1, 0, 0, 0}}, {1, {0.5, 0.25, 0.5, 0.5, 0.5, 0.5}}};
  const PredictionSet back = parse_predictions(format_predictions(p));
  CHECK(back.manifest == p.manifest);
  CHECK(back.predictions == p.predictions);

  testsupport::TempDir dir("preds");
  write_predictions(dir.path() / "p.jsonl", p);
  CHECK(read_predictions(dir.path() / "p.jsonl").predictions == p.predictions);

  Manifest m;
  m.header = small_header();
  for (std::int64_t id : {1, 2, 3}) m.records.push_back({sample(id, Validity::NoSkyline), std::nullopt});
  CHECK_NOTHROW(check_predictions(p, m));
  PredictionSet unknown = p;
  unknown.predictions.push_back({17, {0, 0, 1, 0, 0, 0}});
  CHECK(kind_of([&] { check_predictions(unknown, m); }) == ErrorKind::Integrity);
  CHECK(what_of([&] { check_predictions(unknown, m); }).find("17") != std::string::npos);
  PredictionSet dup = p;
  dup.predictions.push_back(p.predictions[0]);
  CHECK(kind_of([&] { check_predictions(dup, m); }) == ErrorKind::Integrity);

  CHECK(kind_of([&] { parse_predictions("{\"id\":1,\"label\":[0,0,1,0,0,0]}\n"); }) == ErrorKind::Parse);
  const std::string short_label =
      format_predictions(PredictionSet{}) + "{\"id\":1,\"label\":[0,0,1,0,0]}\n";
  CHECK(what_of([&] { parse_predictions(short_label); }).find("predictions line 2") != std::string::npos);
}
