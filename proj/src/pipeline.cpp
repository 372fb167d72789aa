#include "leanloc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"

#include "leanloc/error.hpp"
#include "leanloc/fileio.hpp"
#include "leanloc/png_io.hpp"

namespace leanloc {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

[[noreturn]] void config_error(const std::string& section, const std::string& key, const std::string& msg) {
  fail(ErrorKind::Config, "[" + section + "] " + key + ": " + msg);
}

template <class T>
T parse_number(const std::string& section, const std::string& key, const std::string& raw) {
  T value{};
  const char* first = raw.data();
  const char* last = raw.data() + raw.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) config_error(section, key, "not a number: '" + raw + "'");
  return value;
}

class Section {
 public:
  Section(const pt::ptree& root, std::string name, std::set<std::string> allowed)
      : name_(std::move(name)) {
    if (const auto child = root.get_child_optional(name_)) {
      tree_ = *child;
      for (const auto& [key, _] : tree_)
        if (!allowed.count(key)) config_error(name_, key, "unknown key");
    }
  }

  bool has(const std::string& key) const { return tree_.count(key) > 0; }

  std::string text(const std::string& key) const { return tree_.get<std::string>(key); }

  template <class T>
  void read(const std::string& key, T& out) const {
    if (!has(key)) return;
    if constexpr (std::is_same_v<T, std::string>)
      out = text(key);
    else
      out = parse_number<T>(name_, key, text(key));
  }

 private:
  std::string name_;
  pt::ptree tree_;
};

}  // namespace

void ExperimentConfig::validate() const {
  if (scene.kind == SceneSource::Kind::Synth) scene.synth.validate();
  if (scene.kind == SceneSource::Kind::Mesh && scene.mesh_path.empty())
    fail(ErrorKind::Config, "mesh scene needs a mesh path");
  grid.validate();
  camera.validate();
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    fail(ErrorKind::Config, "validation fraction must lie in (0, 1)");
}

ManifestHeader ExperimentConfig::header() const {
  ManifestHeader h;
  h.scene = scene;
  h.grid = grid;
  h.camera = camera;
  h.combo = combo;
  h.validation_fraction = validation_fraction;
  h.split_seed = split_seed;
  return h;
}

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
  pt::ptree root;
  try {
    std::istringstream in(text);
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::Config, "config line " + std::to_string(e.line()) + ": " + e.message());
  }
  const std::set<std::string> sections = {"scene", "aoi", "grid", "camera", "dataset"};
  for (const auto& [name, child] : root) {
    if (!sections.count(name)) fail(ErrorKind::Config, "unknown config section [" + name + "]");
    if (!child.data().empty()) fail(ErrorKind::Config, "key '" + name + "' outside any section");
  }

  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };

  ExperimentConfig c;
  const Section scene(root, "scene",
                      {"source", "mesh", "extent_x", "extent_y", "block_size", "street_width", "min_height",
                       "max_height", "jitter", "seed"});
  std::string source = scene.has("mesh") ? "mesh" : "synth";
  scene.read("source", source);
  if (source == "mesh") {
    if (!scene.has("mesh")) config_error("scene", "mesh", "required when source = mesh");
    for (const char* k : {"extent_x", "extent_y", "block_size", "street_width", "min_height", "max_height",
                          "jitter", "seed"})
      if (scene.has(k)) config_error("scene", k, "synth parameter given for a mesh scene");
    c.scene.kind = SceneSource::Kind::Mesh;
    c.scene.mesh_path = fs::absolute(resolve(scene.text("mesh"))).lexically_normal().string();
  } else if (source == "synth") {
    if (scene.has("mesh")) config_error("scene", "mesh", "given for a synth scene");
    auto& s = c.scene.synth;
    scene.read("extent_x", s.extent_x);
    scene.read("extent_y", s.extent_y);
    scene.read("block_size", s.block_size);
    scene.read("street_width", s.street_width);
    scene.read("min_height", s.min_height);
    scene.read("max_height", s.max_height);
    scene.read("jitter", s.jitter);
    scene.read("seed", s.seed);
  } else {
    config_error("scene", "source", "expected synth or mesh, got '" + source + "'");
  }

  const Section aoi(root, "aoi", {"x0", "y0", "width", "height"});
  if (c.scene.kind == SceneSource::Kind::Synth) {
    c.grid.aoi = Aoi{0.0, 0.0, c.scene.synth.extent_x, c.scene.synth.extent_y};
  } else if (!aoi.has("width") || !aoi.has("height")) {
    fail(ErrorKind::Config, "[aoi] width and height are required for a mesh scene");
  }
  aoi.read("x0", c.grid.aoi.x0);
  aoi.read("y0", c.grid.aoi.y0);
  aoi.read("width", c.grid.aoi.width);
  aoi.read("height", c.grid.aoi.height);

  const Section grid(root, "grid", {"step", "yaw_step", "pitch_min", "pitch_max", "pitch_step", "z"});
  grid.read("step", c.grid.step);
  grid.read("yaw_step", c.grid.yaw_step);
  grid.read("pitch_min", c.grid.pitch_min);
  grid.read("pitch_max", c.grid.pitch_max);
  grid.read("pitch_step", c.grid.pitch_step);
  grid.read("z", c.grid.z);

  const Section cam(root, "camera", {"width", "height", "hfov_deg", "near", "far"});
  cam.read("width", c.camera.width);
  cam.read("height", c.camera.height);
  cam.read("hfov_deg", c.camera.hfov_deg);
  cam.read("near", c.camera.near);
  cam.read("far", c.camera.far);

  const Section ds(root, "dataset", {"combo", "validation_fraction", "split_seed", "shuffle_seed", "out"});
  if (ds.has("combo")) c.combo = combo_from_string(ds.text("combo"));
  ds.read("validation_fraction", c.validation_fraction);
  ds.read("split_seed", c.split_seed);
  if (ds.has("shuffle_seed")) {
    std::uint64_t seed = 0;
    ds.read("shuffle_seed", seed);
    c.shuffle_seed = seed;
  }
  if (ds.has("out")) c.out_dir = resolve(ds.text("out")).lexically_normal();

  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& file) {
  return parse_config(read_text(file), fs::absolute(file).parent_path());
}

// ---------------------------------------------------------------------------

std::size_t ValidityCounts::valid() const {
  const auto it = by_reason.find(Validity::Valid);
  return it == by_reason.end() ? 0 : it->second;
}

std::string format_summary(const GenerateSummary& s) {
  auto counts = [](const ValidityCounts& c) {
    nlohmann::ordered_json j;
    j["total"] = c.total;
    for (auto v : {Validity::Valid, Validity::InsideBuilding, Validity::TooFewEdges, Validity::NoSkyline}) {
      const auto it = c.by_reason.find(v);
      j[std::string(to_string(v))] = it == c.by_reason.end() ? 0 : it->second;
    }
    return j;
  };
  nlohmann::ordered_json j;
  j["kind"] = "generate_summary";
  j["schema_version"] = kSchemaVersion;
  j["training_poses"] = counts(s.training);
  j["midpoint_poses"] = counts(s.midpoint);
  j["splits"] = {{"train", s.train_split}, {"validation", s.validation_split}, {"test", s.test_split}};
  return j.dump(2) + "\n";
}

namespace {

void prepare_out_dir(const fs::path& out, bool overwrite) {
  std::vector<fs::path> owned = {out / kManifestFileName, out / "summary.json", out / "edge", out / "face",
                                 out / "depth"};
  std::error_code ec;
  const std::string shuffled_prefix = fs::path(kManifestFileName).stem().string() + ".shuffled-";
  if (fs::is_directory(out, ec))
    for (const auto& entry : fs::directory_iterator(out, ec))
      if (entry.path().filename().string().starts_with(shuffled_prefix)) owned.push_back(entry.path());
  const bool existing = std::any_of(std::begin(owned), std::end(owned), [](const fs::path& p) {
    std::error_code e;
    return fs::exists(p, e);
  });
  if (existing) {
    if (!overwrite)
      fail(ErrorKind::Config, out.string() + " already holds a dataset; pass --overwrite to replace it");
    for (const auto& p : owned) {
      fs::remove_all(p, ec);
      if (ec) fail(ErrorKind::Io, "cannot remove " + p.string() + ": " + ec.message());
    }
  }
  fs::create_directories(out, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + out.string() + ": " + ec.message());
  create_image_dirs(out);
}

[[noreturn]] void rethrow_with(const std::string& stage, std::exception_ptr e) {
  try {
    std::rethrow_exception(e);
  } catch (const Error& err) {
    fail(err.kind(), stage + ": " + err.what());
  } catch (const std::exception& err) {
    fail(ErrorKind::Io, stage + ": " + err.what());
  }
}

template <class Fn>
auto with_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (...) {
    rethrow_with(stage, std::current_exception());
  }
}

}  // namespace

GenerateSummary generate_dataset(const ExperimentConfig& config, const GenerateOptions& options) {
  config.validate();
  if (config.out_dir.empty()) fail(ErrorKind::Config, "no output directory given");
  const SceneModel scene = with_stage("scene", [&] { return load_scene(config.scene); });
  const auto lattice = enumerate_grid(config.grid);
  const auto midpoints = midpoint_grid(config.grid);
  const fs::path out = config.out_dir;
  with_stage("output", [&] { prepare_out_dir(out, options.overwrite); });

  std::vector<SampleRecord> records;
  records.reserve(lattice.size() + midpoints.size());
  auto add = [&](const GridSample& g, Split split) {
    SampleRecord r;
    r.id = static_cast<std::int64_t>(records.size());
    r.grid = g.index;
    r.pose = g.pose;
    r.label = pose_to_label(g.pose, config.grid.aoi);
    r.split = split;
    records.push_back(r);
  };
  for (const auto& g : lattice) add(g, Split::Train);
  for (const auto& g : midpoints) add(g, Split::Test);

  // Render pool. Each sample's result depends only on its own pose, and each
  // worker writes only its own image files, so the output is independent of
  // scheduling.
  const std::size_t total = records.size();
  constexpr std::size_t kChunk = 32;
  std::atomic<std::size_t> next{0}, done{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::size_t error_index = total;
  std::exception_ptr error;

  auto worker = [&] {
    for (;;) {
      const std::size_t begin = next.fetch_add(kChunk);
      if (begin >= total || failed.load()) return;
      const std::size_t end = std::min(total, begin + kChunk);
      for (std::size_t n = begin; n < end; ++n) {
        auto& r = records[n];
        try {
          if (is_inside_building(scene, Vec2(r.pose.x, r.pose.y))) {
            r.validity = Validity::InsideBuilding;
          } else {
            const LeanTriplet t = render_triplet(scene, r.pose, config.camera);
            r.validity = check_validity(scene, r.pose, t);
            if (r.validity == Validity::Valid) write_triplet_images(out, r.id, t, config.camera);
          }
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (n < error_index) {
            error_index = n;
            error = std::current_exception();
          }
          failed = true;
          return;
        }
      }
      done += end - begin;
    }
  };

  const int jobs = std::max(1, options.jobs);
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    if (options.progress) {
      while (done.load() < total && !failed.load()) {
        options.progress(done.load(), total);
        std::this_thread::sleep_for(std::chrono::milliseconds(250));
      }
    }
  }
  if (error) rethrow_with("render sample " + std::to_string(records[error_index].id), error);
  if (options.progress) options.progress(total, total);

  with_stage("split", [&] { split_validation(records, config.validation_fraction, config.split_seed); });

  GenerateSummary summary;
  Manifest m;
  m.header = config.header();
  m.records.reserve(records.size());
  for (const auto& r : records) {
    auto& counts = r.split == Split::Test ? summary.midpoint : summary.training;
    ++counts.total;
    ++counts.by_reason[r.validity];
    ManifestRecord mr{r, std::nullopt};
    if (r.validity == Validity::Valid) {
      mr.files = image_files_for(r.id);
      ++(r.split == Split::Train ? summary.train_split
         : r.split == Split::Validation ? summary.validation_split
                                        : summary.test_split);
    }
    m.records.push_back(std::move(mr));
  }
  with_stage("manifest", [&] {
    write_manifest(out / kManifestFileName, m);
    write_text_atomic(out / "summary.json", format_summary(summary));
  });
  if (config.shuffle_seed)
    with_stage("shuffle", [&] { shuffle_manifest(out / kManifestFileName, *config.shuffle_seed); });
  return summary;
}

// ---------------------------------------------------------------------------

fs::path shuffled_manifest_path(const fs::path& manifest, std::uint64_t seed) {
  return manifest.parent_path() / (manifest.stem().string() + ".shuffled-" + std::to_string(seed) + ".jsonl");
}

fs::path shuffle_manifest(const fs::path& manifest, std::uint64_t seed) {
  Manifest m = read_manifest(manifest);
  if (m.header.shuffled())
    fail(ErrorKind::Integrity, manifest.string() + " is already shuffled (seed " +
                                   std::to_string(*m.header.shuffle_seed) + "); shuffle the original instead");
  std::vector<SampleRecord> records;
  records.reserve(m.records.size());
  for (const auto& r : m.records) records.push_back(r.sample);
  shuffle_labels(records, seed);
  for (std::size_t n = 0; n < records.size(); ++n) m.records[n].sample = records[n];
  m.header.shuffle_seed = seed;
  const fs::path out = shuffled_manifest_path(manifest, seed);
  write_manifest(out, m);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Loaded {
  Manifest manifest;
  PredictionSet predictions;
};

Loaded load_inputs(const fs::path& manifest, const fs::path& predictions) {
  Loaded in{read_manifest(manifest), read_predictions(predictions)};
  if (!in.predictions.manifest.empty() &&
      fs::path(in.predictions.manifest).filename() != manifest.filename())
    fail(ErrorKind::Integrity, "predictions answer '" + in.predictions.manifest + "', not " +
                                   manifest.filename().string());
  return in;
}

void ensure_parent(const fs::path& file) {
  if (!file.has_parent_path()) return;
  std::error_code ec;
  fs::create_directories(file.parent_path(), ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + file.parent_path().string() + ": " + ec.message());
}

HeatmapGrid emit_heatmap(const Loaded& in, SuccessRule rule, const fs::path& stem, int pixels_per_cell) {
  const SceneModel scene = load_scene(in.manifest.header.scene);
  const HeatmapGrid grid = heatmap(in.predictions, in.manifest, scene, rule);
  ensure_parent(stem);
  write_text_atomic(fs::path(stem.string() + ".csv"), format_heatmap_csv(grid));
  png::write_file(fs::path(stem.string() + ".png"), render_heatmap_png(grid, pixels_per_cell));
  return grid;
}

}  // namespace

EvalReport evaluate(const fs::path& manifest, const fs::path& predictions, const EvaluateOptions& options) {
  const Loaded in = load_inputs(manifest, predictions);
  const EvalReport report = options.task == EvalTask::Matching ? matching_report(in.predictions, in.manifest)
                                                               : interpolation_report(in.predictions, in.manifest);
  if (!options.report.empty()) {
    ensure_parent(options.report);
    write_text_atomic(options.report, format_report(report));
  }
  if (options.heatmap) {
    const SuccessRule rule = options.heatmap_rule.value_or(
        options.task == EvalTask::Matching ? SuccessRule::Nn1 : SuccessRule::FullD1);
    emit_heatmap(in, rule, *options.heatmap, options.pixels_per_cell);
  }
  return report;
}

HeatmapGrid write_heatmap(const fs::path& manifest, const fs::path& predictions, SuccessRule rule,
                          const fs::path& stem, int pixels_per_cell) {
  return emit_heatmap(load_inputs(manifest, predictions), rule, stem, pixels_per_cell);
}

}  // namespace leanloc
