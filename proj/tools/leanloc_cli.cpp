#include <chrono>
#include <cstdio>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "leanloc/error.hpp"
#include "leanloc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace leanloc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIntegrity = 2, kIo = 3 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return kUsage;
    case ErrorKind::Io: return kIo;
    case ErrorKind::Parse:
    case ErrorKind::Integrity:
    case ErrorKind::Domain: return kIntegrity;
  }
  return kIntegrity;
}

int default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void print_counts(const char* title, const ValidityCounts& c) {
  std::printf("%s: %zu poses, %zu valid", title, c.total, c.valid());
  for (auto v : {Validity::InsideBuilding, Validity::TooFewEdges, Validity::NoSkyline}) {
    const auto it = c.by_reason.find(v);
    std::printf(", %s %zu", std::string(to_string(v)).c_str(), it == c.by_reason.end() ? 0 : it->second);
  }
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"leanloc: lean-image geo-localization datasets and metrics"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Render a dataset from an experiment config");
  std::string gen_config;
  std::string gen_out;
  int jobs = default_jobs();
  bool overwrite = false;
  bool quiet = false;
  gen->add_option("config", gen_config, "Experiment config file")->required();
  gen->add_option("-o,--out", gen_out, "Output directory (overrides [dataset] out)");
  gen->add_option("-j,--jobs", jobs, "Render threads")->check(CLI::PositiveNumber);
  gen->add_flag("--overwrite", overwrite, "Replace an existing dataset in the output directory");
  gen->add_flag("-q,--quiet", quiet, "No progress output");

  // shuffle
  auto* shuf = app.add_subcommand("shuffle", "Write a label-shuffled sibling manifest");
  std::string shuf_manifest;
  std::uint64_t shuf_seed = 0;
  shuf->add_option("manifest", shuf_manifest, "Manifest file")->required();
  shuf->add_option("-s,--seed", shuf_seed, "Shuffle seed")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score predictions against a manifest");
  std::string ev_manifest, ev_preds, ev_task = "matching", ev_report, ev_heatmap, ev_rule;
  int ppc = 8;
  ev->add_option("manifest", ev_manifest, "Manifest file")->required();
  ev->add_option("predictions", ev_preds, "Predictions file")->required();
  ev->add_option("-t,--task", ev_task, "matching or interpolation")
      ->check(CLI::IsMember({"matching", "interpolation"}));
  ev->add_option("-r,--report", ev_report, "Report JSON path (default: print only)");
  ev->add_option("--heatmap", ev_heatmap, "Heatmap output stem (.csv and .png)");
  ev->add_option("--rule", ev_rule, "Heatmap success rule: 1nn 3nn 2d_d1 2d_d3 4d_d1 4d_d3");
  ev->add_option("--cell-pixels", ppc, "Heatmap pixels per cell")->check(CLI::PositiveNumber);

  // heatmap
  auto* hm = app.add_subcommand("heatmap", "Per-position success heatmap");
  std::string hm_manifest, hm_preds, hm_out, hm_rule = "4d_d1";
  int hm_ppc = 8;
  hm->add_option("manifest", hm_manifest, "Manifest file")->required();
  hm->add_option("predictions", hm_preds, "Predictions file")->required();
  hm->add_option("-o,--out", hm_out, "Output stem (.csv and .png)")->required();
  hm->add_option("--rule", hm_rule, "Success rule: 1nn 3nn 2d_d1 2d_d3 4d_d1 4d_d3");
  hm->add_option("--cell-pixels", hm_ppc, "Pixels per cell")->check(CLI::PositiveNumber);

  // synth-city
  auto* sc = app.add_subcommand("synth-city", "Emit the procedural city as a mesh file");
  std::string sc_config, sc_out;
  SynthCityConfig city;
  sc->add_option("-c,--config", sc_config, "Take [scene] parameters from an experiment config")
      ;
  sc->add_option("-o,--out", sc_out, "Mesh output path")->required();
  sc->add_option("--extent-x", city.extent_x, "Extent along x (m)");
  sc->add_option("--extent-y", city.extent_y, "Extent along y (m)");
  sc->add_option("--block", city.block_size, "Block size (m)");
  sc->add_option("--street", city.street_width, "Street width (m)");
  sc->add_option("--min-height", city.min_height, "Minimum building height (m)");
  sc->add_option("--max-height", city.max_height, "Maximum building height (m)");
  sc->add_option("--jitter", city.jitter, "Footprint jitter, fraction of block size");
  sc->add_option("--seed", city.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      ExperimentConfig config = load_config(gen_config);
      if (!gen_out.empty()) config.out_dir = fs::absolute(gen_out).lexically_normal();
      GenerateOptions options;
      options.jobs = jobs;
      options.overwrite = overwrite;
      const auto start = std::chrono::steady_clock::now();
      if (!quiet)
        options.progress = [](std::size_t done, std::size_t total) {
          std::fprintf(stderr, "\rrendered %zu / %zu", done, total);
          if (done == total) std::fprintf(stderr, "\n");
        };
      const GenerateSummary s = generate_dataset(config, options);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      print_counts("training grid", s.training);
      print_counts("midpoints", s.midpoint);
      std::printf("splits: train %zu, validation %zu, test %zu\n", s.train_split, s.validation_split,
                  s.test_split);
      const std::size_t n = s.training.total + s.midpoint.total;
      std::printf("%zu poses in %.1f s (%.0f/s, %d jobs) -> %s\n", n, secs, n / std::max(secs, 1e-9), jobs,
                  config.out_dir.string().c_str());
    } else if (*shuf) {
      const fs::path out = shuffle_manifest(shuf_manifest, shuf_seed);
      std::printf("%s\n", out.string().c_str());
    } else if (*ev) {
      EvaluateOptions options;
      options.task = ev_task == "matching" ? EvalTask::Matching : EvalTask::Interpolation;
      options.report = ev_report;
      if (!ev_heatmap.empty()) options.heatmap = ev_heatmap;
      if (!ev_rule.empty()) options.heatmap_rule = success_rule_from_string(ev_rule);
      options.pixels_per_cell = ppc;
      std::cout << format_report(evaluate(ev_manifest, ev_preds, options));
    } else if (*hm) {
      const HeatmapGrid g = write_heatmap(hm_manifest, hm_preds, success_rule_from_string(hm_rule), hm_out, hm_ppc);
      std::printf("%d x %d cells -> %s.csv, %s.png\n", g.nx, g.ny, hm_out.c_str(), hm_out.c_str());
    } else if (*sc) {
      if (!sc_config.empty()) {
        const ExperimentConfig config = load_config(sc_config);
        if (config.scene.kind != SceneSource::Kind::Synth)
          fail(ErrorKind::Config, sc_config + " names a mesh scene, not a synth city");
        city = config.scene.synth;
      }
      const SceneModel scene = synth_city(city);
      write_mesh(scene, sc_out);
      std::printf("%zu buildings, %zu triangles -> %s\n", scene.footprints().size(), scene.triangles().size(),
                  sc_out.c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "leanloc: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "leanloc: %s\n", e.what());
    return kIo;
  }
  return kOk;
}
