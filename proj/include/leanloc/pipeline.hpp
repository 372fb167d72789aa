#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "leanloc/dataset.hpp"
#include "leanloc/eval.hpp"

namespace leanloc {

/// One experiment: scene, lattice, camera, input combo, seeds, output.
/// Loaded from a sectioned key/value file; see configs/ for examples.
struct ExperimentConfig {
  SceneSource scene;
  GridSpec grid;
  CameraIntrinsics camera;
  Combo combo = Combo::EFD;
  double validation_fraction = 0.1;
  std::uint64_t split_seed = 0;
  std::optional<std::uint64_t> shuffle_seed;
  std::filesystem::path out_dir;

  void validate() const;
  ManifestHeader header() const;
};

/// Relative mesh and output paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& file);

struct ValidityCounts {
  std::size_t total = 0;
  std::map<Validity, std::size_t> by_reason;

  std::size_t valid() const;
};

struct GenerateSummary {
  ValidityCounts training;  // enumerated lattice poses
  ValidityCounts midpoint;  // test poses at cell midpoints
  std::size_t train_split = 0;
  std::size_t validation_split = 0;
  std::size_t test_split = 0;
};

std::string format_summary(const GenerateSummary& s);

struct GenerateOptions {
  int jobs = 1;
  bool overwrite = false;  // replace an existing dataset in out_dir
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Renders every lattice and midpoint pose, checks validity, assigns splits
/// and writes images, manifest and summary.json; with a shuffle seed also the
/// shuffled sibling manifest. Output bytes do not depend on the job count.
GenerateSummary generate_dataset(const ExperimentConfig& config, const GenerateOptions& options);

/// Sibling manifest name for a shuffle seed.
std::filesystem::path shuffled_manifest_path(const std::filesystem::path& manifest, std::uint64_t seed);

/// Writes a shuffled copy next to `manifest` and returns its path. Refuses a
/// manifest that is already shuffled.
std::filesystem::path shuffle_manifest(const std::filesystem::path& manifest, std::uint64_t seed);

struct EvaluateOptions {
  EvalTask task = EvalTask::Matching;
  std::filesystem::path report;                    // JSON report
  std::optional<std::filesystem::path> heatmap;    // stem; writes .csv and .png
  std::optional<SuccessRule> heatmap_rule;         // default depends on task
  int pixels_per_cell = 8;
};

EvalReport evaluate(const std::filesystem::path& manifest, const std::filesystem::path& predictions,
                    const EvaluateOptions& options);

/// Heatmap only; `stem` receives .csv and .png.
HeatmapGrid write_heatmap(const std::filesystem::path& manifest, const std::filesystem::path& predictions,
                          SuccessRule rule, const std::filesystem::path& stem, int pixels_per_cell = 8);

}  // namespace leanloc
