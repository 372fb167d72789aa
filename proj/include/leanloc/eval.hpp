#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leanloc/dataset.hpp"
#include "leanloc/pose.hpp"
#include "leanloc/sampler.hpp"

namespace leanloc {

// ---------------------------------------------------------------------------
// Lattice metrics

/// Euclidean distance in grid steps: position / step, yaw / yaw_step (wrapped
/// to [-180, 180]) and pitch / pitch_step.
double grid_distance(const Pose& a, const Pose& b, const GridSpec& spec);
double grid_distance_sq(const Pose& a, const Pose& b, const GridSpec& spec);

struct Candidate {
  std::int64_t id = 0;
  Pose pose;
};

/// 1-based rank of the truth among all candidates ordered by grid distance to
/// `pred`; equal distances order by smaller id. Linear scan.
std::size_t rank_of_truth(const Pose& pred, std::int64_t truth_id, std::span<const Candidate> candidates,
                          const GridSpec& spec);

/// Bucketed index answering rank_of_truth without a full scan.
class NearestIndex {
 public:
  NearestIndex(std::vector<Candidate> candidates, const GridSpec& spec);

  std::size_t rank_of_truth(const Pose& pred, std::int64_t truth_id) const;
  std::size_t size() const { return candidates_.size(); }

 private:
  std::pair<int, int> bucket_of(const Pose& p) const;

  GridSpec spec_;
  std::vector<Candidate> candidates_;
  std::vector<std::size_t> by_id_;  // candidate positions sorted by id
  int bx0_ = 0, by0_ = 0, nbx_ = 0, nby_ = 0;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

struct CubeIndex {
  GridIndex cell;
  bool out_of_area = false;
};

/// Enclosing lattice cell; yaw wraps, positions and pitch clamp to border cells.
CubeIndex cube_of(const Pose& pose, const GridSpec& spec);

enum class CellDims : std::uint8_t { Planar, Full };  // 2D (x, y) or 4D (x, y, yaw, pitch)

int manhattan_cell_distance(const GridIndex& a, const GridIndex& b, const GridSpec& spec, CellDims dims);

// ---------------------------------------------------------------------------
// Reports

enum class EvalTask : std::uint8_t { Matching, Interpolation };

struct NnFractions {
  double nn1 = 0.0;
  double nn3 = 0.0;
};

struct InterpolationFractions {
  double planar_d1 = 0.0;  // 2D D<1
  double planar_d3 = 0.0;  // 2D D<3
  double full_d1 = 0.0;    // 4D D<1
  double full_d3 = 0.0;    // 4D D<3
};

struct L2Stats {
  double position_mean = 0.0;  // meters
  double position_median = 0.0;
  double orientation_mean = 0.0;  // degrees
  double orientation_median = 0.0;
};

struct EvalReport {
  char task = 'A';  // A, B (shuffled labels) or C
  std::size_t samples = 0;
  std::size_t candidates = 0;
  std::optional<NnFractions> nn;
  std::optional<InterpolationFractions> interpolation;
  std::optional<L2Stats> l2;
};

/// Per-sample scoring result; reports and heatmaps aggregate these.
struct SampleOutcome {
  std::int64_t id = 0;
  GridIndex grid;
  std::size_t rank = 0;  // matching only
  int planar_distance = -1;  // interpolation only
  int full_distance = -1;
  double position_error = 0.0;
  double orientation_error = 0.0;
};

/// Ground truth the network was trained against: the label pose for shuffled
/// records, the rendered pose otherwise.
Pose truth_pose(const SampleRecord& record, const ManifestHeader& header);

/// Scores every valid train-split record; candidates are all valid
/// training-grid samples. Fails listing ids that have no prediction.
std::vector<SampleOutcome> score_matching(const PredictionSet& preds, const Manifest& manifest);
/// Scores every valid test-split (midpoint) record.
std::vector<SampleOutcome> score_interpolation(const PredictionSet& preds, const Manifest& manifest);

NnFractions nn_fractions(std::span<const SampleOutcome> outcomes);
InterpolationFractions interpolation_fractions(std::span<const SampleOutcome> outcomes);
L2Stats l2_stats(std::span<const SampleOutcome> outcomes);

EvalReport matching_report(const PredictionSet& preds, const Manifest& manifest);
EvalReport interpolation_report(const PredictionSet& preds, const Manifest& manifest);
/// l2 statistics over the records scored by `task`.
L2Stats l2_report(const PredictionSet& preds, const Manifest& manifest, EvalTask task);

std::string format_report(const EvalReport& report);

// ---------------------------------------------------------------------------
// Heatmap

enum class SuccessRule : std::uint8_t { Nn1, Nn3, PlanarD1, PlanarD3, FullD1, FullD3 };

std::string_view to_string(SuccessRule r);
SuccessRule success_rule_from_string(std::string_view s);
EvalTask task_for(SuccessRule r);
bool is_success(const SampleOutcome& o, SuccessRule rule);

struct HeatmapCell {
  enum class Status : std::uint8_t { Scored, Empty, Building } status = Status::Empty;
  int count = 0;
  int successes = 0;
  double rate() const { return count > 0 ? static_cast<double>(successes) / count : 0.0; }
};

/// Per-position success over all orientations. Cells without scored samples
/// are Building when they overlap a footprint, Empty otherwise.
struct HeatmapGrid {
  int nx = 0, ny = 0;
  double x0 = 0.0, y0 = 0.0, cell = 0.0;  // lower-left corner of cell (0, 0) and cell size
  SuccessRule rule = SuccessRule::FullD1;
  std::vector<HeatmapCell> cells;  // row-major, j * nx + i

  const HeatmapCell& at(int i, int j) const { return cells[static_cast<std::size_t>(j) * nx + i]; }
};

HeatmapGrid heatmap(const PredictionSet& preds, const Manifest& manifest, const SceneModel& scene,
                    SuccessRule rule = SuccessRule::FullD1);
HeatmapGrid heatmap_from_outcomes(std::span<const SampleOutcome> outcomes, const Manifest& manifest,
                                  const SceneModel& scene, SuccessRule rule);

/// CSV: i,j,x_center,y_center,status,count,successes,rate
std::string format_heatmap_csv(const HeatmapGrid& grid);
/// Red = high, blue = low, white = building, gray = empty; north up.
std::vector<std::uint8_t> render_heatmap_png(const HeatmapGrid& grid, int pixels_per_cell = 8);

}  // namespace leanloc
