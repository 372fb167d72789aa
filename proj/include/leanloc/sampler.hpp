#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "leanloc/pose.hpp"
#include "leanloc/raster.hpp"
#include "leanloc/scene.hpp"

namespace leanloc {

/// 4D sampling lattice: positions every `step` meters across the AOI
/// (endpoints inclusive), yaw over the full circle, pitch over a closed range.
struct GridSpec {
  Aoi aoi;
  double step = 20.0;
  double yaw_step = 5.0;
  double pitch_min = 0.0;
  double pitch_max = 15.0;
  double pitch_step = 3.0;
  double z = kDefaultCameraHeight;

  void validate() const;

  int x_lines() const;  // floor(width / step) + 1
  int y_lines() const;
  int yaw_count() const;    // 360 / yaw_step
  int pitch_lines() const;  // (pitch_max - pitch_min) / pitch_step + 1

  std::size_t training_count() const;
  std::size_t midpoint_count() const;

  bool operator==(const GridSpec&) const = default;
};

/// Integer lattice coordinates. For training poses (i, j, k, l) names the
/// grid line; for midpoints and cube_of it names the enclosing cell.
struct GridIndex {
  int i = 0, j = 0, k = 0, l = 0;
  bool operator==(const GridIndex&) const = default;
  auto operator<=>(const GridIndex&) const = default;
};

struct GridSample {
  GridIndex index;
  Pose pose;
};

/// Row-major in (i, j, k, l).
std::vector<GridSample> enumerate_grid(const GridSpec& spec);
std::vector<GridSample> midpoint_grid(const GridSpec& spec);

Pose grid_pose(const GridSpec& spec, const GridIndex& index);
Pose midpoint_pose(const GridSpec& spec, const GridIndex& cell);

enum class Validity : std::uint8_t { Valid, InsideBuilding, TooFewEdges, NoSkyline };

std::string_view to_string(Validity v);
std::optional<Validity> validity_from_string(std::string_view s);

struct ValidityRules {
  static constexpr int kMinEdges = 8;
  /// Sky pixels in the top row must be at least this fraction of the row.
  static constexpr int kSkyNumerator = 1;
  static constexpr int kSkyDenominator = 2;
};

/// Rules are checked in order InsideBuilding, TooFewEdges, NoSkyline; the first failure wins.
Validity check_validity(const SceneModel& scene, const Pose& pose, const LeanTriplet& triplet);

enum class Split : std::uint8_t { Train, Validation, Test };

std::string_view to_string(Split s);
std::optional<Split> split_from_string(std::string_view s);

struct SampleRecord {
  std::int64_t id = 0;
  GridIndex grid;
  Pose pose;
  PoseLabel label;
  Validity validity = Validity::Valid;
  Split split = Split::Train;
  bool shuffled = false;  // label was permuted away from this record's pose

  bool operator==(const SampleRecord&) const = default;
};

/// Valid training-grid samples (train or validation split).
bool is_training_sample(const SampleRecord& r);

/// Marks exactly floor(fraction * N) of the N valid training samples as
/// validation, uniformly at random for the seed. Other records are untouched.
void split_validation(std::vector<SampleRecord>& records, double fraction, std::uint64_t seed);

/// Permutes labels uniformly at random among the valid training samples and
/// sets their shuffle marker.
void shuffle_labels(std::vector<SampleRecord>& records, std::uint64_t seed);

}  // namespace leanloc
