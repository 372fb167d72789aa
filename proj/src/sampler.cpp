#include "leanloc/sampler.hpp"

#include <cmath>

#include "leanloc/error.hpp"
#include "leanloc/rng.hpp"

namespace leanloc {

namespace {

// floor(a / b) that tolerates representation error when a / b is integral.
int floor_ratio(double a, double b) { return static_cast<int>(std::floor(a / b + 1e-9)); }

bool divides(double range, double step) {
  const double r = range / step;
  return std::abs(r - std::round(r)) < 1e-9;
}

}  // namespace

void GridSpec::validate() const {
  aoi.validate();
  if (!(step > 0.0)) fail(ErrorKind::Config, "grid step must be positive");
  if (!(yaw_step > 0.0) || !divides(360.0, yaw_step)) fail(ErrorKind::Config, "yaw step must divide 360");
  if (!(pitch_step > 0.0) || !(pitch_max >= pitch_min) || !divides(pitch_max - pitch_min, pitch_step))
    fail(ErrorKind::Config, "pitch step must divide the pitch range");
}

int GridSpec::x_lines() const { return floor_ratio(aoi.width, step) + 1; }
int GridSpec::y_lines() const { return floor_ratio(aoi.height, step) + 1; }
int GridSpec::yaw_count() const { return static_cast<int>(std::lround(360.0 / yaw_step)); }
int GridSpec::pitch_lines() const { return static_cast<int>(std::lround((pitch_max - pitch_min) / pitch_step)) + 1; }

std::size_t GridSpec::training_count() const {
  return static_cast<std::size_t>(x_lines()) * y_lines() * yaw_count() * pitch_lines();
}

std::size_t GridSpec::midpoint_count() const {
  return static_cast<std::size_t>(x_lines() - 1) * (y_lines() - 1) * yaw_count() * (pitch_lines() - 1);
}

Pose grid_pose(const GridSpec& spec, const GridIndex& g) {
  return Pose{spec.aoi.x0 + g.i * spec.step, spec.aoi.y0 + g.j * spec.step, spec.z,
              g.k * spec.yaw_step, spec.pitch_min + g.l * spec.pitch_step};
}

Pose midpoint_pose(const GridSpec& spec, const GridIndex& g) {
  return Pose{spec.aoi.x0 + (g.i + 0.5) * spec.step, spec.aoi.y0 + (g.j + 0.5) * spec.step, spec.z,
              (g.k + 0.5) * spec.yaw_step, spec.pitch_min + (g.l + 0.5) * spec.pitch_step};
}

std::vector<GridSample> enumerate_grid(const GridSpec& spec) {
  spec.validate();
  std::vector<GridSample> out;
  out.reserve(spec.training_count());
  for (int i = 0; i < spec.x_lines(); ++i)
    for (int j = 0; j < spec.y_lines(); ++j)
      for (int k = 0; k < spec.yaw_count(); ++k)
        for (int l = 0; l < spec.pitch_lines(); ++l) {
          const GridIndex g{i, j, k, l};
          out.push_back({g, grid_pose(spec, g)});
        }
  return out;
}

std::vector<GridSample> midpoint_grid(const GridSpec& spec) {
  spec.validate();
  std::vector<GridSample> out;
  out.reserve(spec.midpoint_count());
  for (int i = 0; i + 1 < spec.x_lines(); ++i)
    for (int j = 0; j + 1 < spec.y_lines(); ++j)
      for (int k = 0; k < spec.yaw_count(); ++k)
        for (int l = 0; l + 1 < spec.pitch_lines(); ++l) {
          const GridIndex g{i, j, k, l};
          out.push_back({g, midpoint_pose(spec, g)});
        }
  return out;
}

std::string_view to_string(Validity v) {
  switch (v) {
    case Validity::Valid: return "valid";
    case Validity::InsideBuilding: return "InsideBuilding";
    case Validity::TooFewEdges: return "TooFewEdges";
    case Validity::NoSkyline: return "NoSkyline";
  }
  return "unknown";
}

std::optional<Validity> validity_from_string(std::string_view s) {
  for (auto v : {Validity::Valid, Validity::InsideBuilding, Validity::TooFewEdges, Validity::NoSkyline})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "unknown";
}

std::optional<Split> split_from_string(std::string_view s) {
  for (auto v : {Split::Train, Split::Validation, Split::Test})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

Validity check_validity(const SceneModel& scene, const Pose& pose, const LeanTriplet& triplet) {
  if (is_inside_building(scene, Vec2(pose.x, pose.y))) return Validity::InsideBuilding;
  if (triplet.edge.visible_edge_count < ValidityRules::kMinEdges) return Validity::TooFewEdges;
  const auto& face = triplet.face;
  int sky = 0;
  for (int col = 0; col < face.width; ++col) sky += face.at(col, 0) == 0 ? 1 : 0;
  if (sky * ValidityRules::kSkyDenominator < face.width * ValidityRules::kSkyNumerator)
    return Validity::NoSkyline;
  return Validity::Valid;
}

bool is_training_sample(const SampleRecord& r) {
  return r.validity == Validity::Valid && r.split != Split::Test;
}

void split_validation(std::vector<SampleRecord>& records, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) fail(ErrorKind::Config, "validation fraction must lie in (0, 1)");
  std::vector<std::size_t> eligible;
  for (std::size_t r = 0; r < records.size(); ++r)
    if (is_training_sample(records[r])) eligible.push_back(r);
  const auto take = static_cast<std::size_t>(std::floor(fraction * eligible.size() + 1e-9));
  Rng rng(seed);
  rng.shuffle(eligible);
  for (std::size_t n = 0; n < eligible.size(); ++n)
    records[eligible[n]].split = n < take ? Split::Validation : Split::Train;
}

void shuffle_labels(std::vector<SampleRecord>& records, std::uint64_t seed) {
  std::vector<std::size_t> eligible;
  for (std::size_t r = 0; r < records.size(); ++r)
    if (is_training_sample(records[r])) eligible.push_back(r);
  std::vector<std::size_t> source = eligible;
  Rng rng(seed);
  rng.shuffle(source);
  std::vector<PoseLabel> labels;
  labels.reserve(eligible.size());
  for (auto s : source) labels.push_back(records[s].label);
  for (std::size_t n = 0; n < eligible.size(); ++n) {
    records[eligible[n]].label = labels[n];
    records[eligible[n]].shuffled = true;
  }
}

}  // namespace leanloc
