#include "leanloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "json.hpp"

#include "leanloc/error.hpp"
#include "leanloc/png_io.hpp"

namespace leanloc {

namespace {

double wrap_degrees(double d) {
  d = std::fmod(d, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d < -180.0) d += 360.0;
  return d;
}

// Strict rank key: candidate (d, id) precedes truth (dt, truth_id).
bool precedes(double d, std::int64_t id, double dt, std::int64_t truth_id) {
  return d < dt || (d == dt && id < truth_id);
}

}  // namespace

double grid_distance_sq(const Pose& a, const Pose& b, const GridSpec& spec) {
  const double dx = (a.x - b.x) / spec.step;
  const double dy = (a.y - b.y) / spec.step;
  const double dyaw = wrap_degrees(a.yaw - b.yaw) / spec.yaw_step;
  const double dpitch = (a.pitch - b.pitch) / spec.pitch_step;
  return dx * dx + dy * dy + dyaw * dyaw + dpitch * dpitch;
}

double grid_distance(const Pose& a, const Pose& b, const GridSpec& spec) {
  return std::sqrt(grid_distance_sq(a, b, spec));
}

std::size_t rank_of_truth(const Pose& pred, std::int64_t truth_id, std::span<const Candidate> candidates,
                          const GridSpec& spec) {
  const auto truth = std::find_if(candidates.begin(), candidates.end(),
                                  [&](const Candidate& c) { return c.id == truth_id; });
  if (truth == candidates.end())
    fail(ErrorKind::Integrity, "truth id " + std::to_string(truth_id) + " is not a training sample");
  const double dt = grid_distance_sq(pred, truth->pose, spec);
  std::size_t rank = 1;
  for (const auto& c : candidates)
    if (c.id != truth_id && precedes(grid_distance_sq(pred, c.pose, spec), c.id, dt, truth_id)) ++rank;
  return rank;
}

NearestIndex::NearestIndex(std::vector<Candidate> candidates, const GridSpec& spec)
    : spec_(spec), candidates_(std::move(candidates)) {
  by_id_.resize(candidates_.size());
  std::iota(by_id_.begin(), by_id_.end(), std::size_t{0});
  std::sort(by_id_.begin(), by_id_.end(),
            [&](std::size_t a, std::size_t b) { return candidates_[a].id < candidates_[b].id; });
  for (std::size_t n = 1; n < by_id_.size(); ++n)
    if (candidates_[by_id_[n]].id == candidates_[by_id_[n - 1]].id)
      fail(ErrorKind::Integrity, "duplicate candidate id " + std::to_string(candidates_[by_id_[n]].id));
  if (candidates_.empty()) return;

  int min_x = INT32_MAX, min_y = INT32_MAX, max_x = INT32_MIN, max_y = INT32_MIN;
  for (const auto& c : candidates_) {
    const auto [bx, by] = bucket_of(c.pose);
    min_x = std::min(min_x, bx);
    min_y = std::min(min_y, by);
    max_x = std::max(max_x, bx);
    max_y = std::max(max_y, by);
  }
  bx0_ = min_x;
  by0_ = min_y;
  nbx_ = max_x - min_x + 1;
  nby_ = max_y - min_y + 1;
  buckets_.resize(static_cast<std::size_t>(nbx_) * nby_);
  for (std::uint32_t n = 0; n < candidates_.size(); ++n) {
    const auto [bx, by] = bucket_of(candidates_[n].pose);
    buckets_[static_cast<std::size_t>(by - by0_) * nbx_ + (bx - bx0_)].push_back(n);
  }
}

std::pair<int, int> NearestIndex::bucket_of(const Pose& p) const {
  const double fx = std::floor((p.x - spec_.aoi.x0) / spec_.step + 0.5);
  const double fy = std::floor((p.y - spec_.aoi.y0) / spec_.step + 0.5);
  auto clamp_int = [](double v) { return static_cast<int>(std::clamp(v, -1e9, 1e9)); };
  return {clamp_int(fx), clamp_int(fy)};
}

std::size_t NearestIndex::rank_of_truth(const Pose& pred, std::int64_t truth_id) const {
  const auto it = std::lower_bound(by_id_.begin(), by_id_.end(), truth_id,
                                   [&](std::size_t n, std::int64_t id) { return candidates_[n].id < id; });
  if (it == by_id_.end() || candidates_[*it].id != truth_id)
    fail(ErrorKind::Integrity, "truth id " + std::to_string(truth_id) + " is not a training sample");
  const double dt = grid_distance_sq(pred, candidates_[*it].pose, spec_);
  const double radius = std::sqrt(dt);

  // A candidate within grid distance `radius` is within `radius` steps on each
  // position axis, so only nearby buckets can hold competitors. Bucket keys
  // round to the nearest line, hence the extra ring.
  const double px = (pred.x - spec_.aoi.x0) / spec_.step;
  const double py = (pred.y - spec_.aoi.y0) / spec_.step;
  auto lo = [&](double c, int base) {
    return static_cast<int>(std::clamp(std::floor(c - radius) - 1.0, static_cast<double>(base), 1e9)) - base;
  };
  auto hi = [&](double c, int base, int count) {
    return static_cast<int>(std::clamp(std::ceil(c + radius) + 1.0, -1e9, static_cast<double>(base + count - 1))) - base;
  };
  const int x_lo = lo(px, bx0_), x_hi = hi(px, bx0_, nbx_);
  const int y_lo = lo(py, by0_), y_hi = hi(py, by0_, nby_);

  std::size_t rank = 1;
  for (int by = y_lo; by <= y_hi; ++by)
    for (int bx = x_lo; bx <= x_hi; ++bx)
      for (auto n : buckets_[static_cast<std::size_t>(by) * nbx_ + bx]) {
        const auto& c = candidates_[n];
        if (c.id != truth_id && precedes(grid_distance_sq(pred, c.pose, spec_), c.id, dt, truth_id)) ++rank;
      }
  return rank;
}

CubeIndex cube_of(const Pose& pose, const GridSpec& spec) {
  CubeIndex out;
  const int cells_x = std::max(1, spec.x_lines() - 1);
  const int cells_y = std::max(1, spec.y_lines() - 1);
  const int cells_pitch = std::max(1, spec.pitch_lines() - 1);
  const double fx = std::floor((pose.x - spec.aoi.x0) / spec.step);
  const double fy = std::floor((pose.y - spec.aoi.y0) / spec.step);
  out.out_of_area = !spec.aoi.contains(pose.x, pose.y);
  out.cell.i = static_cast<int>(std::clamp(fx, 0.0, cells_x - 1.0));
  out.cell.j = static_cast<int>(std::clamp(fy, 0.0, cells_y - 1.0));
  const int yaw_cells = spec.yaw_count();
  const auto k = static_cast<long long>(std::floor(normalize_yaw(pose.yaw) / spec.yaw_step));
  out.cell.k = static_cast<int>(((k % yaw_cells) + yaw_cells) % yaw_cells);
  const double fl = std::floor((pose.pitch - spec.pitch_min) / spec.pitch_step);
  out.cell.l = static_cast<int>(std::clamp(fl, 0.0, cells_pitch - 1.0));
  return out;
}

int manhattan_cell_distance(const GridIndex& a, const GridIndex& b, const GridSpec& spec, CellDims dims) {
  int d = std::abs(a.i - b.i) + std::abs(a.j - b.j);
  if (dims == CellDims::Full) {
    const int cycle = spec.yaw_count();
    const int dk = std::abs(a.k - b.k) % cycle;
    d += std::min(dk, cycle - dk) + std::abs(a.l - b.l);
  }
  return d;
}

// ---------------------------------------------------------------------------

Pose truth_pose(const SampleRecord& record, const ManifestHeader& header) {
  if (record.shuffled) return label_to_pose(record.label, header.grid.aoi, header.grid.z);
  return record.pose;
}

namespace {

std::unordered_map<std::int64_t, PoseLabel> prediction_map(const PredictionSet& preds, const Manifest& manifest) {
  check_predictions(preds, manifest);
  std::unordered_map<std::int64_t, PoseLabel> map;
  map.reserve(preds.predictions.size());
  for (const auto& p : preds.predictions) map.emplace(p.id, p.label);
  return map;
}

void report_missing(const std::vector<std::int64_t>& missing) {
  if (missing.empty()) return;
  std::string list;
  for (std::size_t n = 0; n < missing.size() && n < 20; ++n) list += (n ? ", " : "") + std::to_string(missing[n]);
  if (missing.size() > 20) list += ", ...";
  fail(ErrorKind::Integrity, "coverage gap: " + std::to_string(missing.size()) + " ids have no prediction: " + list);
}

void fill_l2(SampleOutcome& o, const Pose& pred, const Pose& truth) {
  o.position_error = std::hypot(pred.x - truth.x, pred.y - truth.y);
  o.orientation_error =
      quat_angular_distance(yaw_pitch_to_quat(pred.yaw, pred.pitch), yaw_pitch_to_quat(truth.yaw, truth.pitch));
}

void sort_by_id(std::vector<SampleOutcome>& out) {
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
}

}  // namespace

std::vector<SampleOutcome> score_matching(const PredictionSet& preds, const Manifest& manifest) {
  const auto& header = manifest.header;
  const auto map = prediction_map(preds, manifest);
  std::vector<Candidate> candidates;
  for (const auto& r : manifest.records)
    if (is_training_sample(r.sample)) candidates.push_back({r.sample.id, truth_pose(r.sample, header)});
  const NearestIndex index(std::move(candidates), header.grid);

  std::vector<SampleOutcome> out;
  std::vector<std::int64_t> missing;
  for (const auto& r : manifest.records) {
    const auto& s = r.sample;
    if (s.validity != Validity::Valid || s.split != Split::Train) continue;
    const auto it = map.find(s.id);
    if (it == map.end()) {
      missing.push_back(s.id);
      continue;
    }
    const Pose pred = label_to_pose(it->second, header.grid.aoi, header.grid.z);
    const Pose truth = truth_pose(s, header);
    SampleOutcome o;
    o.id = s.id;
    o.grid = s.grid;
    o.rank = index.rank_of_truth(pred, s.id);
    fill_l2(o, pred, truth);
    out.push_back(o);
  }
  report_missing(missing);
  sort_by_id(out);
  return out;
}

std::vector<SampleOutcome> score_interpolation(const PredictionSet& preds, const Manifest& manifest) {
  const auto& header = manifest.header;
  const auto map = prediction_map(preds, manifest);
  std::vector<SampleOutcome> out;
  std::vector<std::int64_t> missing;
  for (const auto& r : manifest.records) {
    const auto& s = r.sample;
    if (s.validity != Validity::Valid || s.split != Split::Test) continue;
    const auto it = map.find(s.id);
    if (it == map.end()) {
      missing.push_back(s.id);
      continue;
    }
    const Pose pred = label_to_pose(it->second, header.grid.aoi, header.grid.z);
    const Pose truth = truth_pose(s, header);
    const GridIndex truth_cell = cube_of(truth, header.grid).cell;
    const GridIndex pred_cell = cube_of(pred, header.grid).cell;
    SampleOutcome o;
    o.id = s.id;
    o.grid = s.grid;
    o.planar_distance = manhattan_cell_distance(pred_cell, truth_cell, header.grid, CellDims::Planar);
    o.full_distance = manhattan_cell_distance(pred_cell, truth_cell, header.grid, CellDims::Full);
    fill_l2(o, pred, truth);
    out.push_back(o);
  }
  report_missing(missing);
  sort_by_id(out);
  return out;
}

NnFractions nn_fractions(std::span<const SampleOutcome> outcomes) {
  if (outcomes.empty()) return {};
  std::size_t n1 = 0, n3 = 0;
  for (const auto& o : outcomes) {
    n1 += o.rank == 1;
    n3 += o.rank >= 1 && o.rank <= 3;
  }
  const auto n = static_cast<double>(outcomes.size());
  return {n1 / n, n3 / n};
}

InterpolationFractions interpolation_fractions(std::span<const SampleOutcome> outcomes) {
  if (outcomes.empty()) return {};
  std::size_t p1 = 0, p3 = 0, f1 = 0, f3 = 0;
  for (const auto& o : outcomes) {
    p1 += o.planar_distance == 0;
    p3 += o.planar_distance >= 0 && o.planar_distance < 3;
    f1 += o.full_distance == 0;
    f3 += o.full_distance >= 0 && o.full_distance < 3;
  }
  const auto n = static_cast<double>(outcomes.size());
  return {p1 / n, p3 / n, f1 / n, f3 / n};
}

namespace {

// Mean and median of a sorted copy, so the result does not depend on input order.
std::pair<double, double> mean_median(std::vector<double> v) {
  if (v.empty()) return {0.0, 0.0};
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  const std::size_t n = v.size();
  const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return {sum / static_cast<double>(n), median};
}

}  // namespace

L2Stats l2_stats(std::span<const SampleOutcome> outcomes) {
  std::vector<double> pos, ori;
  pos.reserve(outcomes.size());
  ori.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    pos.push_back(o.position_error);
    ori.push_back(o.orientation_error);
  }
  const auto [pm, pmed] = mean_median(std::move(pos));
  const auto [om, omed] = mean_median(std::move(ori));
  return {pm, pmed, om, omed};
}

EvalReport matching_report(const PredictionSet& preds, const Manifest& manifest) {
  const auto outcomes = score_matching(preds, manifest);
  EvalReport r;
  r.task = manifest.header.shuffled() ? 'B' : 'A';
  r.samples = outcomes.size();
  r.candidates = static_cast<std::size_t>(std::count_if(manifest.records.begin(), manifest.records.end(),
                                                        [](const auto& m) { return is_training_sample(m.sample); }));
  r.nn = nn_fractions(outcomes);
  r.l2 = l2_stats(outcomes);
  return r;
}

EvalReport interpolation_report(const PredictionSet& preds, const Manifest& manifest) {
  const auto outcomes = score_interpolation(preds, manifest);
  EvalReport r;
  r.task = 'C';
  r.samples = outcomes.size();
  r.interpolation = interpolation_fractions(outcomes);
  r.l2 = l2_stats(outcomes);
  return r;
}

L2Stats l2_report(const PredictionSet& preds, const Manifest& manifest, EvalTask task) {
  const auto outcomes =
      task == EvalTask::Matching ? score_matching(preds, manifest) : score_interpolation(preds, manifest);
  return l2_stats(outcomes);
}

std::string format_report(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["kind"] = "eval_report";
  j["schema_version"] = kSchemaVersion;
  j["task"] = std::string(1, report.task);
  j["samples"] = report.samples;
  if (report.nn) {
    j["candidates"] = report.candidates;
    j["nn"] = {{"1nn", report.nn->nn1}, {"3nn", report.nn->nn3}};
  }
  if (report.interpolation) {
    const auto& f = *report.interpolation;
    j["interpolation"] = {{"2d_d_lt_1", f.planar_d1}, {"2d_d_lt_3", f.planar_d3},
                          {"4d_d_lt_1", f.full_d1}, {"4d_d_lt_3", f.full_d3}};
  }
  if (report.l2) {
    const auto& l = *report.l2;
    j["l2"] = {{"position_mean_m", l.position_mean}, {"position_median_m", l.position_median},
               {"orientation_mean_deg", l.orientation_mean}, {"orientation_median_deg", l.orientation_median}};
  }
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Heatmap

std::string_view to_string(SuccessRule r) {
  switch (r) {
    case SuccessRule::Nn1: return "1nn";
    case SuccessRule::Nn3: return "3nn";
    case SuccessRule::PlanarD1: return "2d_d1";
    case SuccessRule::PlanarD3: return "2d_d3";
    case SuccessRule::FullD1: return "4d_d1";
    case SuccessRule::FullD3: return "4d_d3";
  }
  return "?";
}

SuccessRule success_rule_from_string(std::string_view s) {
  for (auto r : {SuccessRule::Nn1, SuccessRule::Nn3, SuccessRule::PlanarD1, SuccessRule::PlanarD3,
                 SuccessRule::FullD1, SuccessRule::FullD3})
    if (to_string(r) == s) return r;
  fail(ErrorKind::Config, "unknown success rule '" + std::string(s) + "'");
}

EvalTask task_for(SuccessRule r) {
  return r == SuccessRule::Nn1 || r == SuccessRule::Nn3 ? EvalTask::Matching : EvalTask::Interpolation;
}

bool is_success(const SampleOutcome& o, SuccessRule rule) {
  switch (rule) {
    case SuccessRule::Nn1: return o.rank == 1;
    case SuccessRule::Nn3: return o.rank >= 1 && o.rank <= 3;
    case SuccessRule::PlanarD1: return o.planar_distance == 0;
    case SuccessRule::PlanarD3: return o.planar_distance >= 0 && o.planar_distance < 3;
    case SuccessRule::FullD1: return o.full_distance == 0;
    case SuccessRule::FullD3: return o.full_distance >= 0 && o.full_distance < 3;
  }
  return false;
}

namespace {

// Positive-area overlap between an axis-aligned rectangle and a convex polygon
// (separating axis test; touching does not count).
bool rect_overlaps_convex(double x0, double y0, double x1, double y1, const std::vector<Vec2>& poly) {
  const Vec2 rect[4] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  auto separated_on = [&](const Vec2& axis) {
    double rmin = INFINITY, rmax = -INFINITY, pmin = INFINITY, pmax = -INFINITY;
    for (const auto& p : rect) {
      const double d = axis.dot(p);
      rmin = std::min(rmin, d);
      rmax = std::max(rmax, d);
    }
    for (const auto& p : poly) {
      const double d = axis.dot(p);
      pmin = std::min(pmin, d);
      pmax = std::max(pmax, d);
    }
    return rmax <= pmin || pmax <= rmin;
  };
  if (separated_on(Vec2::UnitX()) || separated_on(Vec2::UnitY())) return false;
  for (std::size_t n = 0; n < poly.size(); ++n) {
    const Vec2 e = poly[(n + 1) % poly.size()] - poly[n];
    if (e.squaredNorm() == 0.0) continue;
    if (separated_on(Vec2(-e.y(), e.x()))) return false;
  }
  return true;
}

}  // namespace

HeatmapGrid heatmap_from_outcomes(std::span<const SampleOutcome> outcomes, const Manifest& manifest,
                                  const SceneModel& scene, SuccessRule rule) {
  const auto& spec = manifest.header.grid;
  HeatmapGrid grid;
  grid.rule = rule;
  grid.cell = spec.step;
  if (task_for(rule) == EvalTask::Interpolation) {
    // Midpoint samples carry the index of their enclosing cell.
    grid.nx = std::max(1, spec.x_lines() - 1);
    grid.ny = std::max(1, spec.y_lines() - 1);
    grid.x0 = spec.aoi.x0;
    grid.y0 = spec.aoi.y0;
  } else {
    // Training samples sit on grid lines; each gets a cell centred on it.
    grid.nx = spec.x_lines();
    grid.ny = spec.y_lines();
    grid.x0 = spec.aoi.x0 - 0.5 * spec.step;
    grid.y0 = spec.aoi.y0 - 0.5 * spec.step;
  }
  grid.cells.assign(static_cast<std::size_t>(grid.nx) * grid.ny, {});
  for (const auto& o : outcomes) {
    if (o.grid.i < 0 || o.grid.j < 0 || o.grid.i >= grid.nx || o.grid.j >= grid.ny)
      fail(ErrorKind::Integrity, "sample " + std::to_string(o.id) + " has a grid index outside the heatmap");
    auto& cell = grid.cells[static_cast<std::size_t>(o.grid.j) * grid.nx + o.grid.i];
    cell.status = HeatmapCell::Status::Scored;
    ++cell.count;
    cell.successes += is_success(o, rule) ? 1 : 0;
  }
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      auto& cell = grid.cells[static_cast<std::size_t>(j) * grid.nx + i];
      if (cell.count > 0) continue;
      const double cx0 = grid.x0 + i * grid.cell, cy0 = grid.y0 + j * grid.cell;
      const bool building = std::any_of(scene.footprints().begin(), scene.footprints().end(), [&](const auto& fp) {
        return rect_overlaps_convex(cx0, cy0, cx0 + grid.cell, cy0 + grid.cell, fp.polygon);
      });
      cell.status = building ? HeatmapCell::Status::Building : HeatmapCell::Status::Empty;
    }
  return grid;
}

HeatmapGrid heatmap(const PredictionSet& preds, const Manifest& manifest, const SceneModel& scene, SuccessRule rule) {
  const auto outcomes = task_for(rule) == EvalTask::Matching ? score_matching(preds, manifest)
                                                             : score_interpolation(preds, manifest);
  return heatmap_from_outcomes(outcomes, manifest, scene, rule);
}

std::string format_heatmap_csv(const HeatmapGrid& grid) {
  std::string out = "i,j,x_center,y_center,status,count,successes,rate\n";
  char line[256];
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const auto& c = grid.at(i, j);
      const char* status = c.status == HeatmapCell::Status::Scored    ? "scored"
                           : c.status == HeatmapCell::Status::Building ? "building"
                                                                        : "empty";
      const double xc = grid.x0 + (i + 0.5) * grid.cell;
      const double yc = grid.y0 + (j + 0.5) * grid.cell;
      if (c.status == HeatmapCell::Status::Scored)
        std::snprintf(line, sizeof line, "%d,%d,%.6g,%.6g,%s,%d,%d,%.6f\n", i, j, xc, yc, status, c.count,
                      c.successes, c.rate());
      else
        std::snprintf(line, sizeof line, "%d,%d,%.6g,%.6g,%s,0,0,\n", i, j, xc, yc, status);
      out += line;
    }
  return out;
}

std::vector<std::uint8_t> render_heatmap_png(const HeatmapGrid& grid, int pixels_per_cell) {
  if (pixels_per_cell < 1) fail(ErrorKind::Config, "pixels per cell must be positive");
  const int w = grid.nx * pixels_per_cell;
  const int h = grid.ny * pixels_per_cell;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  auto channel = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))); };
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const auto& c = grid.at(i, j);
      std::uint8_t color[3];
      if (c.status == HeatmapCell::Status::Building) {
        color[0] = color[1] = color[2] = 255;
      } else if (c.status == HeatmapCell::Status::Empty) {
        color[0] = color[1] = color[2] = 96;
      } else {
        // Jet: blue (low) through cyan, yellow to red (high).
        const double v = c.rate();
        color[0] = channel(1.5 - std::abs(4.0 * v - 3.0));
        color[1] = channel(1.5 - std::abs(4.0 * v - 2.0));
        color[2] = channel(1.5 - std::abs(4.0 * v - 1.0));
      }
      const int row0 = (grid.ny - 1 - j) * pixels_per_cell;  // north up
      for (int r = row0; r < row0 + pixels_per_cell; ++r)
        for (int col = i * pixels_per_cell; col < (i + 1) * pixels_per_cell; ++col) {
          auto* px = &rgb[(static_cast<std::size_t>(r) * w + col) * 3];
          px[0] = color[0];
          px[1] = color[1];
          px[2] = color[2];
        }
    }
  return png::encode_rgb8(w, h, rgb);
}

}  // namespace leanloc
