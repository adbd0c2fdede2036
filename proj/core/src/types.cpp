#include "drivatt/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "drivatt/errors.hpp"

namespace drivatt {

Grid::Grid(int rows, int cols, double fill) : rows_(rows), cols_(cols) {
  if (rows <= 0 || cols <= 0) throw InvalidArgument("grid dimensions must be positive");
  cells_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
}

Grid::Grid(int rows, int cols, std::vector<double> cells)
    : rows_(rows), cols_(cols), cells_(std::move(cells)) {
  if (rows <= 0 || cols <= 0) throw InvalidArgument("grid dimensions must be positive");
  if (cells_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw ShapeMismatch("grid cell count does not match rows*cols");
}

double Grid::sum() const { return std::accumulate(cells_.begin(), cells_.end(), 0.0); }

AttentionMap::AttentionMap(int height, int width, std::vector<double> values)
    : grid_(height, width, std::move(values)) {}

AttentionMap::AttentionMap(Grid grid) : grid_(std::move(grid)) {}

AttentionMap AttentionMap::uniform(int height, int width) {
  return AttentionMap(Grid(height, width, 1.0 / (static_cast<double>(height) * width)));
}

AttentionMap AttentionMap::delta(int height, int width, Cell at) {
  Grid g(height, width, 0.0);
  if (at.row < 0 || at.row >= height || at.col < 0 || at.col >= width)
    throw InvalidArgument("delta cell outside the grid");
  g(at.row, at.col) = 1.0;
  return AttentionMap(std::move(g));
}

AttentionMap AttentionMap::normalized(Grid density) {
  double total = 0.0;
  for (double v : density.cells()) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("density has negative or non-finite cells");
    total += v;
  }
  if (!(total > 0.0)) throw InvalidArgument("density has no mass");
  for (double& v : density.cells()) v /= total;
  return AttentionMap(std::move(density));
}

AttentionMap AttentionMap::normalized_or_uniform(Grid density) {
  double total = 0.0;
  for (double v : density.cells()) total += v;
  if (!(total > 0.0)) return uniform(density.rows(), density.cols());
  return normalized(std::move(density));
}

bool same_shape(const AttentionMap& a, const AttentionMap& b) {
  return a.height() == b.height() && a.width() == b.width();
}

bool validate_map(const AttentionMap& m) {
  if (m.height() <= 0 || m.width() <= 0) return false;
  double total = 0.0;
  for (double v : m.values()) {
    if (!std::isfinite(v) || v < 0.0) return false;
    total += v;
  }
  return std::abs(total - 1.0) <= kNormTolerance;
}

bool DriverState::well_formed() const {
  switch (kind) {
    case ConditionType::intention:
      return intention != Intention::none && distraction == Distraction::none;
    case ConditionType::distraction:
      return distraction != Distraction::none && intention == Intention::none;
    case ConditionType::none:
      return false;
  }
  return false;
}

int num_states(ConditionType type) {
  switch (type) {
    case ConditionType::intention: return 3;
    case ConditionType::distraction: return 2;
    case ConditionType::none: break;
  }
  throw InvalidArgument("condition type 'none' has no states");
}

int state_index(const DriverState& state) {
  if (!state.well_formed()) throw InvalidArgument("malformed driver state: " + state_label(state));
  return state.kind == ConditionType::intention ? static_cast<int>(state.intention)
                                                : static_cast<int>(state.distraction);
}

std::vector<double> one_hot(const DriverState& state) {
  const int idx = state_index(state);
  std::vector<double> v(static_cast<std::size_t>(num_states(state.kind)), 0.0);
  v[static_cast<std::size_t>(idx)] = 1.0;
  return v;
}

DriverState state_from_index(ConditionType type, int index) {
  if (index < 0 || index >= num_states(type)) throw InvalidArgument("state index out of range");
  return type == ConditionType::intention ? DriverState::of(static_cast<Intention>(index))
                                          : DriverState::of(static_cast<Distraction>(index));
}

std::vector<DriverState> all_states(ConditionType type) {
  std::vector<DriverState> out;
  for (int i = 0; i < num_states(type); ++i) out.push_back(state_from_index(type, i));
  return out;
}

std::string_view to_string(ConditionType t) {
  switch (t) {
    case ConditionType::intention: return "intention";
    case ConditionType::distraction: return "distraction";
    case ConditionType::none: return "none";
  }
  return "none";
}

std::string_view to_string(Intention i) {
  switch (i) {
    case Intention::left: return "left";
    case Intention::right: return "right";
    case Intention::forward: return "forward";
    case Intention::none: return "none";
  }
  return "none";
}

std::string_view to_string(Distraction d) {
  switch (d) {
    case Distraction::distracted: return "distracted";
    case Distraction::attentive: return "attentive";
    case Distraction::none: return "none";
  }
  return "none";
}

std::string_view to_string(DriveMode m) { return m == DriveMode::autopilot ? "autopilot" : "manual"; }

std::string state_label(const DriverState& s) {
  if (s.kind == ConditionType::intention) return std::string(to_string(s.intention));
  if (s.kind == ConditionType::distraction) return std::string(to_string(s.distraction));
  return "none";
}

ConditionType parse_condition_type(std::string_view s) {
  if (s == "intention") return ConditionType::intention;
  if (s == "distraction") return ConditionType::distraction;
  if (s == "none") return ConditionType::none;
  throw InvalidArgument("unknown condition type: " + std::string(s));
}

DriveMode parse_drive_mode(std::string_view s) {
  if (s == "autopilot") return DriveMode::autopilot;
  if (s == "manual") return DriveMode::manual;
  throw InvalidArgument("unknown drive mode: " + std::string(s));
}

float quantize_pixel(double v) {
  return byte_to_pixel(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
}

std::uint8_t pixel_to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0));
}

float byte_to_pixel(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

std::string session_problem(const SessionRecord& s) {
  std::ostringstream why;
  if (!(s.fps > 0.0)) return "fps must be positive";
  if (s.ego_positions && s.ego_positions->size() != s.frames.size())
    return "ego_positions length differs from frame count";
  const double t0 = s.frames.empty() ? 0.0 : s.frames.front().timestamp;
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    const FrameSample& f = s.frames[i];
    if (f.mode != s.mode) {
      why << "frame " << i << " mode differs from session mode";
      return why.str();
    }
    const double expected = t0 + static_cast<double>(i) / s.fps;
    if (std::abs(f.timestamp - expected) > 1e-6) {
      why << "frame " << i << " timestamp inconsistent with fps";
      return why.str();
    }
    if (!validate_map(f.gt_map)) {
      why << "frame " << i << " gt_map is not a valid attention map";
      return why.str();
    }
    if (f.webcam_map && !validate_map(*f.webcam_map)) {
      why << "frame " << i << " webcam_map is not a valid attention map";
      return why.str();
    }
    if (!(f.dist_to_intersection >= 0.0)) {
      why << "frame " << i << " has negative distance to intersection";
      return why.str();
    }
    if (!f.state.well_formed()) {
      why << "frame " << i << " has a malformed driver state";
      return why.str();
    }
  }
  return {};
}

}  // namespace drivatt
