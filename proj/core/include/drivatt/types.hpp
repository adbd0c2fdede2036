#pragma once

// Domain types shared by every drivatt module.
//
// Coordinate convention: row 0 is the top of the scene, column 0 is the
// left edge. Offsets are always (row_delta, col_delta).

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace drivatt {

// Mass tolerance used by every module when checking normalization.
inline constexpr double kNormTolerance = 1e-6;

// Default ground-truth / prediction resolution.
inline constexpr int kDefaultMapHeight = 32;
inline constexpr int kDefaultMapWidth = 64;

// Scene frames are this many pixels per attention-map cell on each axis.
inline constexpr int kSceneScale = 8;

// Marker for frames that are not near any intersection.
inline constexpr double kOpenRoad = std::numeric_limits<double>::infinity();

struct CellOffset {
  int row = 0;
  int col = 0;
  friend bool operator==(const CellOffset&, const CellOffset&) = default;
};

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Dense row-major 2D grid of reals with no normalization contract.
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, double fill = 0.0);
  Grid(int rows, int cols, std::vector<double> cells);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return cells_.size(); }

  double& operator()(int r, int c) { return cells_[index(r, c)]; }
  double operator()(int r, int c) const { return cells_[index(r, c)]; }

  std::span<double> cells() { return cells_; }
  std::span<const double> cells() const { return cells_; }

  double sum() const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(c);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> cells_;
};

// Probability mass over the scene grid. Construction only checks the
// dimensions; use validate_map() to check the distribution invariants.
class AttentionMap {
 public:
  AttentionMap() = default;
  AttentionMap(int height, int width, std::vector<double> values);
  explicit AttentionMap(Grid grid);

  static AttentionMap uniform(int height, int width);
  static AttentionMap delta(int height, int width, Cell at);
  // Divides by the total mass. Throws InvalidArgument on zero or negative
  // total mass, or on negative cells.
  static AttentionMap normalized(Grid density);
  // As normalized(), but falls back to the uniform map when the grid has
  // no mass.
  static AttentionMap normalized_or_uniform(Grid density);

  int height() const { return grid_.rows(); }
  int width() const { return grid_.cols(); }
  std::size_t size() const { return grid_.size(); }

  double operator()(int r, int c) const { return grid_(r, c); }
  std::span<const double> values() const { return grid_.cells(); }
  const Grid& grid() const { return grid_; }

  friend bool operator==(const AttentionMap&, const AttentionMap&) = default;

 private:
  Grid grid_;
};

bool same_shape(const AttentionMap& a, const AttentionMap& b);

// True iff m has positive dimensions, no negative or non-finite cells and
// total mass 1 within kNormTolerance.
bool validate_map(const AttentionMap& m);

enum class EyeEvent : std::uint8_t { fixation, saccade, blink };
enum class GazeSource : std::uint8_t { tracker, webcam };

struct GazeRecord {
  double timestamp = 0.0;  // seconds
  double x = 0.0;          // [0,1], left to right
  double y = 0.0;          // [0,1], top to bottom
  bool valid = true;
  EyeEvent event = EyeEvent::fixation;
  GazeSource source = GazeSource::tracker;
};

enum class ConditionType : std::uint8_t { intention, distraction, none };
enum class Intention : std::uint8_t { left, right, forward, none };
enum class Distraction : std::uint8_t { distracted, attentive, none };
enum class DriveMode : std::uint8_t { autopilot, manual };

struct DriverState {
  ConditionType kind = ConditionType::none;
  Intention intention = Intention::none;
  Distraction distraction = Distraction::none;

  static DriverState of(Intention i) { return {ConditionType::intention, i, Distraction::none}; }
  static DriverState of(Distraction d) { return {ConditionType::distraction, Intention::none, d}; }

  bool well_formed() const;
  friend bool operator==(const DriverState&, const DriverState&) = default;
};

// Number of distinct values of a condition type (3 intentions, 2
// distraction states).
int num_states(ConditionType type);

// One-hot encoding: (left, right, forward) or (distracted, attentive).
// Throws InvalidArgument for malformed states.
std::vector<double> one_hot(const DriverState& state);
int state_index(const DriverState& state);
DriverState state_from_index(ConditionType type, int index);
std::vector<DriverState> all_states(ConditionType type);

std::string_view to_string(ConditionType t);
std::string_view to_string(Intention i);
std::string_view to_string(Distraction d);
std::string_view to_string(DriveMode m);
// "left", "distracted", ... ; "none" for empty states.
std::string state_label(const DriverState& s);

ConditionType parse_condition_type(std::string_view s);
DriveMode parse_drive_mode(std::string_view s);

// Height x width x channels scene image, interleaved, values in [0,1].
struct SceneTensor {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> data;

  SceneTensor() = default;
  SceneTensor(int h, int w, int c = 3)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, 0.0f) {}

  float& at(int r, int c, int ch) { return data[(static_cast<std::size_t>(r) * width + c) * channels + ch]; }
  float at(int r, int c, int ch) const { return data[(static_cast<std::size_t>(r) * width + c) * channels + ch]; }

  friend bool operator==(const SceneTensor&, const SceneTensor&) = default;
};

// Scene pixels are stored on a 1/255 lattice so the 8-bit session
// container reproduces them exactly.
float quantize_pixel(double v);
std::uint8_t pixel_to_byte(float v);
float byte_to_pixel(std::uint8_t b);

struct WorldPosition {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const WorldPosition&, const WorldPosition&) = default;
};

struct FrameSample {
  SceneTensor frame;
  double timestamp = 0.0;
  DriverState state;
  AttentionMap gt_map;
  std::optional<AttentionMap> webcam_map;
  double dist_to_intersection = kOpenRoad;  // meters
  DriveMode mode = DriveMode::manual;
};

struct SessionRecord {
  std::string session_id;
  double fps = 4.0;
  DriveMode mode = DriveMode::manual;
  std::vector<FrameSample> frames;
  std::optional<std::vector<WorldPosition>> ego_positions;
};

// Checks the SessionRecord / FrameSample invariants; returns an empty
// string when valid, otherwise a description of the first violation.
std::string session_problem(const SessionRecord& s);

}  // namespace drivatt
