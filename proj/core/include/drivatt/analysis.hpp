#pragma once

// Cumulative heatmaps per driver-state value and the EMD road-risk map.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drivatt/models.hpp"
#include "drivatt/types.hpp"

namespace drivatt::analysis {

struct HeatmapConfig {
  double stride = 10.0;  // meters of ego travel per sampled frame
  double clip_max = 0.05;
};

struct ConditionHeatmap {
  Grid heatmap;            // normalized mean clipped to [0, clip_max]
  AttentionMap aggregate;  // unclipped normalized mean
  std::size_t frames = 0;
};

// One frame per `stride` meters of ego travel in each session (the first
// frame of every stride bin), then one cumulative heatmap per state value.
// Sessions need ego positions. Throws InvalidArgument when no frame of the
// requested condition type is sampled.
std::map<std::string, ConditionHeatmap> condition_heatmaps(std::span<const SessionRecord> sessions,
                                                           ConditionType condition, const HeatmapConfig& cfg = {});

struct RiskMapConfig {
  int downsample_factor = 0;  // 0 = smallest factor giving at most 256 cells
  int neighborhood = 3;       // odd side of the median window, in world cells
  double cell_size = 5.0;     // meters
};

struct RiskPoint {
  double x = 0.0;  // world cell center, meters
  double y = 0.0;
  double risk = 0.0;      // median-filtered
  double raw_mean = 0.0;  // mean risk of the timestamps in this cell
  std::size_t samples = 0;
};

// Smallest factor dividing both dimensions with at most 256 cells left.
int auto_downsample_factor(int height, int width);

// Per-timestamp EMD between the downsampled attentive and distracted
// predictions, averaged per world cell and median filtered over a square
// neighborhood of occupied cells. Sorted by (x, y).
std::vector<RiskPoint> risk_map(const models::AttentionPredictor& predictor, std::span<const SessionRecord> sessions,
                                const RiskMapConfig& cfg = {});

// Median over occupied cells in a (side x side) window around each cell.
std::vector<RiskPoint> median_filter(std::span<const RiskPoint> cells, int side, double cell_size);

// "# key=value" comment lines, then "position_x,position_y,risk".
void write_risk_table(const std::filesystem::path& path, std::span<const RiskPoint> points,
                      const std::vector<std::pair<std::string, std::string>>& header);
std::vector<RiskPoint> read_risk_table(const std::filesystem::path& path);

// Binary PPM heat-scatter of the points (blue = low, red = high risk).
void render_risk_ppm(const std::filesystem::path& path, std::span<const RiskPoint> points, int width = 640,
                     int height = 320);

}  // namespace drivatt::analysis
