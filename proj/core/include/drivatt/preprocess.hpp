#pragma once

// Raw gaze stream -> attention map conversion.

#include <span>
#include <vector>

#include "drivatt/types.hpp"

namespace drivatt::preprocess {

struct PreprocessConfig {
  double aggregation_halfwidth = 0.01;  // seconds
  double gaussian_sigma = 1.5;          // cells at the target resolution
  int target_height = kDefaultMapHeight;
  int target_width = kDefaultMapWidth;

  void validate() const;
};

struct GazePoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const GazePoint&, const GazePoint&) = default;
};

// Keeps valid fixations, preserving order.
std::vector<GazeRecord> filter_events(std::span<const GazeRecord> records);

// Coordinates of every record with |timestamp - t| <= halfwidth.
std::vector<GazePoint> aggregate_fixations(std::span<const GazeRecord> records, double t,
                                           double halfwidth);

// Isotropic Gaussian taps truncated at ceil(4 sigma), normalized to sum 1.
std::vector<double> gaussian_kernel(double sigma);

// Separable zero-padded Gaussian blur. Mass that would leave the grid is
// dropped; callers renormalize.
Grid gaussian_blur(const Grid& g, double sigma);

// Deposits unit mass per point at (floor(y*H), floor(x*W)), blurs and
// renormalizes. No points -> uniform map.
AttentionMap rasterize_and_smooth(std::span<const GazePoint> points, const PreprocessConfig& cfg);

// Full per-frame pipeline: filter, aggregate around t, rasterize.
AttentionMap frame_attention(std::span<const GazeRecord> records, double t,
                             const PreprocessConfig& cfg);

// Cell-wise mean of the maps, renormalized, clipped to [0, clip_max].
// Returns a visualization grid; clipping breaks normalization.
Grid cumulative_heatmap(std::span<const AttentionMap> maps, double clip_max);

// Cell-wise mean of the maps, renormalized (the unclipped aggregate).
AttentionMap mean_map(std::span<const AttentionMap> maps);

}  // namespace drivatt::preprocess
