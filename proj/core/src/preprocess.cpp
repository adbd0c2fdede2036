#include "drivatt/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "drivatt/errors.hpp"

namespace drivatt::preprocess {

void PreprocessConfig::validate() const {
  if (!(aggregation_halfwidth > 0.0)) throw InvalidArgument("aggregation_halfwidth must be > 0");
  if (!(gaussian_sigma > 0.0)) throw InvalidArgument("gaussian_sigma must be > 0");
  if (target_height <= 0 || target_width <= 0) throw InvalidArgument("target resolution must be positive");
}

std::vector<GazeRecord> filter_events(std::span<const GazeRecord> records) {
  std::vector<GazeRecord> out;
  out.reserve(records.size());
  for (const GazeRecord& r : records)
    if (r.valid && r.event == EyeEvent::fixation) out.push_back(r);
  return out;
}

std::vector<GazePoint> aggregate_fixations(std::span<const GazeRecord> records, double t,
                                           double halfwidth) {
  std::vector<GazePoint> out;
  for (const GazeRecord& r : records)
    if (std::abs(r.timestamp - t) <= halfwidth) out.push_back({r.x, r.y});
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : taps) v /= total;
  return taps;
}

Grid gaussian_blur(const Grid& g, double sigma) {
  const std::vector<double> taps = gaussian_kernel(sigma);
  const int radius = static_cast<int>(taps.size() / 2);
  const int rows = g.rows(), cols = g.cols();

  Grid horiz(rows, cols, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double v = g(r, c);
      if (v == 0.0) continue;
      const int lo = std::max(0, c - radius), hi = std::min(cols - 1, c + radius);
      for (int cc = lo; cc <= hi; ++cc) horiz(r, cc) += v * taps[static_cast<std::size_t>(cc - c + radius)];
    }

  Grid out(rows, cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    const int lo = std::max(0, r - radius), hi = std::min(rows - 1, r + radius);
    for (int rr = lo; rr <= hi; ++rr) {
      const double w = taps[static_cast<std::size_t>(rr - r + radius)];
      for (int c = 0; c < cols; ++c) out(rr, c) += w * horiz(r, c);
    }
  }
  return out;
}

AttentionMap rasterize_and_smooth(std::span<const GazePoint> points, const PreprocessConfig& cfg) {
  cfg.validate();
  const int h = cfg.target_height, w = cfg.target_width;
  if (points.empty()) return AttentionMap::uniform(h, w);

  Grid mass(h, w, 0.0);
  for (const GazePoint& p : points) {
    const int r = std::clamp(static_cast<int>(std::floor(p.y * h)), 0, h - 1);
    const int c = std::clamp(static_cast<int>(std::floor(p.x * w)), 0, w - 1);
    mass(r, c) += 1.0;
  }
  return AttentionMap::normalized_or_uniform(gaussian_blur(mass, cfg.gaussian_sigma));
}

AttentionMap frame_attention(std::span<const GazeRecord> records, double t,
                             const PreprocessConfig& cfg) {
  const std::vector<GazeRecord> fixations = filter_events(records);
  const std::vector<GazePoint> points = aggregate_fixations(fixations, t, cfg.aggregation_halfwidth);
  return rasterize_and_smooth(points, cfg);
}

AttentionMap mean_map(std::span<const AttentionMap> maps) {
  if (maps.empty()) throw InvalidArgument("cannot aggregate an empty list of maps");
  Grid acc(maps.front().height(), maps.front().width(), 0.0);
  for (const AttentionMap& m : maps) {
    if (!same_shape(m, maps.front())) throw ShapeMismatch("maps differ in shape");
    auto dst = acc.cells();
    auto src = m.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  for (double& v : acc.cells()) v /= static_cast<double>(maps.size());
  return AttentionMap::normalized_or_uniform(std::move(acc));
}

Grid cumulative_heatmap(std::span<const AttentionMap> maps, double clip_max) {
  if (!(clip_max > 0.0)) throw InvalidArgument("clip_max must be > 0");
  Grid g = mean_map(maps).grid();
  for (double& v : g.cells()) v = std::clamp(v, 0.0, clip_max);
  return g;
}

}  // namespace drivatt::preprocess
