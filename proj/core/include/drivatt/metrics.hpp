#pragma once

// Distribution metrics for attention maps. All logarithms are natural.

#include <cstddef>

#include "drivatt/types.hpp"

namespace drivatt::metrics {

// KL is evaluated as D(gt || pred): prediction mass missing where the
// ground truth has mass is penalized more than spurious prediction mass.
enum class KlDirection { gt_against_prediction };
inline constexpr KlDirection kKlDirection = KlDirection::gt_against_prediction;

inline constexpr double kDefaultKlEpsilon = 1e-7;

// Largest grid (in cells) accepted by the exact EMD solver.
inline constexpr std::size_t kMaxEmdCells = 256;

struct MetricReport {
  double cc = 0.0;
  double kl = 0.0;
  double entropy = 0.0;
  std::size_t count = 0;
  // Frames where CC was defined; cc is NaN when this is zero.
  std::size_t cc_count = 0;
};

// Pearson correlation over flattened cells. Throws UndefinedMetric when
// either input has zero variance, ShapeMismatch on differing shapes.
double cc(const AttentionMap& p, const AttentionMap& q);
double cc(const Grid& p, const Grid& q);

// sum_i gt_i * ln(gt_i / (pred_i + eps) + eps), clamped at 0.
double kl(const AttentionMap& pred, const AttentionMap& gt, double epsilon = kDefaultKlEpsilon);

// -sum_i p_i ln p_i with 0 ln 0 = 0.
double entropy(const AttentionMap& p);

// Exact optimal-transport cost with Euclidean ground distance between
// cell centres (unit cell side). Inputs must have at most kMaxEmdCells
// cells; downsample larger maps first.
double emd(const AttentionMap& p, const AttentionMap& q);

// Sums mass within factor x factor blocks.
AttentionMap downsample_map(const AttentionMap& p, int factor);

// Running mean accumulator for MetricReport. Frames with a constant map
// (undefined CC) still count toward KL and entropy.
class MetricAccumulator {
 public:
  void add(const AttentionMap& pred, const AttentionMap& gt);
  std::size_t count() const { return count_; }
  // Throws InvalidArgument when nothing has been added.
  MetricReport report() const;

 private:
  double cc_sum_ = 0.0;
  std::size_t cc_count_ = 0;
  double kl_sum_ = 0.0;
  double entropy_sum_ = 0.0;
  std::size_t count_ = 0;
};

}  // namespace drivatt::metrics
