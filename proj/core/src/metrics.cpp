#include "drivatt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drivatt/errors.hpp"
#include "drivatt/transport.hpp"

namespace drivatt::metrics {
namespace {

void require_same_shape(const AttentionMap& a, const AttentionMap& b) {
  if (!same_shape(a, b)) throw ShapeMismatch("attention maps differ in shape");
}

double pearson(std::span<const double> p, std::span<const double> q) {
  const double n = static_cast<double>(p.size());
  double mp = 0.0, mq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) mp += p[i], mq += q[i];
  mp /= n;
  mq /= n;
  double cov = 0.0, vp = 0.0, vq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dp = p[i] - mp, dq = q[i] - mq;
    cov += dp * dq;
    vp += dp * dp;
    vq += dq * dq;
  }
  if (!(vp > 0.0) || !(vq > 0.0)) throw UndefinedMetric("correlation is undefined for a constant map");
  return std::clamp(cov / std::sqrt(vp * vq), -1.0, 1.0);
}

}  // namespace

double cc(const AttentionMap& p, const AttentionMap& q) {
  require_same_shape(p, q);
  return pearson(p.values(), q.values());
}

double cc(const Grid& p, const Grid& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) throw ShapeMismatch("grids differ in shape");
  return pearson(p.cells(), q.cells());
}

double kl(const AttentionMap& pred, const AttentionMap& gt, double epsilon) {
  require_same_shape(pred, gt);
  if (!(epsilon > 0.0)) throw InvalidArgument("KL epsilon must be > 0");
  const auto p = pred.values();
  const auto g = gt.values();
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] > 0.0) total += g[i] * std::log(g[i] / (p[i] + epsilon) + epsilon);
  return std::max(0.0, total);
}

double entropy(const AttentionMap& p) {
  double h = 0.0;
  for (double v : p.values())
    if (v > 0.0) h -= v * std::log(v);
  return std::max(0.0, h);
}

double emd(const AttentionMap& p, const AttentionMap& q) {
  require_same_shape(p, q);
  if (p.size() > kMaxEmdCells)
    throw InvalidArgument("grid too large for exact EMD; downsample to at most 256 cells first");
  if (p == q) return 0.0;

  // With a metric ground distance, mass shared by p and q stays in place,
  // so only the positive and negative parts of p - q need transporting.
  const int w = p.width();
  const auto pv = p.values(), qv = q.values();
  std::vector<std::size_t> from, to;
  std::vector<double> supply, demand;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = pv[i] - qv[i];
    if (d > 0.0) from.push_back(i), supply.push_back(d);
    else if (d < 0.0) to.push_back(i), demand.push_back(-d);
  }
  if (supply.empty() || demand.empty()) return 0.0;
  std::vector<double> cost(from.size() * to.size());
  for (std::size_t a = 0; a < from.size(); ++a)
    for (std::size_t b = 0; b < to.size(); ++b) {
      const int i = static_cast<int>(from[a]), j = static_cast<int>(to[b]);
      const double dr = static_cast<double>(i / w - j / w);
      const double dc = static_cast<double>(i % w - j % w);
      cost[a * to.size() + b] = std::sqrt(dr * dr + dc * dc);
    }
  // Both parts carry the same mass up to rounding; the solver rescales the
  // demand side, so report the cost for the supply-side mass.
  return transport::solve(supply, demand, cost).cost;
}

AttentionMap downsample_map(const AttentionMap& p, int factor) {
  if (factor <= 0) throw InvalidArgument("downsample factor must be positive");
  if (p.height() % factor != 0 || p.width() % factor != 0)
    throw InvalidArgument("map dimensions are not divisible by the downsample factor");
  if (factor == 1) return p;
  Grid out(p.height() / factor, p.width() / factor, 0.0);
  for (int r = 0; r < p.height(); ++r)
    for (int c = 0; c < p.width(); ++c) out(r / factor, c / factor) += p(r, c);
  return AttentionMap::normalized_or_uniform(std::move(out));
}

void MetricAccumulator::add(const AttentionMap& pred, const AttentionMap& gt) {
  try {
    cc_sum_ += cc(pred, gt);
    ++cc_count_;
  } catch (const UndefinedMetric&) {
  }
  kl_sum_ += kl(pred, gt);
  entropy_sum_ += entropy(pred);
  ++count_;
}

MetricReport MetricAccumulator::report() const {
  if (count_ == 0) throw InvalidArgument("no frames were accumulated");
  const double n = static_cast<double>(count_);
  const double cc_mean =
      cc_count_ ? cc_sum_ / static_cast<double>(cc_count_) : std::numeric_limits<double>::quiet_NaN();
  return {cc_mean, kl_sum_ / n, entropy_sum_ / n, count_, cc_count_};
}

}  // namespace drivatt::metrics
