#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace drivatt::testing {

namespace {

constexpr double kPivotEps = 1e-12;

// Tableau rows 0..m-1 are constraints, row m is the objective (reduced
// costs); the last column is the right-hand side.
struct Tableau {
  int m, n;
  std::vector<double> t;
  std::vector<int> basis;

  double& at(int r, int c) { return t[static_cast<std::size_t>(r) * (n + 1) + c]; }

  void pivot(int pr, int pc) {
    const double pv = at(pr, pc);
    for (int c = 0; c <= n; ++c) at(pr, c) /= pv;
    for (int r = 0; r <= m; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (int c = 0; c <= n; ++c) at(r, c) -= f * at(pr, c);
    }
    basis[pr] = pc;
  }

  // Minimizes the objective row over columns < active_cols.
  void run(int active_cols) {
    for (;;) {
      int pc = -1;
      for (int c = 0; c < active_cols; ++c)
        if (at(m, c) < -kPivotEps) {
          pc = c;
          break;
        }
      if (pc < 0) return;
      int pr = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m; ++r) {
        if (at(r, pc) <= kPivotEps) continue;
        const double ratio = at(r, n) / at(r, pc);
        if (ratio < best - kPivotEps || (ratio <= best + kPivotEps && pr >= 0 && basis[r] < basis[pr])) {
          best = ratio;
          pr = r;
        }
      }
      if (pr < 0) throw std::runtime_error("unbounded LP");
      pivot(pr, pc);
    }
  }
};

}  // namespace

double simplex_min(std::vector<double> a, std::vector<double> b, const std::vector<double>& c, int rows, int cols) {
  for (int r = 0; r < rows; ++r)
    if (b[r] < 0) {
      b[r] = -b[r];
      for (int k = 0; k < cols; ++k) a[static_cast<std::size_t>(r) * cols + k] *= -1;
    }
  Tableau tab{rows, cols + rows, {}, {}};
  tab.t.assign(static_cast<std::size_t>(rows + 1) * (tab.n + 1), 0.0);
  tab.basis.resize(rows);
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < cols; ++k) tab.at(r, k) = a[static_cast<std::size_t>(r) * cols + k];
    tab.at(r, cols + r) = 1.0;
    tab.at(r, tab.n) = b[r];
    tab.basis[r] = cols + r;
  }
  // Phase 1: minimize the sum of artificials.
  for (int r = 0; r < rows; ++r)
    for (int k = 0; k <= tab.n; ++k)
      if (k < cols || k == tab.n) tab.at(rows, k) -= tab.at(r, k);
  tab.run(tab.n);
  if (-tab.at(rows, tab.n) > 1e-9) throw std::runtime_error("infeasible LP");
  // Drive remaining artificials out of the basis where possible.
  for (int r = 0; r < rows; ++r) {
    if (tab.basis[r] < cols) continue;
    for (int k = 0; k < cols; ++k)
      if (std::abs(tab.at(r, k)) > 1e-9) {
        tab.pivot(r, k);
        break;
      }
  }
  // Phase 2 over the original columns.
  for (int k = 0; k <= tab.n; ++k) tab.at(rows, k) = k < cols ? c[k] : 0.0;
  for (int r = 0; r < rows; ++r) {
    const int bc = tab.basis[r];
    if (bc >= cols) continue;
    const double f = tab.at(rows, bc);
    if (f != 0.0)
      for (int k = 0; k <= tab.n; ++k) tab.at(rows, k) -= f * tab.at(r, k);
  }
  tab.run(cols);
  return -tab.at(rows, tab.n);
}

double emd_lp(const AttentionMap& p, const AttentionMap& q) {
  const int h = p.height(), w = p.width();
  const int n = h * w;
  const int vars = n * n;
  // Row sums equal p, column sums equal q. One column constraint is
  // redundant and dropped.
  const int rows = 2 * n - 1;
  std::vector<double> a(static_cast<std::size_t>(rows) * vars, 0.0), b(rows), c(vars);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int v = i * n + j;
      const double dr = i / w - j / w, dc = i % w - j % w;
      c[v] = std::sqrt(dr * dr + dc * dc);
      a[static_cast<std::size_t>(i) * vars + v] = 1.0;
      if (j < n - 1) a[static_cast<std::size_t>(n + j) * vars + v] = 1.0;
    }
  for (int i = 0; i < n; ++i) b[i] = p.values()[i];
  for (int j = 0; j < n - 1; ++j) b[n + j] = q.values()[j];
  return simplex_min(std::move(a), std::move(b), c, rows, vars);
}

nn::Tensor naive_conv2d(const nn::Tensor& x, const nn::Tensor& w, const nn::Tensor* bias, int stride, int pad) {
  const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int co = w.dim(0), k = w.dim(2);
  const int ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  nn::Tensor out({co, ho, wo});
  for (int o = 0; o < co; ++o)
    for (int r = 0; r < ho; ++r)
      for (int c = 0; c < wo; ++c) {
        double s = bias ? (*bias)[o] : 0.0;
        for (int i = 0; i < ci; ++i)
          for (int kr = 0; kr < k; ++kr)
            for (int kc = 0; kc < k; ++kc) {
              const int yr = r * stride + kr - pad, yc = c * stride + kc - pad;
              if (yr < 0 || yr >= h || yc < 0 || yc >= wd) continue;
              s += x[(static_cast<std::size_t>(i) * h + yr) * wd + yc] *
                   w[((static_cast<std::size_t>(o) * ci + i) * k + kr) * k + kc];
            }
        out[(static_cast<std::size_t>(o) * ho + r) * wo + c] = s;
      }
  return out;
}

double naive_pearson(std::span<const double> a, std::span<const double> b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

AttentionMap random_map(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Grid g(h, w);
  for (double& v : g.cells()) v = u(rng);
  return AttentionMap::normalized(g);
}

AttentionMap gaussian_blob(int h, int w, double row, double col, double sigma) {
  Grid g(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      g(r, c) = std::exp(-((r - row) * (r - row) + (c - col) * (c - col)) / (2 * sigma * sigma));
  return AttentionMap::normalized(g);
}

nn::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  nn::Tensor t(std::move(shape));
  for (double& v : t.data()) v = n(rng);
  return t;
}

double max_abs_diff(const nn::Tensor& a, const nn::Tensor& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

SceneTensor pattern_frame(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SceneTensor s(h, w);
  for (float& v : s.data) v = quantize_pixel(u(rng));
  return s;
}

}  // namespace drivatt::testing
