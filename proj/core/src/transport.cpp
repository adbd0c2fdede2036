#include "drivatt/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "drivatt/errors.hpp"

namespace drivatt::transport {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Residual network of a bipartite transportation problem with a super
// source S (node 0) and super sink T (node n+m+1).
class Network {
 public:
  Network(std::vector<double> supply, std::vector<double> demand, std::vector<double> cost)
      : n_(supply.size()),
        m_(demand.size()),
        supply_left_(std::move(supply)),
        demand_left_(std::move(demand)),
        shipped_(n_, 0.0),
        received_(m_, 0.0),
        cost_(std::move(cost)),
        flow_(n_ * m_, 0.0),
        potential_(n_ + m_ + 2, 0.0) {}

  void run(double tolerance) {
    const std::size_t nodes = n_ + m_ + 2;
    std::vector<double> dist(nodes);
    std::vector<std::size_t> prev(nodes);
    std::vector<char> done(nodes);
    while (remaining() > tolerance) {
      std::fill(dist.begin(), dist.end(), kInf);
      std::fill(done.begin(), done.end(), 0);
      dist[source()] = 0.0;
      prev[source()] = source();
      for (;;) {
        std::size_t u = nodes;
        double best = kInf;
        for (std::size_t v = 0; v < nodes; ++v)
          if (!done[v] && dist[v] < best) best = dist[v], u = v;
        if (u == nodes) break;
        done[u] = 1;
        relax_from(u, dist, prev, done, tolerance);
      }
      if (!std::isfinite(dist[sink()])) break;

      double reached_max = 0.0;
      for (double d : dist)
        if (std::isfinite(d)) reached_max = std::max(reached_max, d);
      for (std::size_t v = 0; v < nodes; ++v)
        potential_[v] += std::isfinite(dist[v]) ? dist[v] : reached_max;

      augment(prev);
    }
  }

  double total_cost() const {
    double c = 0.0;
    for (std::size_t k = 0; k < flow_.size(); ++k) c += flow_[k] * cost_[k];
    return c;
  }

  const std::vector<double>& flow() const { return flow_; }

 private:
  std::size_t source() const { return 0; }
  std::size_t sink() const { return n_ + m_ + 1; }
  bool is_supply(std::size_t v) const { return v >= 1 && v <= n_; }
  bool is_demand(std::size_t v) const { return v > n_ && v <= n_ + m_; }
  std::size_t supply_node(std::size_t i) const { return 1 + i; }
  std::size_t demand_node(std::size_t j) const { return 1 + n_ + j; }

  double remaining() const { return std::accumulate(supply_left_.begin(), supply_left_.end(), 0.0); }

  void relax_from(std::size_t u, std::vector<double>& dist, std::vector<std::size_t>& prev,
                  const std::vector<char>& done, double tol) {
    auto relax = [&](std::size_t v, double edge_cost) {
      if (done[v]) return;
      const double reduced = std::max(0.0, edge_cost + potential_[u] - potential_[v]);
      const double cand = dist[u] + reduced;
      if (cand < dist[v]) {
        dist[v] = cand;
        prev[v] = u;
      }
    };
    if (u == source()) {
      for (std::size_t i = 0; i < n_; ++i)
        if (supply_left_[i] > tol) relax(supply_node(i), 0.0);
    } else if (is_supply(u)) {
      const std::size_t i = u - 1;
      if (shipped_[i] > tol) relax(source(), 0.0);
      for (std::size_t j = 0; j < m_; ++j) relax(demand_node(j), cost_[i * m_ + j]);
    } else if (is_demand(u)) {
      const std::size_t j = u - 1 - n_;
      for (std::size_t i = 0; i < n_; ++i)
        if (flow_[i * m_ + j] > tol) relax(supply_node(i), -cost_[i * m_ + j]);
      if (demand_left_[j] > tol) relax(sink(), 0.0);
    } else {
      for (std::size_t j = 0; j < m_; ++j)
        if (received_[j] > tol) relax(demand_node(j), 0.0);
    }
  }

  void augment(const std::vector<std::size_t>& prev) {
    double delta = kInf;
    for (std::size_t v = sink(); v != source(); v = prev[v]) {
      const std::size_t u = prev[v];
      if (u == source()) delta = std::min(delta, supply_left_[v - 1]);
      else if (v == sink()) delta = std::min(delta, demand_left_[u - 1 - n_]);
      else if (is_demand(u) && is_supply(v)) delta = std::min(delta, flow_[(v - 1) * m_ + (u - 1 - n_)]);
    }
    for (std::size_t v = sink(); v != source(); v = prev[v]) {
      const std::size_t u = prev[v];
      if (u == source()) {
        supply_left_[v - 1] -= delta;
        shipped_[v - 1] += delta;
      } else if (v == sink()) {
        demand_left_[u - 1 - n_] -= delta;
        received_[u - 1 - n_] += delta;
      } else if (is_supply(u) && is_demand(v)) {
        flow_[(u - 1) * m_ + (v - 1 - n_)] += delta;
      } else {
        double& f = flow_[(v - 1) * m_ + (u - 1 - n_)];
        f = std::max(0.0, f - delta);
      }
    }
  }

  std::size_t n_, m_;
  std::vector<double> supply_left_, demand_left_;
  std::vector<double> shipped_, received_;
  std::vector<double> cost_;
  std::vector<double> flow_;
  std::vector<double> potential_;
};

}  // namespace

TransportResult solve(std::span<const double> supplies, std::span<const double> demands,
                      std::span<const double> cost) {
  if (cost.size() != supplies.size() * demands.size())
    throw ShapeMismatch("cost matrix must be supplies x demands");
  for (double c : cost)
    if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidArgument("transport costs must be finite and non-negative");

  const double supply_total = std::accumulate(supplies.begin(), supplies.end(), 0.0);
  const double demand_total = std::accumulate(demands.begin(), demands.end(), 0.0);
  for (double v : supplies)
    if (!(v >= 0.0)) throw InvalidArgument("negative supply");
  for (double v : demands)
    if (!(v >= 0.0)) throw InvalidArgument("negative demand");
  if (!(supply_total > 0.0) || !(demand_total > 0.0)) throw InvalidArgument("transport needs positive mass");

  // Solve on the non-empty rows/columns only.
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < supplies.size(); ++i)
    if (supplies[i] > 0.0) rows.push_back(i);
  for (std::size_t j = 0; j < demands.size(); ++j)
    if (demands[j] > 0.0) cols.push_back(j);

  std::vector<double> a, b, c;
  a.reserve(rows.size());
  b.reserve(cols.size());
  c.reserve(rows.size() * cols.size());
  for (std::size_t i : rows) a.push_back(supplies[i]);
  const double scale = supply_total / demand_total;
  for (std::size_t j : cols) b.push_back(demands[j] * scale);
  for (std::size_t i : rows)
    for (std::size_t j : cols) c.push_back(cost[i * demands.size() + j]);

  Network net(std::move(a), std::move(b), std::move(c));
  net.run(1e-14 * supply_total);

  TransportResult result;
  result.cost = net.total_cost();
  result.plan.assign(supplies.size() * demands.size(), 0.0);
  const std::vector<double>& flow = net.flow();
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k = 0; k < cols.size(); ++k)
      result.plan[rows[r] * demands.size() + cols[k]] = flow[r * cols.size() + k];
  return result;
}

}  // namespace drivatt::transport
