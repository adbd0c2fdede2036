#pragma once

#include <span>
#include <vector>

namespace drivatt::transport {

struct TransportResult {
  double cost = 0.0;
  // Row-major supplies.size() x demands.size() flow matrix.
  std::vector<double> plan;
};

// Balanced transportation problem solved exactly by successive shortest
// augmenting paths with Dijkstra on reduced costs. `cost` is row-major
// supplies.size() x demands.size() and must be non-negative. Demands are
// rescaled to the supply total before solving.
TransportResult solve(std::span<const double> supplies, std::span<const double> demands,
                      std::span<const double> cost);

}  // namespace drivatt::transport
