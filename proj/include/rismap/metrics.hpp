#pragma once

#include <vector>

#include "rismap/common.hpp"

namespace rismap {

/// GOSPA parameters: order p, cutoff c (meters), alpha = 2 selects the
/// cardinality-penalty variant with a localization/missed/false decomposition.
struct GospaConfig {
  double p = 2.0;
  double c = 20.0;
  double alpha = 2.0;
};

/// `total` is the metric value (p-th root); the three parts are the additive
/// contributions in the p-th power domain, total = (loc + missed + false)^(1/p).
struct GospaResult {
  double total = 0.0;
  double localization = 0.0;
  double missed = 0.0;
  double false_alarm = 0.0;
};

/// GOSPA distance between estimated and true point sets via an optimal
/// assignment on the cutoff-truncated cost matrix (Hungarian algorithm).
GospaResult gospa(const std::vector<Vec3>& estimates,
                  const std::vector<Vec3>& truth, const GospaConfig& cfg = {});

/// Minimum-cost full assignment of an n x n cost matrix; returns the column
/// assigned to each row. Costs must be finite.
std::vector<int> solve_assignment(const MatX& cost);

}  // namespace rismap
