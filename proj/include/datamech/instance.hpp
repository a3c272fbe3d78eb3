#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "datamech/errors.hpp"
#include "datamech/rng.hpp"
#include "datamech/types.hpp"

namespace datamech {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// A generated agent: truthful report plus synthetic verified scores.
struct SyntheticAgent {
  AgentReport report;
  double quality = 0.0;
  double marginal_utility = 0.0;
};

namespace detail {

inline void check_interval(const Interval& iv, const char* name) {
  if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi) {
    throw ConfigError(std::string(name) + ": invalid interval");
  }
}

}  // namespace detail

// Seeded random instances for the property suites. Deterministic: the same
// seed and parameters always produce bit-identical agents.
inline std::vector<SyntheticAgent> generate_instance(std::uint64_t seed, int n, Interval cost_range,
                                                     Interval quality_range, Interval phi_range) {
  if (n < 1) throw ConfigError("generate_instance: n must be >= 1");
  detail::check_interval(cost_range, "cost_range");
  detail::check_interval(quality_range, "quality_range");
  detail::check_interval(phi_range, "phi_range");
  if (cost_range.lo < 0.0) throw ConfigError("cost_range: costs must be >= 0");
  if (quality_range.lo < 0.0 || quality_range.hi > 1.0) {
    throw ConfigError("quality_range: must be a sub-interval of [0, 1]");
  }
  if (phi_range.lo < 0.0) throw ConfigError("phi_range: must be non-negative");

  Rng rng(seed);
  std::vector<SyntheticAgent> agents;
  agents.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    char id[24];
    std::snprintf(id, sizeof(id), "a%03d", i);
    SyntheticAgent a;
    a.report.agent_id = id;
    a.report.reported_cost = rng.uniform(cost_range.lo, cost_range.hi);
    a.report.true_cost = a.report.reported_cost;  // truthful baseline
    a.report.dataset.id = id;
    a.quality = rng.uniform(quality_range.lo, quality_range.hi);
    a.marginal_utility = rng.uniform(phi_range.lo, phi_range.hi);
    agents.push_back(std::move(a));
  }
  return agents;
}

// Planner surplus V(D_S) - lambda * sum of payments over the selection.
inline double evaluate_surplus(const std::set<std::string>& selection,
                               const std::map<std::string, double>& payments, double model_value,
                               double lambda) {
  if (lambda < 0.0) throw ConfigError("evaluate_surplus: lambda must be >= 0");
  double paid = 0.0;
  for (const auto& id : selection) {
    auto it = payments.find(id);
    if (it == payments.end()) {
      throw DataError("evaluate_surplus: no payment entry for '" + id + "'");
    }
    paid += it->second;
  }
  return model_value - lambda * paid;
}

}  // namespace datamech
