#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "datamech/errors.hpp"
#include "datamech/instance.hpp"
#include "datamech/mechanisms.hpp"
#include "datamech/types.hpp"

namespace datamech {

// Declarative agent strategy, mostly for simulation configs and tests.
struct StrategyProfile {
  enum class Kind { truthful, overreport, underreport, grid_sweep };

  std::string agent_id;
  Kind kind = Kind::truthful;
  double factor = 1.0;     // overreport / underreport multiplier
  double grid_min = 0.0;   // grid_sweep bounds
  double grid_max = 0.0;
  int grid_steps = 2;

  void validate() const {
    switch (kind) {
      case Kind::truthful:
        break;
      case Kind::overreport:
        if (factor < 1.0) throw ConfigError("overreport factor must be >= 1");
        break;
      case Kind::underreport:
        if (factor <= 0.0 || factor > 1.0) {
          throw ConfigError("underreport factor must lie in (0, 1]");
        }
        break;
      case Kind::grid_sweep:
        if (!(grid_min < grid_max) || grid_steps < 2) {
          throw ConfigError("grid_sweep needs min < max and steps >= 2");
        }
        break;
    }
  }

  std::vector<double> reports(double true_cost) const {
    validate();
    switch (kind) {
      case Kind::truthful:
        return {true_cost};
      case Kind::overreport:
      case Kind::underreport:
        return {true_cost * factor};
      case Kind::grid_sweep: {
        std::vector<double> out;
        for (int k = 0; k < grid_steps; ++k) {
          out.push_back(grid_min + (grid_max - grid_min) * k / (grid_steps - 1));
        }
        return out;
      }
    }
    return {true_cost};
  }
};

struct DsicVerdict {
  std::string agent_id;
  double truthful_utility = 0.0;
  double best_deviation_utility = 0.0;
  double best_deviation_report = 0.0;
  bool violation = false;
  bool monotonicity_flag = false;
};

enum class MechanismKind { qmia, mixed };

// One simulated auction instance: scored agents plus the true costs only
// the harness knows.
struct SimInstance {
  std::vector<ScoredAgent> agents;
  std::map<std::string, double> true_costs;
};

inline SimInstance make_sim_instance(const std::vector<SyntheticAgent>& generated,
                                     const MechanismConfig& cfg) {
  SimInstance inst;
  for (const auto& g : generated) {
    inst.agents.push_back(make_scored(g.report.agent_id, g.report.reported_cost, g.quality,
                                      g.marginal_utility, cfg));
    inst.true_costs[g.report.agent_id] =
        g.report.true_cost.value_or(g.report.reported_cost);
  }
  return inst;
}

// Default deviation tolerance: 1e-9 plus one payment-grid step, because
// threshold payments are quantized to that grid.
inline double dsic_tolerance(const MechanismConfig& cfg) { return 1e-9 + cfg.effective_grid(); }

namespace detail {

inline std::vector<ScoredAgent> with_report(std::vector<ScoredAgent> agents, std::size_t index,
                                            double report, const MechanismConfig& cfg) {
  agents[index].reported_cost = report;
  agents[index].virtual_cost = virtual_cost(agents[index].agent_id, report,
                                            agents[index].quality,
                                            agents[index].marginal_utility, cfg);
  return agents;
}

// The agent's monetary threshold given the others' current reports. Every
// agent wins at report 0, so the threshold is always defined.
inline double monetary_threshold(const std::vector<ScoredAgent>& agents, std::size_t index,
                                 const MechanismConfig& cfg) {
  const auto zeroed = with_report(agents, index, 0.0, cfg);
  return critical_payment(zeroed, index, cfg).payment;
}

// Utility under a modified profile, via the real mechanism.
inline double mechanism_utility(const std::vector<ScoredAgent>& profile,
                                const std::map<std::string, double>& true_costs,
                                const std::string& agent_id, MechanismKind mech,
                                const MechanismConfig& cfg) {
  const AuctionOutcome outcome =
      mech == MechanismKind::qmia ? qmia(profile, cfg, &true_costs)
                                  : mixed_mia(profile, cfg, &true_costs);
  return outcome.utilities.at(agent_id);
}

// Cheap utility evaluation for sweep cells: one selection pass, with the
// monetary payment taken from a precomputed threshold. Valid whenever
// selection is monotone (the threshold equals the payment at every winning
// report); sweep results are re-verified through the full mechanism at the
// argmax.
inline double sweep_utility(const std::vector<ScoredAgent>& profile, std::size_t index,
                            double threshold, MechanismKind mech, const MechanismConfig& cfg,
                            double true_cost, bool* won_out = nullptr) {
  const auto winners = qmia_select(profile, cfg);
  bool won = false;
  for (const auto& id : winners) {
    if (id == profile[index].agent_id) {
      won = true;
      break;
    }
  }
  if (won_out != nullptr) *won_out = won;
  if (!won) return 0.0;
  if (mech == MechanismKind::qmia) return threshold - true_cost;
  const auto shares = winner_shares(profile, winners);
  return mixed_utility(cfg.rho, threshold, shares.at(profile[index].agent_id), cfg.utility_pool,
                       true_cost);
}

}  // namespace detail

// For each agent, sweeps unilateral deviations over a report grid spanning
// [0, B] with everyone else truthful, and compares against the truthful
// utility. A verdict is a violation only when the best deviation exceeds
// truthful by more than the tolerance.
inline std::vector<DsicVerdict> dsic_sweep(const SimInstance& instance, MechanismKind mech,
                                           const MechanismConfig& cfg, int grid_steps,
                                           double tolerance) {
  if (grid_steps < 2) throw ConfigError("dsic_sweep: grid_steps must be >= 2");
  for (const auto& a : instance.agents) {
    if (!instance.true_costs.count(a.agent_id)) {
      throw DataError("dsic_sweep: missing true cost for '" + a.agent_id + "'");
    }
  }

  std::vector<DsicVerdict> verdicts;
  const bool use_fast_path = !cfg.strict_budget_mode;

  for (std::size_t i = 0; i < instance.agents.size(); ++i) {
    const std::string& id = instance.agents[i].agent_id;
    const double true_cost = instance.true_costs.at(id);

    DsicVerdict v;
    v.agent_id = id;
    v.truthful_utility =
        detail::mechanism_utility(instance.agents, instance.true_costs, id, mech, cfg);

    const double threshold =
        use_fast_path ? detail::monetary_threshold(instance.agents, i, cfg) : 0.0;

    double best_utility = -std::numeric_limits<double>::infinity();
    double best_report = true_cost;
    bool seen_loss = false;
    for (int k = 0; k < grid_steps; ++k) {
      const double report = cfg.budget * static_cast<double>(k) / (grid_steps - 1);
      const auto profile = detail::with_report(instance.agents, i, report, cfg);
      bool won = false;
      const double u =
          use_fast_path
              ? detail::sweep_utility(profile, i, threshold, mech, cfg, true_cost, &won)
              : detail::mechanism_utility(profile, instance.true_costs, id, mech, cfg);
      if (use_fast_path) {
        if (!won) seen_loss = true;
        if (won && seen_loss) v.monotonicity_flag = true;
      }
      if (u > best_utility) {
        best_utility = u;
        best_report = report;
      }
    }

    // Re-evaluate the winning deviation through the full mechanism so the
    // verdict never rests on the fast path alone.
    const auto best_profile = detail::with_report(instance.agents, i, best_report, cfg);
    v.best_deviation_utility =
        detail::mechanism_utility(best_profile, instance.true_costs, id, mech, cfg);
    v.best_deviation_report = best_report;
    v.violation = v.best_deviation_utility > v.truthful_utility + tolerance;
    verdicts.push_back(std::move(v));
  }
  return verdicts;
}

// Winners whose realized utility is materially negative. Empty on every
// truthful run if individual rationality holds.
inline std::vector<std::pair<std::string, double>> ir_audit(const AuctionOutcome& outcome) {
  std::vector<std::pair<std::string, double>> violations;
  for (const auto& id : outcome.winners) {
    const auto it = outcome.utilities.find(id);
    if (it == outcome.utilities.end()) {
      throw DataError("ir_audit: winner '" + id + "' has no utility (true costs unknown)");
    }
    if (it->second < -1e-9) violations.emplace_back(id, it->second);
  }
  return violations;
}

struct CollusionResult {
  double joint_gain = 0.0;  // max over the grid of min(delta_a, delta_b)
  std::pair<double, double> profile;  // the reports achieving it
};

// Joint report sweep for one pair under the non-transferable-utility
// criterion: a deviation counts only if both members weakly gain.
inline CollusionResult collusion_probe(const SimInstance& instance,
                                       const std::pair<std::string, std::string>& pair,
                                       MechanismKind mech, const MechanismConfig& cfg,
                                       int grid_steps) {
  if (pair.first == pair.second) throw ConfigError("collusion_probe: pair must be distinct");
  if (grid_steps < 2) throw ConfigError("collusion_probe: grid_steps must be >= 2");
  std::size_t ia = instance.agents.size();
  std::size_t ib = instance.agents.size();
  for (std::size_t i = 0; i < instance.agents.size(); ++i) {
    if (instance.agents[i].agent_id == pair.first) ia = i;
    if (instance.agents[i].agent_id == pair.second) ib = i;
  }
  if (ia == instance.agents.size() || ib == instance.agents.size()) {
    throw DataError("collusion_probe: unknown agent in pair");
  }

  const double cost_a = instance.true_costs.at(pair.first);
  const double cost_b = instance.true_costs.at(pair.second);
  const double base_a =
      detail::mechanism_utility(instance.agents, instance.true_costs, pair.first, mech, cfg);
  const double base_b =
      detail::mechanism_utility(instance.agents, instance.true_costs, pair.second, mech, cfg);

  std::vector<double> grid;
  for (int k = 0; k < grid_steps; ++k) {
    grid.push_back(cfg.budget * static_cast<double>(k) / (grid_steps - 1));
  }

  // Thresholds depend only on the other reports: precompute a's threshold
  // for each report of b, and vice versa. Strict budget mode reshapes
  // payments after selection, so it takes the full-mechanism path instead.
  const bool use_fast_path = !cfg.strict_budget_mode;
  std::vector<double> theta_a(grid.size(), 0.0), theta_b(grid.size(), 0.0);
  if (use_fast_path) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      theta_a[k] = detail::monetary_threshold(
          detail::with_report(instance.agents, ib, grid[k], cfg), ia, cfg);
      theta_b[k] = detail::monetary_threshold(
          detail::with_report(instance.agents, ia, grid[k], cfg), ib, cfg);
    }
  }

  CollusionResult result;
  result.joint_gain = -std::numeric_limits<double>::infinity();
  for (std::size_t ka = 0; ka < grid.size(); ++ka) {
    auto profile_a = detail::with_report(instance.agents, ia, grid[ka], cfg);
    for (std::size_t kb = 0; kb < grid.size(); ++kb) {
      const auto profile = detail::with_report(profile_a, ib, grid[kb], cfg);
      double ua, ub;
      if (use_fast_path) {
        ua = detail::sweep_utility(profile, ia, theta_a[kb], mech, cfg, cost_a);
        ub = detail::sweep_utility(profile, ib, theta_b[ka], mech, cfg, cost_b);
      } else {
        ua = detail::mechanism_utility(profile, instance.true_costs, pair.first, mech, cfg);
        ub = detail::mechanism_utility(profile, instance.true_costs, pair.second, mech, cfg);
      }
      const double joint = std::min(ua - base_a, ub - base_b);
      if (joint > result.joint_gain) {
        result.joint_gain = joint;
        result.profile = {grid[ka], grid[kb]};
      }
    }
  }

  // Verify the argmax cell through the full mechanism.
  auto best = detail::with_report(
      detail::with_report(instance.agents, ia, result.profile.first, cfg), ib,
      result.profile.second, cfg);
  const double ua = detail::mechanism_utility(best, instance.true_costs, pair.first, mech, cfg);
  const double ub = detail::mechanism_utility(best, instance.true_costs, pair.second, mech, cfg);
  result.joint_gain = std::min(ua - base_a, ub - base_b);
  return result;
}

struct RhoSweepResult {
  std::vector<double> rho_values;
  std::map<std::string, std::vector<double>> utilities;  // one curve per agent
};

// Utility curves u_i(rho) with the winner set fixed by the rho = 1 run.
// Each curve is affine in rho; its slope equals rho_preference's.
inline RhoSweepResult rho_sweep(const SimInstance& instance, const MechanismConfig& cfg,
                                const std::vector<double>& rho_values) {
  for (double r : rho_values) {
    if (r < 0.0 || r > 1.0) throw ConfigError("rho_sweep: rho values must lie in [0, 1]");
  }
  const AuctionOutcome base = qmia(instance.agents, cfg, &instance.true_costs);

  RhoSweepResult result;
  result.rho_values = rho_values;
  for (const auto& a : instance.agents) {
    std::vector<double> curve;
    curve.reserve(rho_values.size());
    const bool winner = base.is_winner(a.agent_id);
    for (double r : rho_values) {
      curve.push_back(winner ? mixed_utility(r, base.payments.at(a.agent_id),
                                             base.shares.at(a.agent_id), cfg.utility_pool,
                                             instance.true_costs.at(a.agent_id))
                             : 0.0);
    }
    result.utilities[a.agent_id] = std::move(curve);
  }
  return result;
}

// CRRA utility reward^(1-gamma)/(1-gamma) - cost, with the logarithmic
// limit at gamma = 1. The singularity at reward = 0 with gamma >= 1 maps to
// the -infinity sentinel.
inline double crra_utility(double reward, double cost, double gamma_risk) {
  if (reward < 0.0) throw DataError("crra_utility: reward must be >= 0");
  if (gamma_risk < 0.0) throw ConfigError("crra_utility: gamma must be >= 0");
  if (gamma_risk == 1.0) {
    if (reward == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(reward) - cost;
  }
  if (reward == 0.0 && gamma_risk > 1.0) {
    return -std::numeric_limits<double>::infinity();
  }
  return std::pow(reward, 1.0 - gamma_risk) / (1.0 - gamma_risk) - cost;
}

inline void to_json(json& j, const DsicVerdict& v) {
  j = json{{"agent_id", v.agent_id},
           {"truthful_utility", v.truthful_utility},
           {"best_deviation_utility", v.best_deviation_utility},
           {"best_deviation_report", v.best_deviation_report},
           {"violation", v.violation},
           {"monotonicity_flag", v.monotonicity_flag}};
}

inline void from_json(const json& j, DsicVerdict& v) {
  j.at("agent_id").get_to(v.agent_id);
  j.at("truthful_utility").get_to(v.truthful_utility);
  j.at("best_deviation_utility").get_to(v.best_deviation_utility);
  j.at("best_deviation_report").get_to(v.best_deviation_report);
  j.at("violation").get_to(v.violation);
  j.at("monotonicity_flag").get_to(v.monotonicity_flag);
}

}  // namespace datamech
