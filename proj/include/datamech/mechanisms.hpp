#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "datamech/canonical.hpp"
#include "datamech/errors.hpp"
#include "datamech/types.hpp"

namespace datamech {

// Virtual cost psi = c / (q^eta * (phi + kappa)^gamma), or c / sqrt(q * phi)
// under the concave transform. The auction ranks ascending by this.
inline double virtual_cost(const std::string& agent_id, double reported_cost, double quality,
                           double marginal_utility, const MechanismConfig& cfg) {
  if (reported_cost < 0.0) {
    throw DataError("virtual_cost: agent '" + agent_id + "' has negative reported cost");
  }
  if (cfg.concave_transform == ConcaveTransform::sqrt) {
    const double product = quality * marginal_utility;
    if (product <= 0.0) {
      throw DegenerateError("virtual_cost: agent '" + agent_id +
                            "': q*phi must be > 0 under the sqrt transform");
    }
    return reported_cost / std::sqrt(product);
  }
  if (!(quality > 0.0 || cfg.eta == 0.0)) {
    throw DegenerateError("virtual_cost: agent '" + agent_id + "': quality is 0 with eta > 0");
  }
  if (!(marginal_utility + cfg.kappa > 0.0)) {
    throw DegenerateError("virtual_cost: agent '" + agent_id +
                          "': phi + kappa must be > 0 (kappa > 0 is the standard remedy)");
  }
  const double denom =
      std::pow(quality, cfg.eta) * std::pow(marginal_utility + cfg.kappa, cfg.gamma_exp);
  const double psi = reported_cost / denom;
  if (std::isnan(psi)) {
    throw DegenerateError("virtual_cost: agent '" + agent_id +
                          "': virtual cost is undefined (0/0 after exponent underflow)");
  }
  return psi;
}

inline ScoredAgent make_scored(std::string agent_id, double reported_cost, double quality,
                               double marginal_utility, const MechanismConfig& cfg) {
  ScoredAgent a;
  a.agent_id = std::move(agent_id);
  a.reported_cost = reported_cost;
  a.quality = quality;
  a.marginal_utility = marginal_utility;
  a.virtual_cost = virtual_cost(a.agent_id, reported_cost, quality, marginal_utility, cfg);
  return a;
}

namespace detail {

// Ascending (psi, agent_id): the auction's total order.
inline std::vector<std::size_t> psi_order(const std::vector<ScoredAgent>& agents) {
  std::vector<std::size_t> order(agents.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (agents[a].virtual_cost != agents[b].virtual_cost) {
      return agents[a].virtual_cost < agents[b].virtual_cost;
    }
    return agents[a].agent_id < agents[b].agent_id;
  });
  return order;
}

}  // namespace detail

// Greedy prefix selection: walk agents in ascending (psi, id) order, adding
// while the cumulative reported cost stays within the budget; stop at the
// first agent that would exceed it.
inline std::vector<std::string> qmia_select(const std::vector<ScoredAgent>& agents,
                                            const MechanismConfig& cfg) {
  std::vector<std::string> winners;
  double cumulative = 0.0;
  for (std::size_t idx : detail::psi_order(agents)) {
    const ScoredAgent& a = agents[idx];
    if (cumulative + a.reported_cost <= cfg.budget) {
      winners.push_back(a.agent_id);
      cumulative += a.reported_cost;
    } else {
      break;
    }
  }
  return winners;
}

namespace detail {

inline bool wins_with_report(std::vector<ScoredAgent> agents, std::size_t index, double report,
                             const MechanismConfig& cfg) {
  agents[index].reported_cost = report;
  agents[index].virtual_cost = virtual_cost(agents[index].agent_id, report, agents[index].quality,
                                            agents[index].marginal_utility, cfg);
  for (const auto& id : qmia_select(agents, cfg)) {
    if (id == agents[index].agent_id) return true;
  }
  return false;
}

// psi_i(report) = report / denom_i; recover the denominator.
inline double psi_denominator(const ScoredAgent& a, const MechanismConfig& cfg) {
  if (cfg.concave_transform == ConcaveTransform::sqrt) {
    return std::sqrt(a.quality * a.marginal_utility);
  }
  return std::pow(a.quality, cfg.eta) * std::pow(a.marginal_utility + cfg.kappa, cfg.gamma_exp);
}

}  // namespace detail

struct CriticalPaymentResult {
  double payment = 0.0;
  std::optional<MonotonicityViolation> violation;
};

// Threshold payment: the supremum over reports at which the agent stays
// selected, with the other reports fixed. Binary search to the configured
// grid resolution, then the final bracket is snapped to the exact boundary
// candidates (budget-slack points and psi-order crossings).
//
// A pre-check scans a coarse report grid for selection non-monotonicity;
// if found, the result is flagged and the payment falls back to the
// supremum over a brute-force sweep.
inline CriticalPaymentResult critical_payment(const std::vector<ScoredAgent>& agents,
                                              std::size_t index, const MechanismConfig& cfg) {
  const ScoredAgent& target = agents[index];
  if (!detail::wins_with_report(agents, index, target.reported_cost, cfg)) {
    throw ConfigError("critical_payment: agent '" + target.agent_id +
                      "' does not win at its reported cost");
  }

  CriticalPaymentResult result;
  const double budget = cfg.budget;
  auto wins = [&](double report) { return detail::wins_with_report(agents, index, report, cfg); };

  // Monotonicity pre-check: once an agent loses at some report, it must
  // keep losing at every larger one.
  constexpr int kPrecheckPoints = 64;
  double first_loss = -1.0;
  bool monotone = true;
  for (int k = 0; k <= kPrecheckPoints && monotone; ++k) {
    const double report = budget * static_cast<double>(k) / kPrecheckPoints;
    const bool w = wins(report);
    if (!w && first_loss < 0.0) first_loss = report;
    if (w && first_loss >= 0.0) {
      monotone = false;
      result.violation = MonotonicityViolation{target.agent_id, report, first_loss};
    }
  }

  if (!monotone) {
    // Brute-force sweep supremum over a fixed 1000-point grid.
    constexpr int kSweepPoints = 1000;
    double best = target.reported_cost;
    for (int k = 0; k <= kSweepPoints; ++k) {
      const double report = budget * static_cast<double>(k) / kSweepPoints;
      if (report >= target.reported_cost && wins(report)) best = report;
    }
    result.payment = best;
    return result;
  }

  if (wins(budget)) {
    result.payment = budget;
    return result;
  }

  double lo = target.reported_cost;  // winning
  double hi = budget;                // losing
  const double resolution = cfg.effective_grid();
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    (wins(mid) ? lo : hi) = mid;
  }

  // Exact refinement: the true threshold is either a budget-slack point
  // B - sum(prefix of other costs) or a report where the agent's psi
  // crosses another agent's. Test the candidates inside the bracket.
  const double denom = detail::psi_denominator(target, cfg);
  std::vector<double> candidates;
  std::vector<ScoredAgent> others;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (i != index) others.push_back(agents[i]);
  }
  const auto order = detail::psi_order(others);
  double prefix = 0.0;
  candidates.push_back(budget);
  for (std::size_t k = 0; k < order.size(); ++k) {
    candidates.push_back(others[order[k]].virtual_cost * denom);
    prefix += others[order[k]].reported_cost;
    candidates.push_back(budget - prefix);
  }
  double best = lo;
  for (double c : candidates) {
    if (c > best && c <= hi && wins(c)) best = c;
  }
  result.payment = best;
  return result;
}

// Winner shares proportional to q * phi. Zero-product winners get share 0;
// an all-zero winner set yields all-zero shares.
inline std::map<std::string, double> winner_shares(const std::vector<ScoredAgent>& agents,
                                                   const std::vector<std::string>& winners) {
  std::map<std::string, double> products;
  double total = 0.0;
  for (const auto& id : winners) {
    for (const auto& a : agents) {
      if (a.agent_id == id) {
        products[id] = a.quality * a.marginal_utility;
        total += products[id];
        break;
      }
    }
  }
  std::map<std::string, double> shares;
  for (const auto& [id, product] : products) {
    shares[id] = total > 0.0 ? product / total : 0.0;
  }
  return shares;
}

// MUT rule: s_i = q_i * phi_i / sum over winners.
inline std::map<std::string, double> mut_shares(const std::vector<ScoredAgent>& winners) {
  if (winners.empty()) throw DegenerateError("mut_shares: empty winner set");
  double total = 0.0;
  for (const auto& w : winners) total += w.quality * w.marginal_utility;
  if (total <= 0.0) {
    throw DegenerateError("mut_shares: all quality * marginal-utility products are zero");
  }
  std::map<std::string, double> shares;
  for (const auto& w : winners) shares[w.agent_id] = w.quality * w.marginal_utility / total;
  return shares;
}

// Quality-Weighted Marginal Payment: normalizer * q^eta * (phi + kappa)^gamma.
inline double qwmp_payment(double quality, double marginal_utility, const MechanismConfig& cfg) {
  if (cfg.qwmp_normalizer <= 0.0) throw ConfigError("qwmp_payment: normalizer must be > 0");
  return cfg.qwmp_normalizer * std::pow(quality, cfg.eta) *
         std::pow(marginal_utility + cfg.kappa, cfg.gamma_exp);
}

namespace detail {

inline void fill_losers(AuctionOutcome& outcome, const std::vector<ScoredAgent>& agents) {
  for (const auto& a : agents) {
    if (!outcome.payments.count(a.agent_id)) outcome.payments[a.agent_id] = 0.0;
    if (!outcome.shares.count(a.agent_id)) outcome.shares[a.agent_id] = 0.0;
  }
}

}  // namespace detail

// Q-MIA: selection plus threshold payments. In strict budget mode, winners
// are dropped from the highest psi down, payments recomputed each round,
// until total payments fit the budget.
inline AuctionOutcome qmia(const std::vector<ScoredAgent>& agents, const MechanismConfig& cfg,
                           const std::map<std::string, double>* true_costs = nullptr) {
  cfg.validate();
  AuctionOutcome outcome;
  if (agents.empty()) return outcome;
  {
    std::set<std::string> ids;
    for (const auto& a : agents) {
      if (!ids.insert(a.agent_id).second) {
        throw DataError("qmia: duplicate agent id '" + a.agent_id + "'");
      }
    }
  }

  outcome.winners = qmia_select(agents, cfg);

  auto index_of = [&](const std::string& id) {
    for (std::size_t i = 0; i < agents.size(); ++i) {
      if (agents[i].agent_id == id) return i;
    }
    throw DataError("qmia: unknown winner id '" + id + "'");
  };

  auto compute_payments = [&](const std::vector<std::string>& winners) {
    std::map<std::string, double> payments;
    for (const auto& id : winners) {
      const CriticalPaymentResult r = critical_payment(agents, index_of(id), cfg);
      payments[id] = r.payment;
      if (r.violation) outcome.diagnostics.monotonicity_violations.push_back(*r.violation);
    }
    return payments;
  };

  outcome.payments = compute_payments(outcome.winners);
  double total = 0.0;
  for (const auto& id : outcome.winners) total += outcome.payments[id];
  outcome.diagnostics.payment_overrun = total > cfg.budget + 1e-9;

  if (cfg.strict_budget_mode) {
    while (!outcome.winners.empty() && total > cfg.budget) {
      // Drop the highest-psi winner (ties: latest in the (psi, id) order).
      std::size_t drop = 0;
      for (std::size_t k = 1; k < outcome.winners.size(); ++k) {
        const ScoredAgent& a = agents[index_of(outcome.winners[k])];
        const ScoredAgent& b = agents[index_of(outcome.winners[drop])];
        if (a.virtual_cost > b.virtual_cost ||
            (a.virtual_cost == b.virtual_cost && a.agent_id > b.agent_id)) {
          drop = k;
        }
      }
      outcome.diagnostics.dropped_for_budget.push_back(outcome.winners[drop]);
      outcome.winners.erase(outcome.winners.begin() + static_cast<long>(drop));
      outcome.diagnostics.monotonicity_violations.clear();
      outcome.payments = compute_payments(outcome.winners);
      total = 0.0;
      for (const auto& id : outcome.winners) total += outcome.payments[id];
    }
  }

  outcome.diagnostics.payment_sum = total;
  outcome.shares = winner_shares(agents, outcome.winners);
  detail::fill_losers(outcome, agents);

  if (true_costs != nullptr) {
    for (const auto& a : agents) {
      const auto it = true_costs->find(a.agent_id);
      if (it == true_costs->end()) continue;
      outcome.utilities[a.agent_id] =
          outcome.is_winner(a.agent_id) ? outcome.payments[a.agent_id] - it->second : 0.0;
    }
  }
  return outcome;
}

// Hybrid utility at liquidity rho: the monetary leg nets out the cost, the
// deferred leg is a pure share claim. At rho = 1 this is p^Q - c.
inline double mixed_utility(double rho, double monetary_payment, double share, double utility_pool,
                            double true_cost) {
  return rho * (monetary_payment - true_cost) + (1.0 - rho) * share * utility_pool;
}

// Mixed-MIA: run Q-MIA for the winner set and monetary payments, compute
// MUT shares over the winners, then blend by the liquidity factor.
inline AuctionOutcome mixed_mia(const std::vector<ScoredAgent>& agents, const MechanismConfig& cfg,
                                const std::map<std::string, double>* true_costs = nullptr) {
  AuctionOutcome outcome = qmia(agents, cfg, nullptr);
  const double rho = cfg.rho;

  std::map<std::string, double> monetary = outcome.payments;
  for (const auto& id : outcome.winners) {
    outcome.payments[id] =
        rho * monetary[id] + (1.0 - rho) * cfg.utility_pool * outcome.shares[id];
  }
  double total = 0.0;
  for (const auto& id : outcome.winners) total += outcome.payments[id];
  outcome.diagnostics.payment_sum = total;

  if (true_costs != nullptr) {
    for (const auto& a : agents) {
      const auto it = true_costs->find(a.agent_id);
      if (it == true_costs->end()) continue;
      outcome.utilities[a.agent_id] =
          outcome.is_winner(a.agent_id)
              ? mixed_utility(rho, monetary[a.agent_id], outcome.shares[a.agent_id],
                              cfg.utility_pool, it->second)
              : 0.0;
    }
  }
  return outcome;
}

// DST token allocation.
struct DstAllocation {
  std::map<std::string, double> scores;  // DST_i, sums to 1
  std::map<std::string, long> tokens;
  std::set<std::string> floor_applied;
  std::set<std::string> cap_applied;
};

// DST_i = alpha * VolumeScore + beta * QualityScore + gamma * ImpactScore,
// each component normalized to sum 1; components with all-zero inputs drop
// out and their weight is spread over the rest. Tokens are floor(T * f_i)
// after the floor/cap waterfall, with flooring remainders handed out in
// tie-break order.
inline DstAllocation dst_allocate(const std::map<std::string, double>& volumes,
                                  const std::map<std::string, double>& qualities,
                                  const std::map<std::string, double>& impacts,
                                  const MechanismConfig& cfg) {
  cfg.validate();
  auto check_keys = [&](const std::map<std::string, double>& m, const char* name) {
    if (m.size() != volumes.size()) {
      throw DataError(std::string("dst_allocate: ") + name + " has inconsistent agent ids");
    }
    for (const auto& [id, value] : m) {
      if (!volumes.count(id)) {
        throw DataError(std::string("dst_allocate: ") + name + " has unknown agent '" + id + "'");
      }
      if (value < 0.0) {
        throw DataError(std::string("dst_allocate: ") + name + " is negative for '" + id + "'");
      }
    }
  };
  check_keys(volumes, "volumes");
  check_keys(qualities, "qualities");
  check_keys(impacts, "impacts");
  if (volumes.empty()) throw DataError("dst_allocate: no agents");

  const std::map<std::string, double>* components[3] = {&volumes, &qualities, &impacts};
  double sums[3] = {0.0, 0.0, 0.0};
  for (int c = 0; c < 3; ++c) {
    for (const auto& [id, value] : *components[c]) sums[c] += value;
  }
  double active_weight = 0.0;
  for (int c = 0; c < 3; ++c) {
    if (cfg.dst_weights[static_cast<std::size_t>(c)] > 0.0 && sums[c] > 0.0) {
      active_weight += cfg.dst_weights[static_cast<std::size_t>(c)];
    }
  }
  if (active_weight <= 0.0) {
    throw DegenerateError("dst_allocate: every weighted component has all-zero inputs");
  }

  DstAllocation result;
  for (const auto& [id, unused] : volumes) {
    double score = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double w = cfg.dst_weights[static_cast<std::size_t>(c)];
      if (w > 0.0 && sums[c] > 0.0) {
        score += (w / active_weight) * (components[c]->at(id) / sums[c]);
      }
    }
    result.scores[id] = score;
  }

  std::vector<std::string> positive;
  for (const auto& [id, score] : result.scores) {
    if (score > 0.0) positive.push_back(id);
  }
  const double floor_f = cfg.dst_floor_fraction;
  const double cap_f = cfg.dst_cap_fraction;
  const double n_pos = static_cast<double>(positive.size());
  if (floor_f * n_pos > 1.0 + 1e-12) {
    throw ConfigError("dst_allocate: floor_fraction * positive agents exceeds 1 (infeasible floor)");
  }
  if (!positive.empty() && cap_f * n_pos < 1.0 - 1e-12) {
    throw ConfigError("dst_allocate: cap_fraction * positive agents is below 1; the supply "
                      "cannot be fully allocated");
  }

  std::map<std::string, double> fractions = result.scores;

  // Floor stage: lift small positive agents to the floor, funded
  // proportionally to the headroom of those above it.
  double needed = 0.0;
  for (const auto& id : positive) {
    if (fractions[id] < floor_f) needed += floor_f - fractions[id];
  }
  if (needed > 0.0) {
    double headroom = 0.0;
    for (const auto& id : positive) {
      if (fractions[id] > floor_f) headroom += fractions[id] - floor_f;
    }
    for (const auto& id : positive) {
      if (fractions[id] < floor_f) {
        result.floor_applied.insert(id);
        fractions[id] = floor_f;
      } else if (fractions[id] > floor_f) {
        fractions[id] -= needed * (fractions[id] - floor_f) / headroom;
      }
    }
  }

  // Cap stage: clamp and redistribute the excess proportionally among the
  // uncapped, iterating until no agent exceeds the cap.
  for (std::size_t round = 0; round <= positive.size(); ++round) {
    std::vector<std::string> over;
    for (const auto& id : positive) {
      if (fractions[id] > cap_f + 1e-15) over.push_back(id);
    }
    if (over.empty()) break;
    double excess = 0.0;
    for (const auto& id : over) {
      excess += fractions[id] - cap_f;
      fractions[id] = cap_f;
      result.cap_applied.insert(id);
    }
    double uncapped_total = 0.0;
    for (const auto& id : positive) {
      if (fractions[id] < cap_f - 1e-15) uncapped_total += fractions[id];
    }
    if (uncapped_total <= 0.0) {
      throw ConfigError("dst_allocate: cap redistribution has no recipients");
    }
    for (const auto& id : positive) {
      if (fractions[id] < cap_f - 1e-15) {
        fractions[id] += excess * fractions[id] / uncapped_total;
      }
    }
  }

  const double supply = static_cast<double>(cfg.token_supply);
  long assigned = 0;
  for (const auto& [id, unused] : result.scores) {
    const double f = fractions.count(id) ? fractions[id] : 0.0;
    const long t = static_cast<long>(std::floor(supply * f + 1e-9));
    result.tokens[id] = t;
    assigned += t;
  }
  long remainder = cfg.token_supply - assigned;
  for (const auto& id : positive) {  // ids are sorted: tie-break order
    if (remainder <= 0) break;
    if (static_cast<double>(result.tokens[id] + 1) <= supply * cap_f + 1e-9) {
      result.tokens[id] += 1;
      --remainder;
    }
  }
  return result;
}

// theta = c / (q * phi) and the slope of the agent's utility in rho.
struct RhoPreference {
  double theta = 0.0;
  double slope = 0.0;  // positive: prefers rho = 1; negative: rho = 0
};

inline RhoPreference rho_preference(double true_cost, double quality, double marginal_utility,
                                    double monetary_payment, double share, double utility_pool) {
  const double product = quality * marginal_utility;
  if (product <= 0.0) throw DegenerateError("rho_preference: q * phi must be > 0");
  RhoPreference r;
  r.theta = true_cost / product;
  r.slope = (monetary_payment - true_cost) - share * utility_pool;
  return r;
}

inline void to_json(json& j, const MonotonicityViolation& v) {
  j = json{{"agent_id", v.agent_id}, {"wins_at", v.wins_at}, {"loses_at", v.loses_at}};
}

inline void from_json(const json& j, MonotonicityViolation& v) {
  j.at("agent_id").get_to(v.agent_id);
  j.at("wins_at").get_to(v.wins_at);
  j.at("loses_at").get_to(v.loses_at);
}

inline void to_json(json& j, const AuctionOutcome& o) {
  j = json{{"winners", o.winners},
           {"payments", o.payments},
           {"shares", o.shares},
           {"utilities", o.utilities},
           {"diagnostics",
            json{{"payment_sum", o.diagnostics.payment_sum},
                 {"payment_overrun", o.diagnostics.payment_overrun},
                 {"monotonicity_violations", o.diagnostics.monotonicity_violations},
                 {"dropped_for_budget", o.diagnostics.dropped_for_budget}}}};
}

inline void from_json(const json& j, AuctionOutcome& o) {
  j.at("winners").get_to(o.winners);
  j.at("payments").get_to(o.payments);
  j.at("shares").get_to(o.shares);
  j.at("utilities").get_to(o.utilities);
  const json& d = j.at("diagnostics");
  d.at("payment_sum").get_to(o.diagnostics.payment_sum);
  d.at("payment_overrun").get_to(o.diagnostics.payment_overrun);
  d.at("monotonicity_violations").get_to(o.diagnostics.monotonicity_violations);
  d.at("dropped_for_budget").get_to(o.diagnostics.dropped_for_budget);
}

inline void to_json(json& j, const DstAllocation& a) {
  j = json{{"scores", a.scores},
           {"tokens", a.tokens},
           {"floor_applied", a.floor_applied},
           {"cap_applied", a.cap_applied}};
}

inline void from_json(const json& j, DstAllocation& a) {
  j.at("scores").get_to(a.scores);
  j.at("tokens").get_to(a.tokens);
  j.at("floor_applied").get_to(a.floor_applied);
  j.at("cap_applied").get_to(a.cap_applied);
}

}  // namespace datamech
