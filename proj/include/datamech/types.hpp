#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "datamech/dates.hpp"
#include "datamech/errors.hpp"
#include "datamech/text.hpp"

namespace datamech {

// One provider's submitted corpus.
struct DatasetDescriptor {
  std::string id;
  std::vector<std::string> documents;
  std::vector<Date> doc_dates;  // one per document
  std::map<std::string, std::optional<std::string>> metadata;
  std::size_t token_count = 0;  // usable tokens after normalization

  void validate() const {
    if (doc_dates.size() != documents.size()) {
      throw DataError("dataset '" + id + "': documents and doc_dates differ in length");
    }
    std::size_t total = 0;
    for (const auto& doc : documents) total += count_tokens(doc);
    if (total != token_count) {
      throw DataError("dataset '" + id + "': token_count " + std::to_string(token_count) +
                      " does not match tokenizer total " + std::to_string(total));
    }
  }
};

// Builds a descriptor with token_count derived from the module tokenizer.
inline DatasetDescriptor make_dataset(std::string id, std::vector<std::string> documents,
                                      std::vector<Date> doc_dates,
                                      std::map<std::string, std::optional<std::string>> metadata = {}) {
  DatasetDescriptor d;
  d.id = std::move(id);
  d.documents = std::move(documents);
  d.doc_dates = std::move(doc_dates);
  d.metadata = std::move(metadata);
  for (const auto& doc : d.documents) d.token_count += count_tokens(doc);
  d.validate();
  return d;
}

// An agent's strategic submission. true_cost is only present in simulation
// contexts where the harness knows it.
struct AgentReport {
  std::string agent_id;
  double reported_cost = 0.0;
  DatasetDescriptor dataset;
  std::optional<double> true_cost;

  void validate() const {
    if (reported_cost < 0.0) {
      throw DataError("agent '" + agent_id + "': reported_cost must be >= 0");
    }
    if (true_cost && *true_cost < 0.0) {
      throw DataError("agent '" + agent_id + "': true_cost must be >= 0");
    }
  }
};

enum class TieBreak { ascending_agent_id };

enum class ConcaveTransform { none, sqrt };

// All planner parameters shared by the mechanisms.
struct MechanismConfig {
  double eta = 1.0;        // quality exponent in the virtual cost
  double gamma_exp = 1.0;  // marginal-utility exponent in the virtual cost
  double kappa = 0.0;      // regularizer added to the marginal estimate
  double rho = 1.0;        // liquidity factor: 1 = pure monetary, 0 = pure shares
  double lambda = 1.0;     // surplus trade-off in the planner objective
  double budget = 0.0;
  double utility_pool = 0.0;
  double qwmp_normalizer = 1.0;
  std::array<double, 3> dst_weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};  // volume, quality, impact
  std::array<double, 4> quality_weights = {0.25, 0.25, 0.25, 0.25};
  std::array<double, 2> novelty_weights = {0.5, 0.5};  // recency, uniqueness
  long token_supply = 100000;
  double dst_floor_fraction = 0.001;
  double dst_cap_fraction = 0.2;
  TieBreak tie_break = TieBreak::ascending_agent_id;
  double payment_grid_resolution = 0.0;  // 0 = auto: 1e-6 * budget
  bool strict_budget_mode = false;
  ConcaveTransform concave_transform = ConcaveTransform::none;

  double effective_grid() const {
    if (payment_grid_resolution > 0.0) return payment_grid_resolution;
    return budget > 0.0 ? 1e-6 * budget : 1e-6;
  }

  void validate() const {
    constexpr double kTol = 1e-9;
    auto sums_to_one = [](auto begin, auto end) {
      double s = 0.0;
      for (auto it = begin; it != end; ++it) {
        if (*it < 0.0) return false;
        s += *it;
      }
      return std::abs(s - 1.0) <= kTol;
    };
    if (eta < 0.0 || gamma_exp < 0.0 || kappa < 0.0) {
      throw ConfigError("eta, gamma_exp and kappa must be >= 0");
    }
    if (rho < 0.0 || rho > 1.0) throw ConfigError("rho must lie in [0, 1]");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (budget < 0.0) throw ConfigError("budget must be >= 0");
    if (utility_pool < 0.0) throw ConfigError("utility_pool must be >= 0");
    if (qwmp_normalizer <= 0.0) throw ConfigError("qwmp_normalizer must be > 0");
    if (!sums_to_one(dst_weights.begin(), dst_weights.end())) {
      throw ConfigError("dst_weights must be non-negative and sum to 1");
    }
    if (!sums_to_one(quality_weights.begin(), quality_weights.end())) {
      throw ConfigError("quality_weights must be non-negative and sum to 1");
    }
    if (!sums_to_one(novelty_weights.begin(), novelty_weights.end())) {
      throw ConfigError("novelty_weights must be non-negative and sum to 1");
    }
    if (token_supply <= 0) throw ConfigError("token_supply must be > 0");
    if (dst_floor_fraction < 0.0 || dst_floor_fraction >= 1.0) {
      throw ConfigError("dst_floor_fraction must lie in [0, 1)");
    }
    if (dst_cap_fraction <= 0.0 || dst_cap_fraction > 1.0) {
      throw ConfigError("dst_cap_fraction must lie in (0, 1]");
    }
    if (dst_floor_fraction > dst_cap_fraction) {
      throw ConfigError("dst_floor_fraction must not exceed dst_cap_fraction");
    }
    if (payment_grid_resolution < 0.0) {
      throw ConfigError("payment_grid_resolution must be >= 0");
    }
  }
};

// One agent as the auction sees it: report plus verified scores.
struct ScoredAgent {
  std::string agent_id;
  double reported_cost = 0.0;
  double quality = 0.0;           // q in [0, 1]
  double marginal_utility = 0.0;  // rescaled phi-hat
  double virtual_cost = 0.0;      // psi, the ranking key
};

struct MonotonicityViolation {
  std::string agent_id;
  double wins_at = 0.0;   // a report at which the agent is selected
  double loses_at = 0.0;  // a smaller report at which it is not
};

// Winner set, payments and shares produced by one mechanism run.
struct AuctionOutcome {
  std::vector<std::string> winners;  // in selection order
  std::map<std::string, double> payments;
  std::map<std::string, double> shares;
  std::map<std::string, double> utilities;  // present only when true costs are known
  struct Diagnostics {
    double payment_sum = 0.0;
    bool payment_overrun = false;
    std::vector<MonotonicityViolation> monotonicity_violations;
    std::vector<std::string> dropped_for_budget;
  } diagnostics;

  bool is_winner(const std::string& agent_id) const {
    for (const auto& w : winners) {
      if (w == agent_id) return true;
    }
    return false;
  }
};

}  // namespace datamech
