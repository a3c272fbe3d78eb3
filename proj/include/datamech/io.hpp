#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "datamech/canonical.hpp"
#include "datamech/errors.hpp"
#include "datamech/instance.hpp"
#include "datamech/quality.hpp"
#include "datamech/types.hpp"
#include "datamech/valuation.hpp"

namespace datamech {

inline void to_json(json& j, const DatasetDescriptor& d) { j = dataset_to_json(d); }

inline void from_json(const json& j, DatasetDescriptor& d) {
  j.at("id").get_to(d.id);
  d.documents.clear();
  d.doc_dates.clear();
  for (const auto& doc : j.at("documents")) {
    d.documents.push_back(doc.at("text").get<std::string>());
    d.doc_dates.push_back(parse_date(doc.at("date").get<std::string>()));
  }
  d.metadata.clear();
  for (const auto& [key, value] : j.at("metadata").items()) {
    d.metadata[key] = value.is_null() ? std::nullopt : std::optional<std::string>(value.get<std::string>());
  }
  j.at("token_count").get_to(d.token_count);
  d.validate();
}

inline void to_json(json& j, const AgentReport& r) {
  j = json{{"agent_id", r.agent_id},
           {"reported_cost", r.reported_cost},
           {"dataset", r.dataset},
           {"true_cost", r.true_cost ? json(*r.true_cost) : json()}};
}

inline void from_json(const json& j, AgentReport& r) {
  j.at("agent_id").get_to(r.agent_id);
  j.at("reported_cost").get_to(r.reported_cost);
  j.at("dataset").get_to(r.dataset);
  const auto& tc = j.at("true_cost");
  r.true_cost = tc.is_null() ? std::nullopt : std::optional<double>(tc.get<double>());
  r.validate();
}

inline void to_json(json& j, const ScoredAgent& a) {
  j = json{{"agent_id", a.agent_id},
           {"reported_cost", a.reported_cost},
           {"quality", a.quality},
           {"marginal_utility", a.marginal_utility},
           {"virtual_cost", a.virtual_cost}};
}

inline void from_json(const json& j, ScoredAgent& a) {
  j.at("agent_id").get_to(a.agent_id);
  j.at("reported_cost").get_to(a.reported_cost);
  j.at("quality").get_to(a.quality);
  j.at("marginal_utility").get_to(a.marginal_utility);
  j.at("virtual_cost").get_to(a.virtual_cost);
}

inline void to_json(json& j, const MechanismConfig& c) {
  j = json{{"eta", c.eta},
           {"gamma_exp", c.gamma_exp},
           {"kappa", c.kappa},
           {"rho", c.rho},
           {"lambda", c.lambda},
           {"budget", c.budget},
           {"utility_pool", c.utility_pool},
           {"qwmp_normalizer", c.qwmp_normalizer},
           {"dst_weights", c.dst_weights},
           {"quality_weights", c.quality_weights},
           {"novelty_weights", c.novelty_weights},
           {"token_supply", c.token_supply},
           {"dst_floor_fraction", c.dst_floor_fraction},
           {"dst_cap_fraction", c.dst_cap_fraction},
           {"tie_break", "ascending_agent_id"},
           {"payment_grid_resolution", c.payment_grid_resolution},
           {"strict_budget_mode", c.strict_budget_mode},
           {"concave_transform", c.concave_transform == ConcaveTransform::sqrt ? "sqrt" : "none"}};
}

inline void from_json(const json& j, MechanismConfig& c) {
  static const std::vector<std::string> known = {
      "eta", "gamma_exp", "kappa", "rho", "lambda", "budget", "utility_pool",
      "qwmp_normalizer", "dst_weights", "quality_weights", "novelty_weights",
      "token_supply", "dst_floor_fraction", "dst_cap_fraction", "tie_break",
      "payment_grid_resolution", "strict_budget_mode", "concave_transform",
      "oracle", "simulation"};
  for (const auto& [key, unused] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("config: unknown field '" + key + "'");
    }
  }
  auto get_or = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get_or("eta", c.eta);
  get_or("gamma_exp", c.gamma_exp);
  get_or("kappa", c.kappa);
  get_or("rho", c.rho);
  get_or("lambda", c.lambda);
  get_or("budget", c.budget);
  get_or("utility_pool", c.utility_pool);
  get_or("qwmp_normalizer", c.qwmp_normalizer);
  get_or("dst_weights", c.dst_weights);
  get_or("quality_weights", c.quality_weights);
  get_or("novelty_weights", c.novelty_weights);
  get_or("token_supply", c.token_supply);
  get_or("dst_floor_fraction", c.dst_floor_fraction);
  get_or("dst_cap_fraction", c.dst_cap_fraction);
  get_or("payment_grid_resolution", c.payment_grid_resolution);
  get_or("strict_budget_mode", c.strict_budget_mode);
  if (j.contains("tie_break")) {
    const std::string tb = j.at("tie_break").get<std::string>();
    if (tb != "ascending_agent_id") throw ConfigError("config: unknown tie_break '" + tb + "'");
    c.tie_break = TieBreak::ascending_agent_id;
  }
  if (j.contains("concave_transform")) {
    const std::string ct = j.at("concave_transform").get<std::string>();
    if (ct == "none") {
      c.concave_transform = ConcaveTransform::none;
    } else if (ct == "sqrt") {
      c.concave_transform = ConcaveTransform::sqrt;
    } else {
      throw ConfigError("config: unknown concave_transform '" + ct + "'");
    }
  }
  c.validate();
}

// Corpus format: one agent per JSONL line,
//   {"agent_id", "reported_cost", "documents": [{"text", "date"}...],
//    "metadata": {field: value}, "true_cost"?}
// Failures carry the 1-based line number.
inline std::vector<AgentReport> parse_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("corpus '" + path + "': cannot open");
  std::vector<AgentReport> reports;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      AgentReport r;
      j.at("agent_id").get_to(r.agent_id);
      j.at("reported_cost").get_to(r.reported_cost);
      if (j.contains("true_cost") && !j.at("true_cost").is_null()) {
        r.true_cost = j.at("true_cost").get<double>();
      }
      r.dataset.id = r.agent_id;
      if (j.contains("documents")) {
        for (const auto& doc : j.at("documents")) {
          r.dataset.documents.push_back(doc.at("text").get<std::string>());
          r.dataset.doc_dates.push_back(parse_date(doc.at("date").get<std::string>()));
          r.dataset.token_count += count_tokens(r.dataset.documents.back());
        }
      }
      if (j.contains("metadata")) {
        for (const auto& [key, value] : j.at("metadata").items()) {
          r.dataset.metadata[key] =
              value.is_null() ? std::nullopt : std::optional<std::string>(value.get<std::string>());
        }
      }
      r.validate();
      r.dataset.validate();
      if (!seen.insert(r.agent_id).second) {
        throw DataError("duplicate agent_id '" + r.agent_id + "'");
      }
      reports.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError("corpus '" + path + "' line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("corpus '" + path + "' line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return reports;
}

template <typename T>
inline std::vector<T> parse_jsonl(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string(what) + " '" + path + "': cannot open");
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<T>());
    } catch (const json::exception& e) {
      throw DataError(std::string(what) + " '" + path + "' line " + std::to_string(line_no) +
                      ": " + e.what());
    }
  }
  return out;
}

// Oracle parameters nested under "oracle" in the config document.
inline OracleConfig parse_oracle_config(const json& j, std::optional<Date> fallback_date = {}) {
  OracleConfig cfg;
  bool has_date = false;
  if (j.contains("quality_weights")) j.at("quality_weights").get_to(cfg.quality_weights);
  if (j.contains("novelty_weights")) j.at("novelty_weights").get_to(cfg.novelty_weights);
  if (j.contains("cleanliness_scale_k")) j.at("cleanliness_scale_k").get_to(cfg.cleanliness_scale_k);
  if (j.contains("diversity_mode")) {
    const std::string mode = j.at("diversity_mode").get<std::string>();
    if (mode == "gini_simpson") {
      cfg.diversity_mode = DiversityMode::gini_simpson;
    } else if (mode == "shannon_normalized") {
      cfg.diversity_mode = DiversityMode::shannon_normalized;
    } else {
      throw ConfigError("oracle: unknown diversity_mode '" + mode + "'");
    }
  }
  if (j.contains("embedding")) {
    const json& e = j.at("embedding");
    if (e.contains("dimension")) e.at("dimension").get_to(cfg.embedding.dimension);
    if (e.contains("ngram_order")) e.at("ngram_order").get_to(cfg.embedding.ngram_order);
    if (e.contains("kmeans_k")) e.at("kmeans_k").get_to(cfg.embedding.kmeans_k);
    if (e.contains("kmeans_seed")) e.at("kmeans_seed").get_to(cfg.embedding.kmeans_seed);
    if (e.contains("kmeans_max_iters")) e.at("kmeans_max_iters").get_to(cfg.embedding.kmeans_max_iters);
  }
  if (j.contains("expected_fields")) j.at("expected_fields").get_to(cfg.expected_fields);
  if (j.contains("current_date")) {
    cfg.current_date = parse_date(j.at("current_date").get<std::string>());
    has_date = true;
  }
  if (j.contains("max_range_days")) j.at("max_range_days").get_to(cfg.max_range_days);
  if (j.contains("reference_docs")) j.at("reference_docs").get_to(cfg.reference_docs);
  if (j.contains("wordlist")) {
    std::vector<std::string> words = j.at("wordlist").get<std::vector<std::string>>();
    cfg.wordlist = std::set<std::string>(words.begin(), words.end());
  }
  if (!has_date) {
    if (!fallback_date) {
      throw ConfigError("oracle: current_date missing and no corpus date to fall back on");
    }
    cfg.current_date = *fallback_date;
  }
  cfg.embedding.validate();
  return cfg;
}

// Simulation suite parameters nested under "simulation".
struct SimulationConfig {
  int instances = 500;
  int n_min = 2;
  int n_max = 10;
  int grid_steps = 200;
  Interval cost_range{1.0, 10.0};
  Interval quality_range{0.1, 1.0};
  Interval phi_range{0.01, 1.0};
  std::vector<double> rho_values = {0.0, 0.25, 0.5, 0.75, 1.0};
  int pairs_per_instance = 2;
};

inline SimulationConfig parse_simulation_config(const json& j) {
  SimulationConfig cfg;
  auto get_or = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get_or("instances", cfg.instances);
  get_or("n_min", cfg.n_min);
  get_or("n_max", cfg.n_max);
  get_or("grid_steps", cfg.grid_steps);
  get_or("pairs_per_instance", cfg.pairs_per_instance);
  auto get_interval = [&](const char* key, Interval& iv) {
    if (j.contains(key)) {
      const auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != 2) throw ConfigError(std::string("simulation: ") + key + " must be [lo, hi]");
      iv = Interval{v[0], v[1]};
    }
  };
  get_interval("cost_range", cfg.cost_range);
  get_interval("quality_range", cfg.quality_range);
  get_interval("phi_range", cfg.phi_range);
  get_or("rho_values", cfg.rho_values);
  if (cfg.instances < 1 || cfg.n_min < 1 || cfg.n_max < cfg.n_min || cfg.grid_steps < 2) {
    throw ConfigError("simulation: invalid sweep dimensions");
  }
  return cfg;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("file '" + path + "': cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("file '" + path + "': " + e.what());
  }
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw DataError("file '" + path + "': cannot open for write");
  out << contents;
}

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v == 0.0 ? 0.0 : v);
  return buf;
}

// Flat payment table: agent_id,selected,payment,share,utility. The utility
// column is empty when true costs are unknown.
inline std::string payments_csv(const AuctionOutcome& outcome) {
  std::ostringstream out;
  out << "agent_id,selected,payment,share,utility\n";
  for (const auto& [id, payment] : outcome.payments) {
    out << id << ',' << (outcome.is_winner(id) ? 1 : 0) << ',' << csv_number(payment) << ','
        << csv_number(outcome.shares.at(id));
    out << ',';
    const auto it = outcome.utilities.find(id);
    if (it != outcome.utilities.end()) out << csv_number(it->second);
    out << '\n';
  }
  return out.str();
}

}  // namespace datamech
