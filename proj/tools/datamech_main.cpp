// Command-line driver: quality scoring, auctions, strategy simulations and
// audit-chain verification over JSONL corpora.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "datamech/datamech.hpp"

namespace {

using namespace datamech;

std::string sibling_csv_path(const std::string& out_path) {
  if (out_path.size() > 5 && out_path.substr(out_path.size() - 5) == ".json") {
    return out_path.substr(0, out_path.size() - 5) + ".csv";
  }
  return out_path + ".csv";
}

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::string audit_path = "audit.jsonl";
};

int cmd_score(const std::string& corpus_path, const CommonArgs& args) {
  const json config = load_json_file(args.config_path);
  const std::vector<AgentReport> reports = parse_corpus(corpus_path);
  if (reports.empty()) throw DataError("corpus '" + corpus_path + "': no agents");

  // Fallback scoring date: the newest document in the corpus, the same for
  // every agent.
  std::optional<Date> max_date;
  for (const auto& r : reports) {
    for (const Date& d : r.dataset.doc_dates) {
      if (!max_date || d.days > max_date->days) max_date = d;
    }
  }
  const OracleConfig oracle =
      parse_oracle_config(config.contains("oracle") ? config.at("oracle") : json::object(),
                          max_date);

  AuditLog log(args.audit_path);
  std::ostringstream out;
  for (const auto& r : reports) {
    const QualityReport q = score_dataset(r.dataset, oracle);
    const json payload = json(q);
    out << canonical_dump(payload) << '\n';
    log.append("quality_score", payload);
  }
  write_file(args.out_path, out.str());
  std::cout << "scored " << reports.size() << " agents -> " << args.out_path << "\n";
  return 0;
}

int cmd_auction(const std::string& reports_path, const std::string& scores_path,
                const std::string& estimates_path, const std::string& mechanism,
                bool strict_budget, const CommonArgs& args) {
  MechanismConfig cfg = load_json_file(args.config_path).get<MechanismConfig>();
  if (strict_budget) cfg.strict_budget_mode = true;

  const std::vector<AgentReport> reports = parse_corpus(reports_path);
  const auto quality_reports = parse_jsonl<QualityReport>(scores_path, "scores");
  const auto estimates = parse_jsonl<MarginalEstimate>(estimates_path, "estimates");

  std::map<std::string, double> quality, marginal, raw_marginal, true_costs, volumes;
  for (const auto& q : quality_reports) quality[q.agent_id] = q.composite;
  for (const auto& e : estimates) {
    marginal[e.agent_id] = e.rescaled;
    raw_marginal[e.agent_id] = e.raw;
  }

  std::vector<std::string> orphans;
  for (const auto& r : reports) {
    if (!quality.count(r.agent_id)) orphans.push_back(r.agent_id + " (no quality score)");
    if (!marginal.count(r.agent_id)) orphans.push_back(r.agent_id + " (no marginal estimate)");
  }
  for (const auto& q : quality_reports) {
    if (std::none_of(reports.begin(), reports.end(),
                     [&](const AgentReport& r) { return r.agent_id == q.agent_id; })) {
      orphans.push_back(q.agent_id + " (score without report)");
    }
  }
  for (const auto& e : estimates) {
    if (std::none_of(reports.begin(), reports.end(),
                     [&](const AgentReport& r) { return r.agent_id == e.agent_id; })) {
      orphans.push_back(e.agent_id + " (estimate without report)");
    }
  }
  if (!orphans.empty()) {
    std::ostringstream msg;
    msg << "inconsistent agent ids across inputs:";
    for (const auto& o : orphans) msg << "\n  " << o;
    throw DataError(msg.str());
  }

  bool any_true_cost = false;
  for (const auto& r : reports) {
    volumes[r.agent_id] = static_cast<double>(r.dataset.token_count);
    if (r.true_cost) {
      true_costs[r.agent_id] = *r.true_cost;
      any_true_cost = true;
    }
  }

  AuditLog log(args.audit_path);
  json outcome_json;
  std::string csv;

  if (mechanism == "dst") {
    const DstAllocation allocation = dst_allocate(volumes, quality, raw_marginal, cfg);
    outcome_json = json(allocation);
    std::ostringstream c;
    c << "agent_id,selected,payment,share,utility\n";
    for (const auto& [id, tokens] : allocation.tokens) {
      c << id << ',' << (tokens > 0 ? 1 : 0) << ',' << tokens << ','
        << csv_number(allocation.scores.at(id)) << ",\n";
    }
    csv = c.str();
  } else {
    std::vector<ScoredAgent> agents;
    for (const auto& r : reports) {
      agents.push_back(make_scored(r.agent_id, r.reported_cost, quality.at(r.agent_id),
                                   marginal.at(r.agent_id), cfg));
    }
    const std::map<std::string, double>* costs = any_true_cost ? &true_costs : nullptr;
    AuctionOutcome outcome;
    if (mechanism == "qmia") {
      outcome = qmia(agents, cfg, costs);
    } else if (mechanism == "mixed") {
      outcome = mixed_mia(agents, cfg, costs);
    } else {  // mut: the pure utility-sharing regime
      cfg.rho = 0.0;
      outcome = mixed_mia(agents, cfg, costs);
    }
    outcome_json = json(outcome);
    csv = payments_csv(outcome);
  }

  write_file(args.out_path, canonical_dump(outcome_json) + "\n");
  write_file(sibling_csv_path(args.out_path), csv);
  log.append("auction", json{{"mechanism", mechanism}, {"outcome", outcome_json}});
  std::cout << "auction (" << mechanism << ") -> " << args.out_path << "\n";
  return 0;
}

struct SuiteReport {
  json summary;
  std::string csv;
  long violations = 0;
};

SuiteReport run_dsic_suite(const SimulationConfig& sim, const MechanismConfig& base,
                           std::uint64_t seed) {
  SuiteReport report;
  std::ostringstream csv;
  csv << "seed,mechanism,rho,agent_id,truthful_utility,best_deviation_utility,"
         "best_deviation_report,violation,monotonicity_flag\n";
  long monotonicity_flags = 0;
  std::map<std::string, long> by_run;
  MechanismConfig cfg = base;
  const double tol = dsic_tolerance(base);

  for (int i = 0; i < sim.instances; ++i) {
    const int n = sim.n_min + static_cast<int>((seed + i) % (sim.n_max - sim.n_min + 1));
    const auto inst = make_sim_instance(
        generate_instance(seed + i, n, sim.cost_range, sim.quality_range, sim.phi_range), base);

    auto record = [&](const char* mech_name, double rho, const std::vector<DsicVerdict>& vs) {
      for (const auto& v : vs) {
        csv << (seed + i) << ',' << mech_name << ',' << csv_number(rho) << ',' << v.agent_id << ','
            << csv_number(v.truthful_utility) << ',' << csv_number(v.best_deviation_utility) << ','
            << csv_number(v.best_deviation_report) << ',' << (v.violation ? 1 : 0) << ','
            << (v.monotonicity_flag ? 1 : 0) << '\n';
        if (v.violation) {
          ++report.violations;
          std::ostringstream key;
          key << mech_name;
          if (std::string(mech_name) == "mixed") key << "_rho_" << rho;
          ++by_run[key.str()];
        }
        if (v.monotonicity_flag) ++monotonicity_flags;
      }
    };

    record("qmia", 1.0, dsic_sweep(inst, MechanismKind::qmia, cfg, sim.grid_steps, tol));
    for (double rho : sim.rho_values) {
      cfg.rho = rho;
      record("mixed", rho, dsic_sweep(inst, MechanismKind::mixed, cfg, sim.grid_steps, tol));
    }
  }
  report.summary = json{{"suite", "dsic"},
                        {"instances", sim.instances},
                        {"grid_steps", sim.grid_steps},
                        {"tolerance", tol},
                        {"violations", report.violations},
                        {"violations_by_run", by_run},
                        {"monotonicity_flags", monotonicity_flags}};
  report.csv = csv.str();
  return report;
}

SuiteReport run_ir_suite(const SimulationConfig& sim, const MechanismConfig& base,
                         std::uint64_t seed) {
  SuiteReport report;
  std::ostringstream csv;
  csv << "seed,mechanism,rho,agent_id,utility\n";
  MechanismConfig cfg = base;
  for (int i = 0; i < sim.instances; ++i) {
    const int n = sim.n_min + static_cast<int>((seed + i) % (sim.n_max - sim.n_min + 1));
    const auto inst = make_sim_instance(
        generate_instance(seed + i, n, sim.cost_range, sim.quality_range, sim.phi_range), base);
    const auto q_out = qmia(inst.agents, cfg, &inst.true_costs);
    for (const auto& [id, u] : ir_audit(q_out)) {
      csv << (seed + i) << ",qmia,1," << id << ',' << csv_number(u) << '\n';
      ++report.violations;
    }
    for (double rho : sim.rho_values) {
      cfg.rho = rho;
      const auto m_out = mixed_mia(inst.agents, cfg, &inst.true_costs);
      for (const auto& [id, u] : ir_audit(m_out)) {
        csv << (seed + i) << ",mixed," << csv_number(rho) << ',' << id << ',' << csv_number(u)
            << '\n';
        ++report.violations;
      }
    }
  }
  report.summary =
      json{{"suite", "ir"}, {"instances", sim.instances}, {"violations", report.violations}};
  report.csv = csv.str();
  return report;
}

SuiteReport run_collusion_suite(const SimulationConfig& sim, const MechanismConfig& base,
                                std::uint64_t seed) {
  SuiteReport report;
  std::ostringstream csv;
  csv << "seed,agent_a,agent_b,joint_gain,report_a,report_b\n";
  const double tol = dsic_tolerance(base);
  double max_gain = 0.0;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  for (int i = 0; i < sim.instances; ++i) {
    const int n =
        std::max(2, sim.n_min + static_cast<int>((seed + i) % (sim.n_max - sim.n_min + 1)));
    const auto inst = make_sim_instance(
        generate_instance(seed + i, n, sim.cost_range, sim.quality_range, sim.phi_range), base);
    for (int p = 0; p < sim.pairs_per_instance; ++p) {
      const std::size_t a = rng.below(inst.agents.size());
      std::size_t b = rng.below(inst.agents.size() - 1);
      if (b >= a) ++b;
      const auto result =
          collusion_probe(inst, {inst.agents[a].agent_id, inst.agents[b].agent_id},
                          MechanismKind::qmia, base, std::min(sim.grid_steps, 40));
      csv << (seed + i) << ',' << inst.agents[a].agent_id << ',' << inst.agents[b].agent_id << ','
          << csv_number(result.joint_gain) << ',' << csv_number(result.profile.first) << ','
          << csv_number(result.profile.second) << '\n';
      max_gain = std::max(max_gain, result.joint_gain);
      if (result.joint_gain > tol) ++report.violations;
    }
  }
  report.summary = json{{"suite", "collusion"},
                        {"instances", sim.instances},
                        {"pairs_per_instance", sim.pairs_per_instance},
                        {"tolerance", tol},
                        {"max_joint_gain", max_gain},
                        {"violations", report.violations}};
  report.csv = csv.str();
  return report;
}

SuiteReport run_rho_suite(const SimulationConfig& sim, const MechanismConfig& base,
                          std::uint64_t seed) {
  SuiteReport report;
  std::ostringstream csv;
  csv << "seed,agent_id,slope,max_affine_deviation\n";
  double worst = 0.0;
  for (int i = 0; i < sim.instances; ++i) {
    const int n = sim.n_min + static_cast<int>((seed + i) % (sim.n_max - sim.n_min + 1));
    const auto inst = make_sim_instance(
        generate_instance(seed + i, n, sim.cost_range, sim.quality_range, sim.phi_range), base);
    const auto sweep = rho_sweep(inst, base, sim.rho_values);
    for (const auto& [id, curve] : sweep.utilities) {
      // Affine fit through the endpoints; every inner point must sit on it.
      const double lo = curve.front();
      const double hi = curve.back();
      const double r_lo = sim.rho_values.front();
      const double r_hi = sim.rho_values.back();
      const double slope = r_hi > r_lo ? (hi - lo) / (r_hi - r_lo) : 0.0;
      double dev = 0.0;
      for (std::size_t k = 0; k < curve.size(); ++k) {
        dev = std::max(dev, std::abs(curve[k] - (lo + slope * (sim.rho_values[k] - r_lo))));
      }
      csv << (seed + i) << ',' << id << ',' << csv_number(slope) << ',' << csv_number(dev) << '\n';
      worst = std::max(worst, dev);
      if (dev > 1e-9) ++report.violations;
    }
  }
  report.summary = json{{"suite", "rho"},
                        {"instances", sim.instances},
                        {"max_affine_deviation", worst},
                        {"violations", report.violations}};
  report.csv = csv.str();
  return report;
}

int cmd_simulate(const std::string& suite, std::uint64_t seed, const CommonArgs& args) {
  const json config = load_json_file(args.config_path);
  const MechanismConfig cfg = config.get<MechanismConfig>();
  const SimulationConfig sim = parse_simulation_config(
      config.contains("simulation") ? config.at("simulation") : json::object());

  SuiteReport report;
  if (suite == "dsic") {
    report = run_dsic_suite(sim, cfg, seed);
  } else if (suite == "ir") {
    report = run_ir_suite(sim, cfg, seed);
  } else if (suite == "collusion") {
    report = run_collusion_suite(sim, cfg, seed);
  } else {
    report = run_rho_suite(sim, cfg, seed);
  }
  report.summary["seed"] = seed;

  write_file(args.out_path, canonical_dump(report.summary) + "\n");
  write_file(sibling_csv_path(args.out_path), report.csv);
  AuditLog log(args.audit_path);
  log.append("simulation", report.summary);
  std::cout << canonical_dump(report.summary) << "\n";
  return report.violations == 0 ? 0 : 1;
}

int cmd_audit_verify(const std::string& log_path) {
  const AuditVerification v = verify_audit_log(log_path);
  if (v.intact) {
    std::cout << "audit chain intact: " << v.records << " records\n";
    return 0;
  }
  std::cout << "audit chain BROKEN at sequence " << v.first_break << ": " << v.message << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truthful data-procurement mechanisms: quality oracle, auctions, strategy lab"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string corpus_path, reports_path, scores_path, estimates_path, log_path;
  std::string mechanism = "qmia";
  std::string suite;
  std::uint64_t seed = 0;
  bool strict_budget = false;

  auto* score = app.add_subcommand("score", "Compute quality reports for a JSONL corpus");
  score->add_option("corpus", corpus_path, "corpus JSONL path")->required();
  score->add_option("--config", common.config_path, "config JSON path")->required();
  score->add_option("--out", common.out_path, "output JSONL path")->required();
  score->add_option("--audit-log", common.audit_path, "audit log path");

  auto* auction = app.add_subcommand("auction", "Run a mechanism over scored reports");
  auction->add_option("reports", reports_path, "agent reports JSONL")->required();
  auction->add_option("scores", scores_path, "quality reports JSONL")->required();
  auction->add_option("estimates", estimates_path, "marginal estimates JSONL")->required();
  auction->add_option("--config", common.config_path, "config JSON path")->required();
  auction->add_option("--mechanism", mechanism, "mechanism to run")
      ->check(CLI::IsMember({"qmia", "mut", "mixed", "dst"}));
  auction->add_option("--out", common.out_path, "outcome JSON path")->required();
  auction->add_option("--audit-log", common.audit_path, "audit log path");
  auction->add_flag("--strict-budget", strict_budget, "enforce total payments <= budget");

  auto* simulate = app.add_subcommand("simulate", "Run a strategy-lab property suite");
  simulate->add_option("--config", common.config_path, "config JSON path")->required();
  simulate->add_option("--suite", suite, "property suite")
      ->required()
      ->check(CLI::IsMember({"dsic", "ir", "collusion", "rho"}));
  simulate->add_option("--seed", seed, "base seed");
  simulate->add_option("--out", common.out_path, "summary JSON path")->required();
  simulate->add_option("--audit-log", common.audit_path, "audit log path");

  auto* verify = app.add_subcommand("audit-verify", "Check an audit log's digest chain");
  verify->add_option("log", log_path, "audit log path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (score->parsed()) return cmd_score(corpus_path, common);
    if (auction->parsed()) {
      return cmd_auction(reports_path, scores_path, estimates_path, mechanism, strict_budget,
                         common);
    }
    if (simulate->parsed()) return cmd_simulate(suite, seed, common);
    return cmd_audit_verify(log_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
