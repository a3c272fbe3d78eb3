#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "datamech/audit.hpp"
#include "datamech/canonical.hpp"

using datamech::json;

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code = -1;
  std::string stdout_text;
  std::string stderr_text;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

class CliFixture {
 public:
  CliFixture() {
    dir_ = fs::temp_directory_path() / ("datamech_cli_" + std::to_string(getpid()) + "_" +
                                        std::to_string(counter_++));
    fs::create_directories(dir_);
  }

  fs::path write(const std::string& name, const std::string& contents) {
    const fs::path p = dir_ / name;
    std::ofstream out(p);
    out << contents;
    return p;
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  CliResult run(const std::string& args) const {
    const fs::path out_file = dir_ / "stdout.txt";
    const fs::path err_file = dir_ / "stderr.txt";
    const std::string cmd = std::string(DATAMECH_CLI_PATH) + " " + args + " >" + out_file.string() +
                            " 2>" + err_file.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.stdout_text = slurp(out_file);
    r.stderr_text = slurp(err_file);
    return r;
  }

 private:
  fs::path dir_;
  static inline int counter_ = 0;
};

const char* kWitnessCorpus =
    R"({"agent_id":"a1","reported_cost":2.0,"true_cost":2.0,"documents":[{"text":"alpha beta gamma","date":"2024-03-01"}],"metadata":{"source":"x","date":"2024","language":"en","license":"mit","author":"a"}})"
    "\n"
    R"({"agent_id":"a2","reported_cost":3.0,"true_cost":3.0,"documents":[{"text":"delta epsilon zeta","date":"2024-03-02"}],"metadata":{"source":"y"}})"
    "\n"
    R"({"agent_id":"a3","reported_cost":10.0,"true_cost":10.0,"documents":[{"text":"eta theta iota","date":"2024-03-03"}],"metadata":{}})"
    "\n";

std::string unit_scores() {
  std::ostringstream out;
  for (const char* id : {"a1", "a2", "a3"}) {
    json q{{"agent_id", id},          {"cleanliness", 1.0},
           {"diversity", 1.0},        {"novelty", 1.0},
           {"metadata_richness", 1.0}, {"composite", 1.0},
           {"params_hash", std::string(64, '0')}, {"content_hash", std::string(64, '1')}};
    out << datamech::canonical_dump(q) << "\n";
  }
  return out.str();
}

std::string unit_estimates() {
  std::ostringstream out;
  for (const char* id : {"a1", "a2", "a3"}) {
    json e{{"agent_id", id}, {"raw", 1.0},          {"rescaled", 1.0},
           {"estimator", "loo"}, {"samples_used", 0}, {"seed", 0}};
    out << datamech::canonical_dump(e) << "\n";
  }
  return out.str();
}

std::string base_config(double budget, double rho, double pool) {
  json cfg{{"budget", budget},
           {"rho", rho},
           {"utility_pool", pool},
           {"oracle",
            json{{"reference_docs", json::array({"totally unrelated reference text"})},
                 {"embedding", json{{"kmeans_k", 2}}}}},
           {"simulation",
            json{{"instances", 10}, {"n_min", 2}, {"n_max", 5}, {"grid_steps", 60}}}};
  return cfg.dump();
}

}  // namespace

TEST_CASE("cli: score -> auction -> audit-verify round trip", "[cli]") {
  CliFixture fx;
  const auto corpus = fx.write("corpus.jsonl", kWitnessCorpus);
  const auto config = fx.write("config.json", base_config(6.0, 1.0, 0.0));
  const auto audit = fx.path("audit.jsonl");

  const auto score = fx.run("score " + corpus.string() + " --config " + config.string() +
                            " --out " + fx.path("scores.jsonl").string() + " --audit-log " +
                            audit.string());
  INFO(score.stderr_text);
  REQUIRE(score.exit_code == 0);

  // Scoring the same corpus twice produces identical report bytes.
  const std::string first = slurp(fx.path("scores.jsonl"));
  const auto rescore = fx.run("score " + corpus.string() + " --config " + config.string() +
                              " --out " + fx.path("scores2.jsonl").string() + " --audit-log " +
                              audit.string());
  REQUIRE(rescore.exit_code == 0);
  CHECK(first == slurp(fx.path("scores2.jsonl")));

  // Auction over hand-pinned unit scores reproduces the witness payments.
  fx.write("unit_scores.jsonl", unit_scores());
  fx.write("estimates.jsonl", unit_estimates());
  const auto auction = fx.run("auction " + corpus.string() + " " +
                              fx.path("unit_scores.jsonl").string() + " " +
                              fx.path("estimates.jsonl").string() + " --config " + config.string() +
                              " --mechanism qmia --out " + fx.path("outcome.json").string() +
                              " --audit-log " + audit.string());
  INFO(auction.stderr_text);
  REQUIRE(auction.exit_code == 0);

  const json outcome = json::parse(slurp(fx.path("outcome.json")));
  CHECK(outcome.at("payments").at("a1").get<double>() == 3.0);
  CHECK(outcome.at("payments").at("a2").get<double>() == 4.0);
  CHECK(outcome.at("diagnostics").at("payment_overrun").get<bool>());
  CHECK(outcome.at("utilities").at("a1").get<double>() == 1.0);

  const std::string csv = slurp(fx.path("outcome.csv"));
  CHECK(csv.find("agent_id,selected,payment,share,utility") == 0);
  CHECK(csv.find("a1,1,3,") != std::string::npos);

  const auto verify = fx.run("audit-verify " + audit.string());
  REQUIRE(verify.exit_code == 0);
  CHECK(verify.stdout_text.find("intact") != std::string::npos);
}

TEST_CASE("cli: strict budget flag caps total payments", "[cli]") {
  CliFixture fx;
  const auto corpus = fx.write("corpus.jsonl", kWitnessCorpus);
  const auto config = fx.write("config.json", base_config(6.0, 1.0, 0.0));
  fx.write("unit_scores.jsonl", unit_scores());
  fx.write("estimates.jsonl", unit_estimates());
  const auto auction = fx.run("auction " + corpus.string() + " " +
                              fx.path("unit_scores.jsonl").string() + " " +
                              fx.path("estimates.jsonl").string() + " --config " + config.string() +
                              " --mechanism qmia --strict-budget --out " +
                              fx.path("outcome.json").string() + " --audit-log " +
                              fx.path("audit.jsonl").string());
  REQUIRE(auction.exit_code == 0);
  const json outcome = json::parse(slurp(fx.path("outcome.json")));
  CHECK(outcome.at("diagnostics").at("payment_sum").get<double>() <= 6.0);
  CHECK(outcome.at("diagnostics").at("dropped_for_budget").size() == 1);
}

TEST_CASE("cli: mut mechanism pays pure utility shares", "[cli]") {
  CliFixture fx;
  const auto corpus = fx.write("corpus.jsonl", kWitnessCorpus);
  const auto config = fx.write("config.json", base_config(6.0, 0.75, 9.0));
  fx.write("unit_scores.jsonl", unit_scores());
  fx.write("estimates.jsonl", unit_estimates());
  const auto auction = fx.run("auction " + corpus.string() + " " +
                              fx.path("unit_scores.jsonl").string() + " " +
                              fx.path("estimates.jsonl").string() + " --config " + config.string() +
                              " --mechanism mut --out " + fx.path("outcome.json").string() +
                              " --audit-log " + fx.path("audit.jsonl").string());
  REQUIRE(auction.exit_code == 0);
  const json outcome = json::parse(slurp(fx.path("outcome.json")));
  // Two equal winners split the pool of 9 regardless of rho in the config.
  CHECK(outcome.at("payments").at("a1").get<double>() == Catch::Approx(4.5));
  CHECK(outcome.at("payments").at("a2").get<double>() == Catch::Approx(4.5));
}

TEST_CASE("cli: dst mechanism allocates the token supply", "[cli]") {
  CliFixture fx;
  const auto corpus = fx.write("corpus.jsonl", kWitnessCorpus);
  json cfg = json::parse(base_config(6.0, 1.0, 0.0));
  cfg["dst_cap_fraction"] = 0.6;
  const auto config = fx.write("config.json", cfg.dump());
  fx.write("unit_scores.jsonl", unit_scores());
  fx.write("estimates.jsonl", unit_estimates());
  const auto auction = fx.run("auction " + corpus.string() + " " +
                              fx.path("unit_scores.jsonl").string() + " " +
                              fx.path("estimates.jsonl").string() + " --config " + config.string() +
                              " --mechanism dst --out " + fx.path("dst.json").string() +
                              " --audit-log " + fx.path("audit.jsonl").string());
  INFO(auction.stderr_text);
  REQUIRE(auction.exit_code == 0);
  const json outcome = json::parse(slurp(fx.path("dst.json")));
  long total = 0;
  for (const auto& [id, tokens] : outcome.at("tokens").items()) total += tokens.get<long>();
  CHECK(total <= 100000);
  CHECK(total >= 100000 - 3);
}

TEST_CASE("cli: auction rejects inconsistent agent ids", "[cli]") {
  CliFixture fx;
  const auto corpus = fx.write("corpus.jsonl", kWitnessCorpus);
  const auto config = fx.write("config.json", base_config(6.0, 1.0, 0.0));
  fx.write("unit_scores.jsonl", unit_scores());
  // Estimates missing a2 and a3.
  fx.write("estimates.jsonl",
           R"({"agent_id":"a1","raw":1.0,"rescaled":1.0,"estimator":"loo","samples_used":0,"seed":0})"
           "\n");
  const auto auction = fx.run("auction " + corpus.string() + " " +
                              fx.path("unit_scores.jsonl").string() + " " +
                              fx.path("estimates.jsonl").string() + " --config " + config.string() +
                              " --out " + fx.path("outcome.json").string());
  CHECK(auction.exit_code != 0);
  CHECK(auction.stderr_text.find("a2") != std::string::npos);
  CHECK(auction.stderr_text.find("a3") != std::string::npos);
}

TEST_CASE("cli: corrupt corpus lines are named", "[cli]") {
  CliFixture fx;
  const auto corpus = fx.write("corpus.jsonl",
                               std::string(R"({"agent_id":"a1","reported_cost":2.0})") +
                                   "\nnot json at all\n");
  const auto config = fx.write("config.json", base_config(6.0, 1.0, 0.0));
  const auto score = fx.run("score " + corpus.string() + " --config " + config.string() +
                            " --out " + fx.path("scores.jsonl").string());
  CHECK(score.exit_code != 0);
  CHECK(score.stderr_text.find("line 2") != std::string::npos);
}

TEST_CASE("cli: missing estimates file fails", "[cli]") {
  CliFixture fx;
  const auto corpus = fx.write("corpus.jsonl", kWitnessCorpus);
  const auto config = fx.write("config.json", base_config(6.0, 1.0, 0.0));
  fx.write("unit_scores.jsonl", unit_scores());
  const auto auction = fx.run("auction " + corpus.string() + " " +
                              fx.path("unit_scores.jsonl").string() + " " +
                              fx.path("nope.jsonl").string() + " --config " + config.string() +
                              " --out " + fx.path("outcome.json").string());
  CHECK(auction.exit_code != 0);
}

TEST_CASE("cli: simulate ir suite passes and writes a summary", "[cli]") {
  CliFixture fx;
  const auto config = fx.write("config.json", base_config(12.0, 0.5, 1.0));
  const auto sim = fx.run("simulate --config " + config.string() +
                          " --suite ir --seed 42 --out " + fx.path("ir.json").string() +
                          " --audit-log " + fx.path("audit.jsonl").string());
  INFO(sim.stderr_text);
  REQUIRE(sim.exit_code == 0);
  const json summary = json::parse(slurp(fx.path("ir.json")));
  CHECK(summary.at("violations").get<long>() == 0);
  CHECK(slurp(fx.path("ir.csv")).find("seed,mechanism") == 0);
}

TEST_CASE("cli: simulate dsic suite is clean for the monetary mechanism", "[cli]") {
  CliFixture fx;
  // No deferred pool: the hybrid reduces to threshold payments at every rho.
  const auto config = fx.write("config.json", base_config(12.0, 0.5, 0.0));
  const auto sim = fx.run("simulate --config " + config.string() +
                          " --suite dsic --seed 7 --out " + fx.path("dsic.json").string() +
                          " --audit-log " + fx.path("audit.jsonl").string());
  INFO(sim.stderr_text);
  REQUIRE(sim.exit_code == 0);
  const json summary = json::parse(slurp(fx.path("dsic.json")));
  CHECK(summary.at("violations").get<long>() == 0);
  CHECK(summary.at("monotonicity_flags").get<long>() == 0);
}

TEST_CASE("cli: simulate dsic suite surfaces hybrid share-composition deviations", "[cli]") {
  CliFixture fx;
  // With a positive pool the hybrid admits profitable deviations at rho < 1
  // (winner-set composition moves the shares); the suite must report them
  // and exit nonzero.
  const auto config = fx.write("config.json", base_config(12.0, 0.5, 1.0));
  const auto sim = fx.run("simulate --config " + config.string() +
                          " --suite dsic --seed 7 --out " + fx.path("dsic.json").string() +
                          " --audit-log " + fx.path("audit.jsonl").string());
  REQUIRE(sim.exit_code == 1);
  const json summary = json::parse(slurp(fx.path("dsic.json")));
  CHECK(summary.at("violations").get<long>() > 0);
  CHECK(summary.at("violations_by_run").contains("qmia") == false);  // monetary leg stays clean
}

TEST_CASE("cli: simulate collusion suite surfaces mutual threshold inflation", "[cli]") {
  CliFixture fx;
  const auto config = fx.write("config.json", base_config(12.0, 0.5, 1.0));
  const auto sim = fx.run("simulate --config " + config.string() +
                          " --suite collusion --seed 5 --out " + fx.path("coll.json").string() +
                          " --audit-log " + fx.path("audit.jsonl").string());
  // Pairs of co-winners can jointly raise each other's thresholds in the
  // default budget mode; the suite reports them and exits nonzero.
  REQUIRE(sim.exit_code == 1);
  const json summary = json::parse(slurp(fx.path("coll.json")));
  CHECK(summary.at("violations").get<long>() > 0);
  CHECK(summary.at("max_joint_gain").get<double>() > 0.0);
}

TEST_CASE("cli: simulate rho suite confirms affine utility curves", "[cli]") {
  CliFixture fx;
  const auto config = fx.write("config.json", base_config(12.0, 0.5, 2.0));
  const auto sim = fx.run("simulate --config " + config.string() +
                          " --suite rho --seed 3 --out " + fx.path("rho.json").string() +
                          " --audit-log " + fx.path("audit.jsonl").string());
  REQUIRE(sim.exit_code == 0);
  const json summary = json::parse(slurp(fx.path("rho.json")));
  CHECK(summary.at("max_affine_deviation").get<double>() <= 1e-9);
}

TEST_CASE("cli: unknown suite is a usage error", "[cli]") {
  CliFixture fx;
  const auto config = fx.write("config.json", base_config(6.0, 1.0, 0.0));
  const auto sim = fx.run("simulate --config " + config.string() + " --suite banana --out " +
                          fx.path("x.json").string());
  CHECK(sim.exit_code != 0);
}

TEST_CASE("cli: audit-verify detects a flipped byte with its sequence number", "[cli]") {
  CliFixture fx;
  const auto audit = fx.path("audit.jsonl");
  {
    datamech::AuditLog log(audit.string());
    for (int i = 0; i < 5; ++i) log.append("simulation", json{{"i", i}});
  }
  REQUIRE(fx.run("audit-verify " + audit.string()).exit_code == 0);

  std::string contents = slurp(audit);
  const auto pos = contents.find("\"payload_digest\":\"", contents.find('\n') + 1);
  REQUIRE(pos != std::string::npos);
  contents[pos + 18] = contents[pos + 18] == 'a' ? 'b' : 'a';
  fx.write("audit.jsonl", contents);

  const auto broken = fx.run("audit-verify " + audit.string());
  CHECK(broken.exit_code == 1);
  CHECK(broken.stdout_text.find("sequence 1") != std::string::npos);
}
