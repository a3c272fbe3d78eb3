#include <catch2/catch_amalgamated.hpp>

#include "datamech/valuation.hpp"
#include "support/oracles.hpp"

using namespace datamech;
using testsupport::AdditiveValue;
using testsupport::RidgeValue;
using testsupport::ThresholdClassifierValue;

namespace {

LabeledSet points(std::initializer_list<std::pair<double, double>> xy) {
  LabeledSet s;
  s.features.resize(static_cast<long>(xy.size()), 1);
  s.labels.resize(static_cast<long>(xy.size()));
  long i = 0;
  for (const auto& [x, y] : xy) {
    s.features(i, 0) = x;
    s.labels(i) = y;
    ++i;
  }
  return s;
}

}  // namespace

TEST_CASE("leave-one-out: removing two points flips one of five holdout predictions",
          "[valuation]") {
  // Threshold classifier: full pool learns t = 2.5, dropping agent A moves
  // it to 4.5, flipping exactly the x = 3 holdout point. Frozen expectation
  // 0.2 comes from retraining by hand on this instance.
  const std::vector<AgentData> agents = {
      {"A", points({{4, 1}, {5, 1}})},
      {"B", points({{0, 0}, {1, 0}})},
      {"C", points({{8, 1}, {9, 1}})},
  };
  const LabeledSet holdout = points({{3, 1}, {6, 1}, {1, 0}, {2, 0}, {7, 1}});
  const ThresholdClassifierValue v;

  const auto gains = marginal_gain_loo(agents, v, holdout);
  CHECK(gains.at("A") == Catch::Approx(0.2).margin(1e-12));
}

TEST_CASE("leave-one-out: redundant copies contribute nothing", "[valuation]") {
  const std::vector<AgentData> agents = {
      {"A", points({{0, 0}, {1, 0}})},
      {"B", points({{0, 0}, {1, 0}})},  // exact copy of A
      {"C", points({{4, 1}, {5, 1}})},
  };
  const LabeledSet holdout = points({{0, 0}, {1, 0}, {4, 1}, {5, 1}, {3, 1}});
  const ThresholdClassifierValue v;
  const auto gains = marginal_gain_loo(agents, v, holdout);
  CHECK(gains.at("A") == 0.0);
  CHECK(gains.at("B") == 0.0);
}

TEST_CASE("leave-one-out: identical agents have identical gains", "[valuation]") {
  const LabeledSet shared = points({{0, 0}, {5, 1}});
  const std::vector<AgentData> agents = {{"A", shared}, {"B", shared}, {"C", shared}};
  const LabeledSet holdout = points({{1, 0}, {4, 1}});
  const ThresholdClassifierValue v;
  const auto gains = marginal_gain_loo(agents, v, holdout);
  CHECK(gains.at("A") == gains.at("B"));
  CHECK(gains.at("B") == gains.at("C"));
}

TEST_CASE("leave-one-out preconditions", "[valuation]") {
  const std::vector<AgentData> one = {{"A", points({{0, 0}})}};
  const ThresholdClassifierValue v;
  CHECK_THROWS_AS(marginal_gain_loo(one, v, points({{1, 1}})), ConfigError);
}

TEST_CASE("sampled marginal is exact for additive values at any sample count",
          "[valuation][property]") {
  const std::vector<AgentData> agents = {
      {"A", points({{0.7, 0}})},
      {"B", points({{-0.3, 0}})},
      {"C", points({{2.5, 0}})},
      {"D", points({{0.0, 0}})},
  };
  const LabeledSet holdout = points({{0, 0}});
  const AdditiveValue v;
  for (int samples : {1, 3, 17}) {
    for (std::uint64_t seed : {1ull, 42ull, 9001ull}) {
      const auto result = sampled_marginal(agents, v, holdout, samples, seed);
      // Machine precision: averaging k identical doubles costs a few ulps.
      CHECK(result.raw.at("A") == Catch::Approx(0.7).margin(1e-15));
      CHECK(result.raw.at("B") == Catch::Approx(-0.3).margin(1e-15));
      CHECK(result.raw.at("C") == Catch::Approx(2.5).margin(1e-15));
      CHECK(result.raw.at("D") == Catch::Approx(0.0).margin(1e-15));
    }
  }
}

TEST_CASE("sampled marginal converges to the exhaustive subset expectation", "[valuation]") {
  const std::vector<AgentData> agents = {
      {"A", points({{4, 1}, {5, 1}})},
      {"B", points({{0, 0}, {1, 0}})},
      {"C", points({{8, 1}, {9, 1}})},
  };
  const LabeledSet holdout = points({{3, 1}, {6, 1}, {1, 0}, {2, 0}, {7, 1}});
  const ThresholdClassifierValue v;

  for (std::size_t i = 0; i < agents.size(); ++i) {
    const double oracle = testsupport::subset_expectation_oracle(agents, i, v, holdout);
    const auto result = sampled_marginal(agents, v, holdout, 4000, 7);
    CHECK(result.raw.at(agents[i].agent_id) == Catch::Approx(oracle).margin(0.05));
  }
}

TEST_CASE("sampled marginal is deterministic per seed and audits its samples", "[valuation]") {
  const std::vector<AgentData> agents = {
      {"A", points({{4, 1}, {5, 1}})},
      {"B", points({{0, 0}, {1, 0}})},
      {"C", points({{8, 1}})},
  };
  const LabeledSet holdout = points({{3, 1}, {1, 0}});
  const ThresholdClassifierValue v;
  const auto r1 = sampled_marginal(agents, v, holdout, 20, 5);
  const auto r2 = sampled_marginal(agents, v, holdout, 20, 5);
  CHECK(r1.raw == r2.raw);
  CHECK(r1.audit.at("sample_digest") == r2.audit.at("sample_digest"));
  CHECK(r1.audit.at("seed").get<std::uint64_t>() == 5);

  const auto r3 = sampled_marginal(agents, v, holdout, 20, 6);
  CHECK(r3.audit.at("sample_digest") != r1.audit.at("sample_digest"));

  CHECK_THROWS_AS(sampled_marginal(agents, v, holdout, 0, 5), ConfigError);
}

namespace {

// A small ridge-regression pool: agents with clean points from the true
// line and one agent with corrupted labels.
struct RidgeInstance {
  std::vector<AgentData> agents;
  LabeledSet holdout;
};

RidgeInstance make_ridge_instance(std::uint64_t seed, int n_agents, int points_per_agent) {
  Rng rng(seed);
  const double w0 = 1.5, w1 = -0.8, bias = 0.3;
  auto sample_set = [&](int count, double noise) {
    LabeledSet s;
    s.features.resize(count, 2);
    s.labels.resize(count);
    for (int i = 0; i < count; ++i) {
      const double x0 = rng.uniform(-2.0, 2.0);
      const double x1 = rng.uniform(-2.0, 2.0);
      s.features(i, 0) = x0;
      s.features(i, 1) = x1;
      s.labels(i) = w0 * x0 + w1 * x1 + bias + rng.uniform(-noise, noise);
    }
    return s;
  };

  RidgeInstance inst;
  for (int a = 0; a < n_agents; ++a) {
    // Later agents are progressively noisier; the last is badly corrupted.
    const double noise = a + 1 == n_agents ? 4.0 : 0.05 * (a + 1);
    inst.agents.push_back({"agent" + std::to_string(a), sample_set(points_per_agent, noise)});
  }
  inst.holdout = sample_set(40, 0.01);
  return inst;
}

}  // namespace

TEST_CASE("influence: zero-gradient agent estimates zero", "[valuation]") {
  RidgeInstance inst = make_ridge_instance(11, 4, 5);
  inst.agents.push_back({"empty", LabeledSet{}});
  const RidgeValue v;
  InfluenceOptions opts;
  opts.exact_solve = true;
  const auto result = influence_marginal(inst.agents, v, inst.holdout, opts);
  CHECK(result.raw.at("empty") == 0.0);
}

TEST_CASE("influence: iterative and exact solves agree within 10x tolerance", "[valuation]") {
  const RidgeInstance inst = make_ridge_instance(17, 5, 4);
  const RidgeValue v;
  InfluenceOptions exact;
  exact.exact_solve = true;
  InfluenceOptions iterative;
  iterative.solver_tol = 1e-10;
  const auto a = influence_marginal(inst.agents, v, inst.holdout, exact);
  const auto b = influence_marginal(inst.agents, v, inst.holdout, iterative);
  for (const auto& [id, value] : a.raw) {
    CHECK(std::abs(value - b.raw.at(id)) <= 10.0 * iterative.solver_tol);
  }
  CHECK(b.iterations > 0);
  CHECK(b.residual_norm <= 1e-10 * 10);
}

TEST_CASE("influence ranks agents like exact leave-one-out on quadratic instances",
          "[valuation][property]") {
  const RidgeValue v;
  for (std::uint64_t seed : {21ull, 22ull, 23ull, 24ull, 25ull}) {
    const RidgeInstance inst = make_ridge_instance(seed, 5, 4);  // 20 points
    const auto loo = marginal_gain_loo(inst.agents, v, inst.holdout);
    InfluenceOptions opts;
    opts.exact_solve = true;
    const auto infl = influence_marginal(inst.agents, v, inst.holdout, opts);
    std::vector<double> a, b;
    for (const auto& [id, gain] : loo) {
      a.push_back(gain);
      b.push_back(infl.raw.at(id));
    }
    CHECK(testsupport::spearman(a, b) >= 0.9);
  }
}

TEST_CASE("influence solver validates its options", "[valuation]") {
  const RidgeInstance inst = make_ridge_instance(3, 3, 3);
  const RidgeValue v;
  InfluenceOptions bad;
  bad.damping = 0.0;
  CHECK_THROWS_AS(influence_marginal(inst.agents, v, inst.holdout, bad), ConfigError);
}

TEST_CASE("rescale fixtures", "[valuation]") {
  const auto a = rescale_population({{"x", 2.0}, {"y", 4.0}, {"z", 6.0}});
  CHECK(a.at("x") == Catch::Approx(0.001));
  CHECK(a.at("y") == Catch::Approx(0.5));
  CHECK(a.at("z") == Catch::Approx(1.0));

  const auto flat = rescale_population({{"x", 3.0}, {"y", 3.0}});
  CHECK(flat.at("x") == 1.0);
  CHECK(flat.at("y") == 1.0);

  const auto negatives = rescale_population({{"x", -1.0}, {"y", 0.0}, {"z", 1.0}});
  CHECK(negatives.at("x") == Catch::Approx(0.001));
  CHECK(negatives.at("y") == Catch::Approx(0.5));
  CHECK(negatives.at("z") == Catch::Approx(1.0));

  CHECK_THROWS_AS(rescale_population({}), DataError);
}

TEST_CASE("rescale stays in [1e-3, 1] and preserves the argmax", "[valuation][property]") {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, double> raw;
    const int n = 1 + static_cast<int>(rng.below(9));
    for (int i = 0; i < n; ++i) {
      raw["agent" + std::to_string(i)] = rng.uniform(-50.0, 50.0);
    }
    const auto scaled = rescale_population(raw);
    std::string argmax_raw, argmax_scaled;
    double best_raw = -1e300, best_scaled = -1e300;
    for (const auto& [id, value] : raw) {
      REQUIRE(scaled.at(id) >= 1e-3);
      REQUIRE(scaled.at(id) <= 1.0);
      if (value > best_raw) {
        best_raw = value;
        argmax_raw = id;
      }
      if (scaled.at(id) > best_scaled) {
        best_scaled = scaled.at(id);
        argmax_scaled = id;
      }
    }
    REQUIRE(scaled.at(argmax_raw) == best_scaled);
  }
}

TEST_CASE("estimate bundles carry estimator metadata and the rescale floor", "[valuation]") {
  const auto estimates = build_estimates({{"a", -2.0}, {"b", 1.0}, {"c", 4.0}}, "sampled", 16, 99);
  REQUIRE(estimates.size() == 3);
  for (const auto& e : estimates) {
    CHECK(e.estimator == "sampled");
    CHECK(e.samples_used == 16);
    CHECK(e.seed == 99);
    CHECK(e.rescaled >= 1e-3);
    CHECK(e.rescaled <= 1.0);
  }
}

TEST_CASE("logistic surrogate trains deterministically and scores in [0,1]", "[valuation]") {
  Rng rng(7);
  LabeledSet train;
  train.features.resize(20, 2);
  train.labels.resize(20);
  for (int i = 0; i < 20; ++i) {
    const double x0 = rng.uniform(-2, 2), x1 = rng.uniform(-2, 2);
    train.features(i, 0) = x0;
    train.features(i, 1) = x1;
    train.labels(i) = x0 - x1 > 0 ? 1.0 : 0.0;
  }
  const LogisticValue v;
  const Eigen::VectorXd t1 = v.train(train);
  const Eigen::VectorXd t2 = v.train(train);
  CHECK(t1 == t2);
  const double score = v.evaluate(t1, train);
  CHECK(score >= 0.0);
  CHECK(score <= 1.0);
  CHECK(score > 0.6);  // separable data must be learnable
}
