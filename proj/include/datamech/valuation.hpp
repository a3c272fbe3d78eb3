#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "datamech/canonical.hpp"
#include "datamech/errors.hpp"
#include "datamech/rng.hpp"

namespace datamech {

// A numeric labeled dataset for the desk-scale surrogate task.
struct LabeledSet {
  Eigen::MatrixXd features;  // one row per point
  Eigen::VectorXd labels;    // binary {0, 1} for classification surrogates

  long size() const { return features.rows(); }
  bool empty() const { return features.rows() == 0; }
};

inline LabeledSet concat(const std::vector<const LabeledSet*>& parts) {
  long rows = 0;
  long cols = 0;
  for (const auto* p : parts) {
    rows += p->size();
    if (p->size() > 0) cols = p->features.cols();
  }
  LabeledSet out;
  out.features.resize(rows, cols);
  out.labels.resize(rows);
  long at = 0;
  for (const auto* p : parts) {
    if (p->size() == 0) continue;
    out.features.middleRows(at, p->size()) = p->features;
    out.labels.segment(at, p->size()) = p->labels;
    at += p->size();
  }
  return out;
}

// One agent's contribution to the surrogate training pool.
struct AgentData {
  std::string agent_id;
  LabeledSet data;
};

// V: train a model on a labeled set, score it on a holdout in [0, 1].
class ValueFunction {
 public:
  virtual ~ValueFunction() = default;
  virtual Eigen::VectorXd train(const LabeledSet& data) const = 0;
  virtual double evaluate(const Eigen::VectorXd& params, const LabeledSet& holdout) const = 0;
};

// Adds the gradient and Hessian access the influence estimator needs.
class DifferentiableValueFunction : public ValueFunction {
 public:
  // Sum over the group's points of per-point training-loss gradients.
  virtual Eigen::VectorXd loss_gradient_sum(const Eigen::VectorXd& params,
                                            const LabeledSet& points) const = 0;
  // Gradient of the holdout value (the quantity evaluate() returns).
  virtual Eigen::VectorXd value_gradient(const Eigen::VectorXd& params,
                                         const LabeledSet& holdout) const = 0;
  // Hessian of the full training objective applied to v.
  virtual Eigen::VectorXd hessian_vector(const Eigen::VectorXd& params, const LabeledSet& training,
                                         const Eigen::VectorXd& v) const = 0;
  virtual Eigen::MatrixXd hessian(const Eigen::VectorXd& params, const LabeledSet& training) const = 0;
};

// L2-regularized logistic regression, trained by full-batch gradient descent
// with a fixed step count. The holdout value is the mean probability mass
// assigned to the correct label, so it is smooth and lies in [0, 1].
class LogisticValue : public DifferentiableValueFunction {
 public:
  explicit LogisticValue(double l2 = 0.1, int steps = 2000) : l2_(l2), steps_(steps) {}

  Eigen::VectorXd train(const LabeledSet& data) const override {
    if (data.empty()) return Eigen::VectorXd();  // regularizer-only minimum
    const long d = data.features.cols() + 1;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
    const double n = static_cast<double>(data.size());
    // Step size from the curvature bound of the mean logistic loss.
    const double lipschitz =
        l2_ + (data.features.squaredNorm() + n) / (4.0 * n);
    const double step = 1.0 / lipschitz;
    for (int it = 0; it < steps_; ++it) {
      theta -= step * (loss_gradient_sum(theta, data) / n + l2_ * theta);
    }
    if (!theta.allFinite()) throw NumericError("logistic training diverged");
    return theta;
  }

  double evaluate(const Eigen::VectorXd& params, const LabeledSet& holdout) const override {
    if (holdout.empty()) throw DataError("evaluate: empty holdout");
    double total = 0.0;
    for (long i = 0; i < holdout.size(); ++i) {
      const double p = predict(params, holdout.features.row(i));
      total += holdout.labels(i) > 0.5 ? p : 1.0 - p;
    }
    return total / static_cast<double>(holdout.size());
  }

  Eigen::VectorXd loss_gradient_sum(const Eigen::VectorXd& params,
                                    const LabeledSet& points) const override {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(points.features.cols() + 1);
    for (long i = 0; i < points.size(); ++i) {
      const double p = predict(params, points.features.row(i));
      accumulate(g, points.features.row(i), p - points.labels(i));
    }
    return g;
  }

  Eigen::VectorXd value_gradient(const Eigen::VectorXd& params,
                                 const LabeledSet& holdout) const override {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(params.size());
    for (long i = 0; i < holdout.size(); ++i) {
      const double p = predict(params, holdout.features.row(i));
      const double sign = holdout.labels(i) > 0.5 ? 1.0 : -1.0;
      accumulate(g, holdout.features.row(i), sign * p * (1.0 - p));
    }
    return g / static_cast<double>(holdout.size());
  }

  Eigen::VectorXd hessian_vector(const Eigen::VectorXd& params, const LabeledSet& training,
                                 const Eigen::VectorXd& v) const override {
    Eigen::VectorXd out = l2_ * v;
    const double n = static_cast<double>(training.size());
    for (long i = 0; i < training.size(); ++i) {
      const double p = predict(params, training.features.row(i));
      const double s = p * (1.0 - p);
      const double xv = dot(training.features.row(i), v);
      accumulate(out, training.features.row(i), s * xv / n);
    }
    return out;
  }

  Eigen::MatrixXd hessian(const Eigen::VectorXd& params, const LabeledSet& training) const override {
    const long d = params.size();
    Eigen::MatrixXd h = l2_ * Eigen::MatrixXd::Identity(d, d);
    const double n = static_cast<double>(training.size());
    for (long i = 0; i < training.size(); ++i) {
      const double p = predict(params, training.features.row(i));
      const double s = p * (1.0 - p);
      Eigen::VectorXd x(d);
      x.head(d - 1) = training.features.row(i).transpose();
      x(d - 1) = 1.0;
      h += (s / n) * x * x.transpose();
    }
    return h;
  }

 private:
  static double predict(const Eigen::VectorXd& params, const Eigen::RowVectorXd& x) {
    if (params.size() == 0) return 0.5;  // untrained model
    const double z = params.head(params.size() - 1).dot(x.transpose()) + params(params.size() - 1);
    return 1.0 / (1.0 + std::exp(-z));
  }

  // g += scale * [x; 1]
  static void accumulate(Eigen::VectorXd& g, const Eigen::RowVectorXd& x, double scale) {
    g.head(g.size() - 1) += scale * x.transpose();
    g(g.size() - 1) += scale;
  }

  static double dot(const Eigen::RowVectorXd& x, const Eigen::VectorXd& v) {
    return v.head(v.size() - 1).dot(x.transpose()) + v(v.size() - 1);
  }

  double l2_;
  int steps_;
};

inline LabeledSet pool_except(const std::vector<AgentData>& agents, long skip_index) {
  std::vector<const LabeledSet*> parts;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (static_cast<long>(i) != skip_index) parts.push_back(&agents[i].data);
  }
  return concat(parts);
}

// Exact leave-one-out marginal gain: V(D) - V(D \ D_i). This is the oracle
// the cheaper estimators are checked against.
inline std::map<std::string, double> marginal_gain_loo(const std::vector<AgentData>& agents,
                                                       const ValueFunction& v,
                                                       const LabeledSet& holdout) {
  if (agents.size() < 2) throw ConfigError("marginal_gain_loo: need at least 2 agents");
  if (holdout.empty()) throw ConfigError("marginal_gain_loo: empty holdout");
  const LabeledSet full = pool_except(agents, -1);
  double full_value = 0.0;
  try {
    full_value = v.evaluate(v.train(full), holdout);
  } catch (const NumericError& e) {
    throw NumericError(std::string("marginal_gain_loo: full pool: ") + e.what());
  }
  std::map<std::string, double> gains;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    try {
      const LabeledSet rest = pool_except(agents, static_cast<long>(i));
      gains[agents[i].agent_id] = full_value - v.evaluate(v.train(rest), holdout);
    } catch (const NumericError& e) {
      throw NumericError("marginal_gain_loo: agent '" + agents[i].agent_id + "': " + e.what());
    }
  }
  return gains;
}

struct SampledResult {
  std::map<std::string, double> raw;
  json audit;  // seed, sample digest; for the audit log
};

// Sampled marginal contribution: average of V(T u {i}) - V(T) over subsets
// T of the other agents. Subset size is uniform on {0..n-1}, then members
// are drawn uniformly without replacement.
inline SampledResult sampled_marginal(const std::vector<AgentData>& agents, const ValueFunction& v,
                                      const LabeledSet& holdout, int num_samples,
                                      std::uint64_t seed) {
  if (num_samples < 1) throw ConfigError("sampled_marginal: num_samples must be >= 1");
  if (agents.empty()) throw ConfigError("sampled_marginal: no agents");
  if (holdout.empty()) throw ConfigError("sampled_marginal: empty holdout");

  Rng rng(seed);
  const std::size_t n = agents.size();
  SampledResult result;
  json sample_log = json::array();

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    double total = 0.0;
    json agent_samples = json::array();
    for (int s = 0; s < num_samples; ++s) {
      const std::size_t size = static_cast<std::size_t>(rng.below(n));  // 0..n-1
      // Partial Fisher-Yates for a uniform size-subset of the others.
      std::vector<std::size_t> pool = others;
      std::vector<std::size_t> subset;
      for (std::size_t t = 0; t < size; ++t) {
        const std::size_t pick = t + static_cast<std::size_t>(rng.below(pool.size() - t));
        std::swap(pool[t], pool[pick]);
        subset.push_back(pool[t]);
      }
      std::sort(subset.begin(), subset.end());

      std::vector<const LabeledSet*> parts;
      for (std::size_t idx : subset) parts.push_back(&agents[idx].data);
      const LabeledSet without = concat(parts);
      parts.push_back(&agents[i].data);
      const LabeledSet with = concat(parts);

      const double v_without = without.empty() ? v.evaluate(v.train(LabeledSet{}), holdout)
                                               : v.evaluate(v.train(without), holdout);
      const double v_with = v.evaluate(v.train(with), holdout);
      total += v_with - v_without;
      agent_samples.push_back(subset);
    }
    result.raw[agents[i].agent_id] = total / static_cast<double>(num_samples);
    sample_log.push_back({{"agent_id", agents[i].agent_id}, {"subsets", agent_samples}});
  }
  result.audit = json{{"estimator", "sampled"},
                      {"seed", seed},
                      {"num_samples", num_samples},
                      {"sample_digest", canonical_digest(sample_log)}};
  return result;
}

struct InfluenceOptions {
  double damping = 0.01;
  double solver_tol = 1e-8;
  bool exact_solve = false;  // form H and solve directly; for cross-checks
};

struct InfluenceResult {
  std::map<std::string, double> raw;
  double residual_norm = 0.0;
  int iterations = 0;
  bool exact_solve = false;
  json audit;
};

// Influence-function estimate: phi_i ~ -g_i^T H^{-1} g_bar, with the solve
// damped and run by conjugate gradients (or a dense solve in exact mode).
inline InfluenceResult influence_marginal(const std::vector<AgentData>& agents,
                                          const DifferentiableValueFunction& v,
                                          const LabeledSet& holdout,
                                          const InfluenceOptions& opts = {}) {
  if (agents.empty()) throw ConfigError("influence_marginal: no agents");
  if (holdout.empty()) throw ConfigError("influence_marginal: empty holdout");
  if (opts.damping <= 0.0) throw ConfigError("influence_marginal: damping must be > 0");
  if (opts.solver_tol <= 0.0) throw ConfigError("influence_marginal: solver_tol must be > 0");

  const LabeledSet full = pool_except(agents, -1);
  if (full.empty()) throw DataError("influence_marginal: no training points");
  const Eigen::VectorXd theta = v.train(full);
  const Eigen::VectorXd g_bar = v.value_gradient(theta, holdout);
  const double n_total = static_cast<double>(full.size());

  InfluenceResult result;
  result.exact_solve = opts.exact_solve;
  Eigen::VectorXd x;

  if (opts.exact_solve) {
    Eigen::MatrixXd h = v.hessian(theta, full);
    h.diagonal().array() += opts.damping;
    x = h.ldlt().solve(g_bar);
    result.residual_norm = (h * x - g_bar).norm();
  } else {
    // Conjugate gradients on (H + damping I) x = g_bar, matrix-free.
    const long d = theta.size();
    x = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd r = g_bar;
    Eigen::VectorXd p = r;
    double rs = r.squaredNorm();
    const double target = opts.solver_tol * std::max(1.0, g_bar.norm());
    const int max_iters = std::max<long>(50, 20 * d);
    int it = 0;
    while (std::sqrt(rs) > target && it < max_iters) {
      const Eigen::VectorXd hp = v.hessian_vector(theta, full, p) + opts.damping * p;
      const double alpha = rs / p.dot(hp);
      x += alpha * p;
      r -= alpha * hp;
      const double rs_next = r.squaredNorm();
      p = r + (rs_next / rs) * p;
      rs = rs_next;
      ++it;
    }
    result.iterations = it;
    result.residual_norm = std::sqrt(rs);
    if (result.residual_norm > target) {
      throw NumericError("influence_marginal: cg did not converge, residual " +
                         std::to_string(result.residual_norm));
    }
  }

  for (std::size_t i = 0; i < agents.size(); ++i) {
    const Eigen::VectorXd g_i = v.loss_gradient_sum(theta, agents[i].data) / n_total;
    result.raw[agents[i].agent_id] = -g_i.dot(x);
  }
  result.audit = json{{"estimator", "influence"},
                      {"damping", opts.damping},
                      {"solver_tol", opts.solver_tol},
                      {"exact_solve", opts.exact_solve},
                      {"residual_norm", result.residual_norm},
                      {"iterations", result.iterations}};
  return result;
}

// Linear rescale of the population to [0, 1] with the 1e-3 floor. A flat
// population rescales to all ones.
inline std::map<std::string, double> rescale_population(const std::map<std::string, double>& raw) {
  if (raw.empty()) throw DataError("rescale_population: empty input");
  double lo = raw.begin()->second;
  double hi = lo;
  for (const auto& [id, value] : raw) {
    lo = std::min(lo, value);
    hi = std::max(hi, value);
  }
  std::map<std::string, double> out;
  for (const auto& [id, value] : raw) {
    const double scaled = hi > lo ? (value - lo) / (hi - lo) : 1.0;
    out[id] = std::max(1e-3, scaled);
  }
  return out;
}

// One agent's marginal-utility estimate, raw and population-rescaled.
struct MarginalEstimate {
  std::string agent_id;
  double raw = 0.0;
  double rescaled = 0.0;  // in [1e-3, 1]
  std::string estimator;  // loo | sampled | influence
  long samples_used = 0;
  std::int64_t seed = 0;
};

inline std::vector<MarginalEstimate> build_estimates(const std::map<std::string, double>& raw,
                                                     const std::string& estimator,
                                                     long samples_used, std::int64_t seed) {
  const auto rescaled = rescale_population(raw);
  std::vector<MarginalEstimate> out;
  for (const auto& [id, value] : raw) {
    MarginalEstimate e;
    e.agent_id = id;
    e.raw = value;
    e.rescaled = rescaled.at(id);
    e.estimator = estimator;
    e.samples_used = samples_used;
    e.seed = seed;
    out.push_back(std::move(e));
  }
  return out;
}

inline void to_json(json& j, const MarginalEstimate& e) {
  j = json{{"agent_id", e.agent_id}, {"raw", e.raw},
           {"rescaled", e.rescaled}, {"estimator", e.estimator},
           {"samples_used", e.samples_used}, {"seed", e.seed}};
}

inline void from_json(const json& j, MarginalEstimate& e) {
  j.at("agent_id").get_to(e.agent_id);
  j.at("raw").get_to(e.raw);
  j.at("rescaled").get_to(e.rescaled);
  j.at("estimator").get_to(e.estimator);
  j.at("samples_used").get_to(e.samples_used);
  j.at("seed").get_to(e.seed);
}

}  // namespace datamech
