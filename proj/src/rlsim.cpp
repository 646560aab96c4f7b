#include "prefcal/rlsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prefcal/metrics.hpp"
#include "prefcal/rng.hpp"

namespace prefcal {

namespace {

constexpr double kStdFloor = 1e-8;

std::vector<double> softmax(std::span<const double> logits) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double z : logits) max_logit = std::max(max_logit, z);
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

double score_action(const ParsedReport& report, int label, double target,
                    const GrpoConfig& config) {
  if (config.label_mode == LabelMode::Binary) {
    return reward(report, label, config.reward);
  }
  // Probabilistic targets: squared-error reward for Brier; for Log the
  // label expectation is taken in closed form, the dense counterpart of the
  // binary scoring.
  if (config.reward.kind == RewardKind::Brier) {
    return brier_reward_prob_target(report, target);
  }
  return expected_reward_at(report, target, config.reward);
}

}  // namespace

ReportGrid ReportGrid::regular(double step) {
  if (!(step > 0.0 && step <= 0.5)) {
    throw std::invalid_argument("grid step must lie in (0, 0.5]");
  }
  ReportGrid grid;
  int n = static_cast<int>(std::round(1.0 / step));
  grid.points.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    grid.points.push_back(static_cast<double>(i) / static_cast<double>(n));
  }
  return grid;
}

ParsedReport ReportGrid::report_for(std::size_t action) const {
  if (action < points.size()) return ParsedReport::of(points[action]);
  if (action == points.size()) return ParsedReport::unparsable();
  throw std::out_of_range("grid action index out of range");
}

void ReportGrid::validate() const {
  if (points.empty()) throw std::invalid_argument("grid has no points");
  double prev = -1.0;
  for (double p : points) {
    if (!(p >= 0.0 && p <= 1.0) || p <= prev) {
      throw std::invalid_argument(
          "grid points must be strictly increasing within [0, 1]");
    }
    prev = p;
  }
}

std::span<const double> PolicyTable::row(std::size_t context) const {
  return std::span<const double>(logits).subspan(context * n_actions, n_actions);
}

std::span<double> PolicyTable::row(std::size_t context) {
  return std::span<double>(logits).subspan(context * n_actions, n_actions);
}

std::vector<double> PolicyTable::probabilities(std::size_t context) const {
  return softmax(row(context));
}

double PolicyTable::entropy(std::size_t context) const {
  std::vector<double> probs = probabilities(context);
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

void GrpoConfig::validate() const {
  if (group_size < 2) {
    throw std::invalid_argument("group_size must be >= 2");
  }
  if (groups_per_step < 1) {
    throw std::invalid_argument("groups_per_step must be >= 1");
  }
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) {
    throw std::invalid_argument("clip_eps must lie in (0, 1)");
  }
  if (kl_beta < 0.0) throw std::invalid_argument("kl_beta must be >= 0");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be > 0");
  }
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  reward.validate();
}

PolicyTable init_policy(std::span<const AnnotatorPopulation::Context> contexts,
                        const ReportGrid& grid, const PolicyInit& init) {
  if (contexts.empty()) throw std::invalid_argument("no contexts");
  grid.validate();
  PolicyTable table;
  table.n_actions = grid.action_count();
  table.context_ids.reserve(contexts.size());
  for (const AnnotatorPopulation::Context& c : contexts) {
    table.context_ids.push_back(c.id);
  }
  table.logits.assign(contexts.size() * table.n_actions, 0.0);
  if (init.kind == PolicyInit::Kind::Peaked) {
    std::size_t favored = grid.unparsable_index();
    if (init.point) {
      auto it = std::min_element(
          grid.points.begin(), grid.points.end(),
          [&](double a, double b) {
            return std::fabs(a - *init.point) < std::fabs(b - *init.point);
          });
      favored = static_cast<std::size_t>(it - grid.points.begin());
    }
    for (std::size_t c = 0; c < contexts.size(); ++c) {
      table.row(c)[favored] = init.logit_offset;
    }
  }
  return table;
}

std::vector<RolloutSample> rollout(const PolicyTable& policy,
                                   std::size_t context, double target,
                                   const ReportGrid& grid,
                                   const GrpoConfig& config,
                                   std::uint64_t seed) {
  config.validate();
  if (!(target >= 0.0 && target <= 1.0)) {
    throw std::invalid_argument("rollout: target must lie in [0, 1]");
  }
  std::vector<double> probs = policy.probabilities(context);
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    cdf[i] = acc;
  }

  Rng rng(seed);
  const bool binary = config.label_mode == LabelMode::Binary;
  int group_label = -1;
  if (binary && config.label_draw == LabelDraw::PerGroup) {
    group_label = rng.bernoulli(target);
  }
  const double g_count = static_cast<double>(config.group_size);
  const double systematic_offset =
      config.sampler == GroupSampler::Systematic ? rng.uniform01() : 0.0;
  auto cdf_lookup = [&cdf](double u) {
    std::size_t lo = 0, hi = cdf.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (u < cdf[mid]) hi = mid; else lo = mid + 1;
    }
    return lo;
  };
  std::vector<RolloutSample> samples;
  samples.reserve(static_cast<std::size_t>(config.group_size));
  for (int g = 0; g < config.group_size; ++g) {
    RolloutSample s;
    switch (config.sampler) {
      case GroupSampler::Stratified:
        // One draw per 1/G slice of the CDF; marginally still the policy.
        s.action = cdf_lookup((static_cast<double>(g) + rng.uniform01()) / g_count);
        break;
      case GroupSampler::Systematic:
        // G evenly spaced probes with one shared random offset.
        s.action = cdf_lookup((static_cast<double>(g) + systematic_offset) / g_count);
        break;
      case GroupSampler::Iid:
        s.action = rng.categorical_from_cdf(cdf);
        break;
    }
    if (binary) {
      s.label = config.label_draw == LabelDraw::PerGroup ? group_label
                                                         : rng.bernoulli(target);
    }
    s.reward = score_action(grid.report_for(s.action), s.label, target, config);
    samples.push_back(s);
  }
  return samples;
}

std::vector<double> grpo_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw std::invalid_argument("grpo_advantages: group size must be >= 2");
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) {
    double d = r - mean;
    var += d * d;
  }
  var /= static_cast<double>(rewards.size());
  double stddev = std::sqrt(var);
  std::vector<double> advantages(rewards.size());
  if (stddev < kStdFloor) {
    // Zero-variance groups carry no learning signal.
    return advantages;
  }
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    advantages[i] = (rewards[i] - mean) / stddev;
  }
  return advantages;
}

double kl_estimate(double pi_theta_prob, double pi_ref_prob) {
  if (!(pi_theta_prob > 0.0) || !(pi_ref_prob > 0.0)) {
    throw std::domain_error("kl_estimate: probabilities must be > 0");
  }
  double r = pi_ref_prob / pi_theta_prob;
  return r - std::log(r) - 1.0;
}

PolicyTable grpo_step(const PolicyTable& policy, const PolicyTable& old_policy,
                      const PolicyTable& ref_policy, const RolloutBatch& batch,
                      const ReportGrid& grid, const GrpoConfig& config) {
  config.validate();
  if (policy.n_actions != grid.action_count() ||
      old_policy.n_actions != policy.n_actions ||
      ref_policy.n_actions != policy.n_actions) {
    throw std::invalid_argument("grpo_step: policies must share the grid");
  }
  const std::size_t n_contexts = policy.context_ids.size();
  std::vector<std::size_t> groups_per_context(n_contexts, 0);
  for (const RolloutGroup& group : batch.groups) {
    if (group.context >= n_contexts) {
      throw std::invalid_argument("grpo_step: group context out of range");
    }
    if (!group.samples.empty()) ++groups_per_context[group.context];
  }

  PolicyTable next = policy;
  const double lo = 1.0 - config.clip_eps;
  const double hi = 1.0 + config.clip_eps;

  // Cache per-context probabilities; rows repeat when a context contributes
  // several groups.
  std::vector<std::vector<double>> probs_cache(n_contexts);
  std::vector<std::vector<double>> old_cache(n_contexts);
  std::vector<std::vector<double>> ref_cache(n_contexts);
  auto probs_for = [&](std::size_t c) -> const std::vector<double>& {
    if (probs_cache[c].empty()) probs_cache[c] = policy.probabilities(c);
    return probs_cache[c];
  };

  for (const RolloutGroup& group : batch.groups) {
    if (group.samples.empty()) continue;
    const std::size_t c = group.context;
    std::vector<double> rewards(group.samples.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      rewards[i] = group.samples[i].reward;
    }
    std::vector<double> advantages = grpo_advantages(rewards);

    const std::vector<double>& probs = probs_for(c);
    if (old_cache[c].empty()) old_cache[c] = old_policy.probabilities(c);
    const std::vector<double>& old_probs = old_cache[c];
    if (config.kl_beta > 0.0 && ref_cache[c].empty()) {
      ref_cache[c] = ref_policy.probabilities(c);
    }

    // d/dz_k of pi(a) is pi(a) (1{k=a} - pi_k), so each sample contributes
    // coeff_i * (1{k=a_i} - pi_k). Accumulated as per-action deltas plus one
    // shared term.
    std::vector<double> grad(policy.n_actions, 0.0);
    double coeff_total = 0.0;
    const double scale = 1.0 / (static_cast<double>(group.samples.size()) *
                                static_cast<double>(groups_per_context[c]));
    for (std::size_t i = 0; i < group.samples.size(); ++i) {
      std::size_t a = group.samples[i].action;
      double ratio = probs[a] / old_probs[a];
      // The min() in the surrogate zeroes the gradient once the ratio has
      // left the trust band in the advantage's direction.
      bool clipped = (advantages[i] > 0.0 && ratio > hi) ||
                     (advantages[i] < 0.0 && ratio < lo);
      double coeff = clipped ? 0.0 : advantages[i] * ratio;
      if (config.kl_beta > 0.0) {
        double r = ref_cache[c][a] / probs[a];
        coeff -= config.kl_beta * (1.0 - r);
      }
      coeff *= scale;
      grad[a] += coeff;
      coeff_total += coeff;
    }
    std::span<double> target_row = next.row(c);
    for (std::size_t k = 0; k < policy.n_actions; ++k) {
      double g = grad[k] - probs[k] * coeff_total;
      target_row[k] += config.learning_rate * g;
      if (!std::isfinite(target_row[k])) {
        throw NumericalError("grpo_step: non-finite logit at step " +
                                 std::to_string(batch.step),
                             batch.step);
      }
    }
  }
  return next;
}

double analytic_policy_reward(const PolicyTable& policy, std::size_t context,
                              double target, const ReportGrid& grid,
                              const GrpoConfig& config) {
  std::vector<double> probs = policy.probabilities(context);
  double total = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    ParsedReport report = grid.report_for(a);
    double value = config.label_mode == LabelMode::Binary
                       ? expected_reward_at(report, target, config.reward)
                       : score_action(report, -1, target, config);
    total += probs[a] * value;
  }
  return total;
}

namespace {

/// Mean |E[report | parsable] - optimal| over contexts; 1 when a context has
/// no parsable mass.
double mean_report_gap(const PolicyTable& policy,
                       const AnnotatorPopulation& population,
                       const ReportGrid& grid, const RewardRule& rule) {
  KahanSum gap;
  for (std::size_t c = 0; c < population.contexts.size(); ++c) {
    std::vector<double> probs = policy.probabilities(c);
    double parsable = 0.0, mean = 0.0;
    for (std::size_t a = 0; a < grid.points.size(); ++a) {
      parsable += probs[a];
      mean += probs[a] * grid.points[a];
    }
    double optimal = optimal_report(population.contexts[c].p_star, rule);
    gap.add(parsable > 0.0 ? std::fabs(mean / parsable - optimal) : 1.0);
  }
  return gap.sum() / static_cast<double>(population.contexts.size());
}

}  // namespace

TrainResult train(const AnnotatorPopulation& population, const ReportGrid& grid,
                  const GrpoConfig& config, const PolicyTable* initial) {
  config.validate();
  grid.validate();
  if (population.contexts.empty()) {
    throw std::invalid_argument("train: population has no contexts");
  }
  const std::size_t n_contexts = population.contexts.size();

  PolicyTable policy = initial
                           ? *initial
                           : init_policy(population.contexts, grid,
                                         PolicyInit::uniform());
  if (policy.context_ids.size() != n_contexts ||
      policy.n_actions != grid.action_count()) {
    throw std::invalid_argument("train: initial policy shape mismatch");
  }
  const PolicyTable ref_policy = policy;

  TrainTrace trace;
  trace.rows.reserve(static_cast<std::size_t>(config.steps));
  const std::size_t unparsable = grid.unparsable_index();

  const std::size_t groups_per_step =
      static_cast<std::size_t>(config.groups_per_step);
  for (int step = 0; step < config.steps; ++step) {
    RolloutBatch batch;
    batch.step = step;
    batch.groups.reserve(n_contexts * groups_per_step);
    KahanSum reward_sum;
    long parsable_count = 0;
    long sample_count = 0;
    for (std::size_t c = 0; c < n_contexts; ++c) {
      for (std::size_t g = 0; g < groups_per_step; ++g) {
        std::uint64_t stream =
            derive_seed(config.seed, 0x524f4c4cULL + g,
                        static_cast<std::uint64_t>(step), c);
        RolloutGroup group;
        group.context = c;
        group.samples = rollout(policy, c, population.contexts[c].p_star, grid,
                                config, stream);
        for (const RolloutSample& s : group.samples) {
          reward_sum.add(s.reward);
          if (s.action != unparsable) ++parsable_count;
          ++sample_count;
        }
        batch.groups.push_back(std::move(group));
      }
    }

    policy = grpo_step(policy, policy, ref_policy, batch, grid, config);
    // Softmax is translation-invariant; recentering keeps logits bounded
    // over long runs.
    for (std::size_t c = 0; c < n_contexts; ++c) {
      std::span<double> row = policy.row(c);
      double mean = 0.0;
      for (double z : row) mean += z;
      mean /= static_cast<double>(row.size());
      for (double& z : row) z -= mean;
    }

    TraceRow row;
    row.step = step;
    row.mean_reward = reward_sum.sum() / static_cast<double>(sample_count);
    row.parsability =
        static_cast<double>(parsable_count) / static_cast<double>(sample_count);
    row.mean_abs_gap =
        mean_report_gap(policy, population, grid, config.reward);
    KahanSum entropy_sum, analytic_sum;
    for (std::size_t c = 0; c < n_contexts; ++c) {
      entropy_sum.add(policy.entropy(c));
      analytic_sum.add(analytic_policy_reward(
          policy, c, population.contexts[c].p_star, grid, config));
    }
    row.entropy = entropy_sum.sum() / static_cast<double>(n_contexts);
    row.analytic_reward = analytic_sum.sum() / static_cast<double>(n_contexts);
    trace.rows.push_back(row);
  }
  return {std::move(policy), std::move(trace)};
}

ConsistencyReport consistency_report(const PolicyTable& policy,
                                     const AnnotatorPopulation& population,
                                     const RewardRule& rule,
                                     const ReportGrid& grid,
                                     const ConsistencyTolerances& tol) {
  ConsistencyReport report;
  report.tolerances = tol;
  report.rows.reserve(population.contexts.size());
  bool pass = true;
  for (std::size_t c = 0; c < population.contexts.size(); ++c) {
    std::vector<double> probs = policy.probabilities(c);
    std::size_t mode = 0;
    for (std::size_t a = 1; a < probs.size(); ++a) {
      if (probs[a] > probs[mode]) mode = a;
    }
    ConsistencyRow row;
    row.context_id = population.contexts[c].id;
    row.p_star = population.contexts[c].p_star;
    row.mode_mass = probs[mode];
    row.parsability = 1.0 - probs[grid.unparsable_index()];
    row.entropy = policy.entropy(c);
    double optimal = optimal_report(row.p_star, rule);
    if (mode == grid.unparsable_index()) {
      row.mode_unparsable = true;
      row.mode_gap = 1.0;
    } else {
      row.mode_report = grid.points[mode];
      row.mode_gap = std::fabs(row.mode_report - optimal);
    }
    report.max_mode_gap = std::max(report.max_mode_gap, row.mode_gap);
    report.min_mode_mass = std::min(report.min_mode_mass, row.mode_mass);
    report.min_parsability = std::min(report.min_parsability, row.parsability);
    // grid points are not exact binary fractions; absorb their rounding
    // rather than fail a boundary mode by one ulp
    pass = pass && row.mode_gap <= tol.max_mode_gap + 1e-12 &&
           row.mode_mass >= tol.min_mode_mass &&
           row.parsability >= tol.min_parsability;
    report.rows.push_back(std::move(row));
  }
  report.pass = pass;
  return report;
}

}  // namespace prefcal
