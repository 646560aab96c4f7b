#ifndef PREFCAL_RLSIM_HPP
#define PREFCAL_RLSIM_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefcal/estimate.hpp"
#include "prefcal/scoring.hpp"

namespace prefcal {

/// Discrete report space: sorted probability points plus one distinguished
/// unparsable action (always the last action index).
struct ReportGrid {
  std::vector<double> points;

  /// 0.00 .. 1.00 in the given step (default 0.01, the two-decimal
  /// verbalized precision).
  static ReportGrid regular(double step = 0.01);

  std::size_t action_count() const { return points.size() + 1; }
  std::size_t unparsable_index() const { return points.size(); }
  ParsedReport report_for(std::size_t action) const;
  void validate() const;
};

/// Tabular policy: one row of action logits per context.
struct PolicyTable {
  std::vector<std::string> context_ids;
  std::size_t n_actions = 0;
  std::vector<double> logits;  // row-major, context_ids.size() x n_actions

  std::span<const double> row(std::size_t context) const;
  std::span<double> row(std::size_t context);
  /// Softmax of one row.
  std::vector<double> probabilities(std::size_t context) const;
  double entropy(std::size_t context) const;  // nats
};

/// How the starting policy is shaped.
struct PolicyInit {
  enum class Kind { Uniform, Peaked };
  Kind kind = Kind::Uniform;
  // For Peaked: the favored grid point, or the unparsable action when unset.
  std::optional<double> point;
  double logit_offset = 5.0;

  static PolicyInit uniform() { return {}; }
  static PolicyInit peaked_at(double p, double offset = 5.0) {
    return {Kind::Peaked, p, offset};
  }
  static PolicyInit peaked_unparsable(double offset = 5.0) {
    return {Kind::Peaked, std::nullopt, offset};
  }
};

enum class LabelMode { Binary, Probabilistic };

/// Where the Bernoulli label is drawn in Binary mode: a fresh draw per
/// sample, or one draw shared by the whole group (the
/// single-annotation-per-prompt regime the cited GRPO setup trains on).
/// Group-shared labels interact with advantage standardization: the
/// conditional pushes toward y = 0 and y = 1 are rescaled by different group
/// deviations, which biases the converged report away from p*.
enum class LabelDraw { PerSample, PerGroup };

/// How the G group actions are drawn from the policy: independently, by
/// stratified inverse-CDF sampling (one uniform per 1/G slice), or by
/// systematic resampling (a single uniform offset, G evenly spaced CDF
/// probes). All three are unbiased samplers of the policy; the latter two
/// shrink group-composition noise, which is what limits fine-grid
/// convergence accuracy.
enum class GroupSampler { Iid, Stratified, Systematic };

struct GrpoConfig {
  int group_size = 32;
  // Rollout groups per context per training step; the per-step gradient is
  // the average of the per-group gradients. Advantages always standardize
  // within one group of group_size generations.
  int groups_per_step = 1;
  double clip_eps = 0.2;
  double kl_beta = 0.0;
  double learning_rate = 0.1;
  int steps = 2000;
  std::uint64_t seed = 0;
  RewardRule reward{};
  LabelMode label_mode = LabelMode::Binary;
  LabelDraw label_draw = LabelDraw::PerSample;
  GroupSampler sampler = GroupSampler::Iid;

  void validate() const;
};

/// One sampled generation: the action taken, the label it was scored
/// against (-1 in Probabilistic mode), and the reward received.
struct RolloutSample {
  std::size_t action = 0;
  int label = -1;
  double reward = 0.0;
};

/// All groups of one training step; a context may contribute several groups.
struct RolloutGroup {
  std::size_t context = 0;
  std::vector<RolloutSample> samples;
};
struct RolloutBatch {
  int step = 0;
  std::vector<RolloutGroup> groups;
};

/// Per-step training diagnostics. analytic_reward is the exact expected
/// reward of the post-update policy, averaged over contexts.
struct TraceRow {
  int step = 0;
  double mean_reward = 0.0;
  double parsability = 0.0;
  double mean_abs_gap = 0.0;
  double entropy = 0.0;
  double analytic_reward = 0.0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
};

struct TrainResult {
  PolicyTable policy;
  TrainTrace trace;
};

/// Fresh policy over the grid actions for every context.
PolicyTable init_policy(std::span<const AnnotatorPopulation::Context> contexts,
                        const ReportGrid& grid, const PolicyInit& init);

/// Samples one group of config.group_size actions for a context and scores
/// them. target is p* (Binary mode: labels ~ Bernoulli(p*)) or p_hat
/// (Probabilistic mode: deterministic squared-error reward). Deterministic
/// per seed.
std::vector<RolloutSample> rollout(const PolicyTable& policy,
                                   std::size_t context, double target,
                                   const ReportGrid& grid,
                                   const GrpoConfig& config,
                                   std::uint64_t seed);

/// Group-standardized advantages: (r - mean) / std with a 1e-8 floor on the
/// population std. An all-equal group yields all zeros.
std::vector<double> grpo_advantages(std::span<const double> rewards);

/// Unbiased single-sample KL estimator r - ln r - 1 with
/// r = pi_ref / pi_theta, evaluated at the sampled action. Nonnegative, zero
/// iff the probabilities agree. Throws std::domain_error on zero input.
double kl_estimate(double pi_theta_prob, double pi_ref_prob);

/// One gradient-ascent update of the clipped ratio surrogate minus
/// kl_beta times the KL estimate, on the sampled actions of the batch.
/// Throws NumericalError (with the batch step index) if the update produces
/// a non-finite logit.
PolicyTable grpo_step(const PolicyTable& policy, const PolicyTable& old_policy,
                      const PolicyTable& ref_policy, const RolloutBatch& batch,
                      const ReportGrid& grid, const GrpoConfig& config);

/// Full training loop: config.steps iterations of rollout + grpo_step over
/// all contexts, starting from `init` (uniform when absent). The reference
/// policy for the KL term is the initial policy. Fully reproducible per
/// seed.
TrainResult train(const AnnotatorPopulation& population, const ReportGrid& grid,
                  const GrpoConfig& config,
                  const PolicyTable* initial = nullptr);

/// Pass/fail thresholds for a consistency check of a trained policy.
struct ConsistencyTolerances {
  double max_mode_gap = 0.02;      // |mode - optimal report|
  double min_mode_mass = 0.95;     // determinism
  double min_parsability = 0.999;  // 1 - policy mass on unparsable
};

struct ConsistencyRow {
  std::string context_id;
  double p_star = 0.0;
  bool mode_unparsable = false;
  double mode_report = 0.0;  // meaningless when mode_unparsable
  double mode_mass = 0.0;
  double mode_gap = 0.0;  // |mode - optimal|; 1.0 when mode is unparsable
  double parsability = 0.0;
  double entropy = 0.0;
};

struct ConsistencyReport {
  std::vector<ConsistencyRow> rows;
  double max_mode_gap = 0.0;
  double min_mode_mass = 1.0;
  double min_parsability = 1.0;
  ConsistencyTolerances tolerances;
  bool pass = false;
};

/// Per-context diagnostics of a trained policy against the truthful optimum
/// of the reward rule, plus aggregate extrema and a pass/fail verdict.
ConsistencyReport consistency_report(const PolicyTable& policy,
                                     const AnnotatorPopulation& population,
                                     const RewardRule& rule,
                                     const ReportGrid& grid,
                                     const ConsistencyTolerances& tol = {});

/// Exact expected reward of one policy row under Y ~ Bern(p_star) (Binary)
/// or the deterministic probabilistic-target reward.
double analytic_policy_reward(const PolicyTable& policy, std::size_t context,
                              double target, const ReportGrid& grid,
                              const GrpoConfig& config);

/// Raised when training produces a non-finite quantity.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int step)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace prefcal

#endif  // PREFCAL_RLSIM_HPP
