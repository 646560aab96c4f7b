#ifndef PREFCAL_SCORING_HPP
#define PREFCAL_SCORING_HPP

#include <vector>

#include "prefcal/parse.hpp"

namespace prefcal {

enum class RewardKind { Brier, Log };

/// Which piecewise strictly proper reward to use. epsilon is the clipping
/// constant of the Log reward and must lie in (0, 0.5); Brier ignores it.
struct RewardRule {
  RewardKind kind = RewardKind::Brier;
  double epsilon = 1e-3;

  static RewardRule brier() { return {RewardKind::Brier, 1e-3}; }
  static RewardRule log_rule(double eps = 1e-3) {
    return {RewardKind::Log, eps};
  }

  void validate() const;
};

/// Brier reward: 1 - (p - y)^2 for a parsable report, 0 for unparsable.
/// Result lies in [0, 1].
double brier_reward(const ParsedReport& report, int y);

/// Clipped logarithmic reward: with p' = clip(p, eps, 1-eps),
/// y ln p' + (1-y) ln(1-p') for a parsable report, ln(eps) for unparsable.
/// Result lies in [ln eps, ln(1-eps)]. Natural logarithm throughout.
double log_reward(const ParsedReport& report, int y, const RewardRule& rule);

/// Squared-error reward against a probabilistic target:
/// 1 - (p - p_hat)^2 for a parsable report, 0 for unparsable.
double brier_reward_prob_target(const ParsedReport& report, double p_hat);

/// Dispatch on rule.kind for a sampled binary label.
double reward(const ParsedReport& report, int y, const RewardRule& rule);

/// A distribution over reports: probability atoms plus optional mass on the
/// unparsable action. Masses must be nonnegative and sum to 1 within 1e-9.
struct ReportDistribution {
  struct Atom {
    ParsedReport report;
    double mass = 0.0;
  };
  std::vector<Atom> support;

  void validate() const;
  /// (s, conditional mean, conditional variance) of the parsable part.
  struct Moments {
    double parsable_mass = 0.0;
    double mean = 0.0;
    double variance = 0.0;
  };
  Moments moments() const;
};

/// Closed-form expected reward of a single report against Y ~ Bernoulli(p*):
/// Brier: 1 - (p - p*)^2 - p*(1 - p*) when parsable, 0 otherwise.
/// Log:   p* ln p' + (1 - p*) ln(1 - p') when parsable, ln eps otherwise.
double expected_reward_at(const ParsedReport& report, double p_star,
                          const RewardRule& rule);

/// Per-context inner expectation of the population objective: the mass-
/// weighted expected reward of a report distribution under Y ~ Bern(p*).
double expected_reward(const ReportDistribution& dist, double p_star,
                       const RewardRule& rule);

/// The Brier-case decomposition of the expected reward:
/// s * (1 - (mean - p*)^2 - var - p*(1 - p*)).
/// Requires var_report <= 0.25 and probability arguments in range.
double brier_decomposition(double s, double mean_report, double var_report,
                           double p_star);

/// The report that maximizes expected reward: p* for Brier,
/// clip(p*, eps, 1-eps) for Log.
double optimal_report(double p_star, const RewardRule& rule);

}  // namespace prefcal

#endif  // PREFCAL_SCORING_HPP
