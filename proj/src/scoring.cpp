#include "prefcal/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prefcal {

namespace {

double clip(double p, double lo, double hi) {
  return std::min(std::max(p, lo), hi);
}

void check_label(int y) {
  if (y != 0 && y != 1) {
    throw std::invalid_argument("label must be 0 or 1");
  }
}

}  // namespace

void RewardRule::validate() const {
  if (kind == RewardKind::Log && !(epsilon > 0.0 && epsilon < 0.5)) {
    throw std::invalid_argument("Log reward requires epsilon in (0, 0.5)");
  }
}

double brier_reward(const ParsedReport& report, int y) {
  check_label(y);
  if (!report.parsable()) return 0.0;
  double d = report.probability() - static_cast<double>(y);
  return 1.0 - d * d;
}

double log_reward(const ParsedReport& report, int y, const RewardRule& rule) {
  check_label(y);
  rule.validate();
  if (!report.parsable()) return std::log(rule.epsilon);
  double p = clip(report.probability(), rule.epsilon, 1.0 - rule.epsilon);
  return y == 1 ? std::log(p) : std::log(1.0 - p);
}

double brier_reward_prob_target(const ParsedReport& report, double p_hat) {
  if (!(p_hat >= 0.0 && p_hat <= 1.0)) {
    throw std::invalid_argument("p_hat must lie in [0, 1]");
  }
  if (!report.parsable()) return 0.0;
  double d = report.probability() - p_hat;
  return 1.0 - d * d;
}

double reward(const ParsedReport& report, int y, const RewardRule& rule) {
  return rule.kind == RewardKind::Brier ? brier_reward(report, y)
                                        : log_reward(report, y, rule);
}

void ReportDistribution::validate() const {
  double total = 0.0;
  for (const Atom& a : support) {
    if (a.mass < 0.0) {
      throw std::invalid_argument("report distribution: negative mass");
    }
    if (a.report.parsable()) {
      double p = a.report.probability();
      if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("report distribution: report out of range");
      }
    }
    total += a.mass;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("report distribution: masses must sum to 1");
  }
}

ReportDistribution::Moments ReportDistribution::moments() const {
  Moments m;
  double mass_sum = 0.0;
  double mean_sum = 0.0;
  for (const Atom& a : support) {
    if (!a.report.parsable()) continue;
    mass_sum += a.mass;
    mean_sum += a.mass * a.report.probability();
  }
  // rounding can push the totals an ulp past their mathematical bounds
  m.parsable_mass = clip(mass_sum, 0.0, 1.0);
  if (mass_sum <= 0.0) return m;
  m.mean = clip(mean_sum / mass_sum, 0.0, 1.0);
  double var_sum = 0.0;
  for (const Atom& a : support) {
    if (!a.report.parsable()) continue;
    double d = a.report.probability() - m.mean;
    var_sum += a.mass * d * d;
  }
  m.variance = clip(var_sum / mass_sum, 0.0, 0.25);
  return m;
}

double expected_reward_at(const ParsedReport& report, double p_star,
                          const RewardRule& rule) {
  if (!(p_star >= 0.0 && p_star <= 1.0)) {
    throw std::invalid_argument("p_star must lie in [0, 1]");
  }
  rule.validate();
  if (rule.kind == RewardKind::Brier) {
    if (!report.parsable()) return 0.0;
    double d = report.probability() - p_star;
    return 1.0 - d * d - p_star * (1.0 - p_star);
  }
  if (!report.parsable()) return std::log(rule.epsilon);
  double p = clip(report.probability(), rule.epsilon, 1.0 - rule.epsilon);
  // phi(p) with the convention 0 * log(...) = 0 at the boundaries.
  double term1 = p_star > 0.0 ? p_star * std::log(p) : 0.0;
  double term0 = p_star < 1.0 ? (1.0 - p_star) * std::log(1.0 - p) : 0.0;
  return term1 + term0;
}

double expected_reward(const ReportDistribution& dist, double p_star,
                       const RewardRule& rule) {
  dist.validate();
  double total = 0.0;
  for (const ReportDistribution::Atom& a : dist.support) {
    total += a.mass * expected_reward_at(a.report, p_star, rule);
  }
  return total;
}

double brier_decomposition(double s, double mean_report, double var_report,
                           double p_star) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw std::invalid_argument("parsable mass s must lie in [0, 1]");
  }
  if (!(var_report >= 0.0 && var_report <= 0.25)) {
    throw std::invalid_argument("report variance must lie in [0, 0.25]");
  }
  if (!(mean_report >= 0.0 && mean_report <= 1.0) ||
      !(p_star >= 0.0 && p_star <= 1.0)) {
    throw std::invalid_argument("probabilities must lie in [0, 1]");
  }
  double bias = mean_report - p_star;
  return s * (1.0 - bias * bias - var_report - p_star * (1.0 - p_star));
}

double optimal_report(double p_star, const RewardRule& rule) {
  if (!(p_star >= 0.0 && p_star <= 1.0)) {
    throw std::invalid_argument("p_star must lie in [0, 1]");
  }
  rule.validate();
  if (rule.kind == RewardKind::Brier) return p_star;
  return clip(p_star, rule.epsilon, 1.0 - rule.epsilon);
}

}  // namespace prefcal
