#ifndef PREFCAL_CALIBRATE_HPP
#define PREFCAL_CALIBRATE_HPP

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prefcal/core.hpp"
#include "prefcal/parse.hpp"

namespace prefcal {

/// Fitted temperature-scaling model. The search runs over
/// ln T in [log_lo, log_hi]; boundary_hit flags a fit that ended at either
/// edge, which indicates ill-posed data rather than a usable temperature.
struct TemperatureModel {
  double temperature = 1.0;
  double fit_nll = 0.0;
  double log_lo = -4.0;
  double log_hi = 4.0;
  bool boundary_hit = false;
};

/// Per-class bias estimate of batch calibration, normalized to sum to 1.
struct BiasVector {
  double b_a = 0.5;
  double b_b = 0.5;
};

/// A two-class probability vector (order: A, B).
struct ProbPair {
  double p_a = 0.5;
  double p_b = 0.5;
};

/// Softmax probability that B is better, overflow-safe for any margin.
/// Throws std::domain_error on non-finite logits.
double logit_to_prob(const LogitPair& pair);

/// Vote-fraction confidence from N sampled discrete verdicts: #B over the
/// parsable votes. Unparsable samples are excluded from the denominator.
/// n_expected, when nonzero, is validated against votes.size().
/// Throws std::domain_error when no vote is parsable.
double self_consistency(std::span<const VerdictLetter> votes,
                        std::size_t n_expected = 0);

/// Minimizes mean NLL of softmax(z / T) by golden-section search on ln T.
/// Requires both label values to be present (otherwise the optimum is a
/// degenerate boundary temperature) and returns fit_nll <= NLL at T = 1.
TemperatureModel fit_temperature(std::span<const LogitPair> pairs,
                                 std::span<const int> labels);

/// Probability that B is better under the fitted temperature.
double apply_temperature(const LogitPair& pair, const TemperatureModel& model);

/// Contextual calibration: divides the prediction by the content-free probe
/// distribution and renormalizes; returns the calibrated p(B). Inputs are
/// normalized internally, so any positive scaling of either vector is
/// accepted. Throws std::domain_error on a zero probe entry.
double contextual_calibrate(const ProbPair& probe, const ProbPair& pred);

/// Batch calibration: estimates the bias as the componentwise batch mean and
/// divides every item by it. Returns the normalized bias and the calibrated
/// p(B) per item. Throws std::domain_error on an empty batch.
std::pair<BiasVector, std::vector<double>> batch_calibrate(
    std::span<const ProbPair> batch);

/// Plain-text key-value persistence for a fitted temperature model.
void save_temperature_model(const TemperatureModel& model,
                            const std::string& path);
TemperatureModel load_temperature_model(const std::string& path);

}  // namespace prefcal

#endif  // PREFCAL_CALIBRATE_HPP
