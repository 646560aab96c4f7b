#ifndef PREFCAL_CORE_HPP
#define PREFCAL_CORE_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prefcal {

/// Three-way verdict for a pairwise comparison.
enum class VerdictClass { ABetter, Tie, BBetter };

/// Swaps the roles of A and B; Tie is a fixed point.
VerdictClass mirror(VerdictClass v);

const char* to_string(VerdictClass v);

/// Estimated preference distribution for one comparison: the mean of m
/// binary annotator votes plus the binomial variance estimate.
struct PreferenceTarget {
  double p_hat = 0.5;              // probability that B is preferred
  int m = 1;                       // number of votes behind the estimate
  double variance_estimate = 0.0;  // p_hat * (1 - p_hat) / m when vote-derived
};

/// One prompt with two candidate responses and the raw annotator votes
/// (1 = B preferred). The unit of evaluation.
struct ComparisonInstance {
  std::string id;
  std::string question;
  std::string response_a;
  std::string response_b;
  std::vector<int> votes;
  std::optional<PreferenceTarget> target;
};

/// A pair of decision logits for the verdict tokens A and B.
/// margin = z_b - z_a is the quantity all downstream math consumes.
struct LogitPair {
  double z_a = 0.0;
  double z_b = 0.0;
  double margin = 0.0;

  LogitPair() = default;
  LogitPair(double za, double zb) : z_a(za), z_b(zb), margin(zb - za) {}
};

/// A judge's probability that B is better, for the original presentation
/// order and optionally for the swapped one.
struct PredictionRecord {
  std::string id;
  double p_orig = 0.5;
  std::optional<double> p_swap;
  std::optional<LogitPair> logits;
  std::optional<std::string> raw_text;
};

/// Ground-truth class of a target: exact 0.5 is a Tie, otherwise the side
/// with the majority mass wins.
VerdictClass discretize_target(const PreferenceTarget& t);

/// Class of a continuous prediction. Ties occupy the closed band
/// |p - 0.5| <= tie_band. The band is a toolkit convention, not from the
/// underlying three-class formulation; report it alongside any metric.
/// tie_band must lie in [0, 0.5).
VerdictClass discretize_prediction(double p, double tie_band);

/// Mirrors one instance: responses exchanged, every vote flipped, and the
/// target complemented. When votes are present the swapped target is
/// re-aggregated from the flipped votes, which makes the transform an exact
/// involution.
ComparisonInstance swap_instance(const ComparisonInstance& inst);

/// Duplicates each instance with its swapped twin appended right after it.
std::vector<ComparisonInstance> swap_augment(
    std::span<const ComparisonInstance> dataset);

/// Checks the structural invariants (votes binary, target consistent with
/// votes within 1e-12); throws std::invalid_argument on violation.
void validate_instance(const ComparisonInstance& inst);

}  // namespace prefcal

#endif  // PREFCAL_CORE_HPP
