#ifndef PREFCAL_ESTIMATE_HPP
#define PREFCAL_ESTIMATE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "prefcal/core.hpp"

namespace prefcal {

/// Every annotator holds a fixed 0/1 judgment per context; the population
/// preference is the fraction preferring B.
struct StableAnnotators {};

/// Each annotator's own preference probability is drawn from
/// Beta(concentration * p*, concentration * (1 - p*)), whose mean is exactly
/// p*, and the vote is Bernoulli in that probability.
struct NoisyAnnotators {
  double concentration = 8.0;
};

using AnnotatorModel = std::variant<StableAnnotators, NoisyAnnotators>;

/// A synthetic population: per-context true preferences plus the annotator
/// behavior model and the base seed for all sampling.
struct AnnotatorPopulation {
  struct Context {
    std::string id;
    double p_star = 0.5;
  };
  std::vector<Context> contexts;
  AnnotatorModel model = StableAnnotators{};
  std::uint64_t seed = 0;
};

/// Multi-annotator estimate from binary votes: p_hat = mean, m = count,
/// variance = p_hat (1 - p_hat) / m. The mean is computed in a
/// complement-symmetric form so that flipping every vote yields exactly
/// 1 - p_hat. Throws std::domain_error on empty votes.
PreferenceTarget aggregate_votes(std::span<const int> votes);

/// m i.i.d. annotator votes at preference p_star under the given model;
/// deterministic per seed. Throws std::domain_error when m < 1.
std::vector<int> sample_votes(double p_star, int m, std::uint64_t seed,
                              const AnnotatorModel& model = StableAnnotators{});

/// One instance per context with m sampled votes and the aggregated target.
/// Question/response texts are placeholders carrying the context id.
/// Byte-identical across runs for a fixed population seed.
std::vector<ComparisonInstance> make_synthetic_dataset(
    const AnnotatorPopulation& pop, int m);

/// How the per-context true preferences are laid out.
struct GridLaw {};  // p*_i = i / (n - 1)
struct BetaLaw {
  double a = 1.0;
  double b = 1.0;
};
using PreferenceLaw = std::variant<GridLaw, BetaLaw>;

/// Declarative population description, loadable from a config file.
struct PopulationSpec {
  int context_count = 11;
  PreferenceLaw law = GridLaw{};
  int votes_per_context = 10;
  std::uint64_t seed = 0;
  AnnotatorModel model = StableAnnotators{};
};

AnnotatorPopulation make_population(const PopulationSpec& spec);

}  // namespace prefcal

#endif  // PREFCAL_ESTIMATE_HPP
