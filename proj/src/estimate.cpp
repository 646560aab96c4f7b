#include "prefcal/estimate.hpp"

#include <cmath>
#include <stdexcept>

#include "prefcal/rng.hpp"

namespace prefcal {

PreferenceTarget aggregate_votes(std::span<const int> votes) {
  if (votes.empty()) {
    throw std::domain_error("aggregate_votes: empty vote list");
  }
  long ones = 0;
  for (int v : votes) {
    if (v != 0 && v != 1) {
      throw std::invalid_argument("aggregate_votes: votes must be 0 or 1");
    }
    ones += v;
  }
  const long m = static_cast<long>(votes.size());
  const long zeros = m - ones;
  PreferenceTarget t;
  t.m = static_cast<int>(m);
  // Complement-symmetric mean: the minority count is the one divided, so
  // flipping every vote yields exactly 1 - p_hat.
  if (2 * ones <= m) {
    t.p_hat = static_cast<double>(ones) / static_cast<double>(m);
  } else {
    t.p_hat = 1.0 - static_cast<double>(zeros) / static_cast<double>(m);
  }
  t.variance_estimate = t.p_hat * (1.0 - t.p_hat) / static_cast<double>(m);
  return t;
}

namespace {

int draw_vote(Rng& rng, double p_star, const AnnotatorModel& model) {
  if (std::holds_alternative<StableAnnotators>(model)) {
    // A stable annotator is a fixed 0/1 judgment; sampling the annotator is
    // a Bernoulli(p*) draw.
    return rng.bernoulli(p_star);
  }
  const NoisyAnnotators& noisy = std::get<NoisyAnnotators>(model);
  if (p_star <= 0.0) return 0;
  if (p_star >= 1.0) return 1;
  double p_h = rng.beta(noisy.concentration * p_star,
                        noisy.concentration * (1.0 - p_star));
  return rng.bernoulli(p_h);
}

}  // namespace

std::vector<int> sample_votes(double p_star, int m, std::uint64_t seed,
                              const AnnotatorModel& model) {
  if (m < 1) throw std::domain_error("sample_votes: m must be >= 1");
  if (!(p_star >= 0.0 && p_star <= 1.0)) {
    throw std::invalid_argument("sample_votes: p_star must lie in [0, 1]");
  }
  Rng rng(seed);
  std::vector<int> votes(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    votes[static_cast<std::size_t>(j)] = draw_vote(rng, p_star, model);
  }
  return votes;
}

std::vector<ComparisonInstance> make_synthetic_dataset(
    const AnnotatorPopulation& pop, int m) {
  if (m < 1) throw std::domain_error("make_synthetic_dataset: m must be >= 1");
  std::vector<ComparisonInstance> out;
  out.reserve(pop.contexts.size());
  for (std::size_t i = 0; i < pop.contexts.size(); ++i) {
    const AnnotatorPopulation::Context& ctx = pop.contexts[i];
    ComparisonInstance inst;
    inst.id = ctx.id;
    inst.question = "synthetic question for context " + ctx.id;
    inst.response_a = "candidate response A for context " + ctx.id;
    inst.response_b = "candidate response B for context " + ctx.id;
    inst.votes = sample_votes(ctx.p_star, m, derive_seed(pop.seed, 0x564f5445ULL, i),
                              pop.model);
    inst.target = aggregate_votes(inst.votes);
    out.push_back(std::move(inst));
  }
  return out;
}

AnnotatorPopulation make_population(const PopulationSpec& spec) {
  if (spec.context_count < 1) {
    throw std::invalid_argument("population spec: context_count must be >= 1");
  }
  AnnotatorPopulation pop;
  pop.model = spec.model;
  pop.seed = spec.seed;
  pop.contexts.reserve(static_cast<std::size_t>(spec.context_count));
  Rng rng(derive_seed(spec.seed, 0x504f5055ULL));
  for (int i = 0; i < spec.context_count; ++i) {
    AnnotatorPopulation::Context ctx;
    ctx.id = "ctx" + std::to_string(i);
    if (std::holds_alternative<GridLaw>(spec.law)) {
      ctx.p_star = spec.context_count == 1
                       ? 0.5
                       : static_cast<double>(i) /
                             static_cast<double>(spec.context_count - 1);
    } else {
      const BetaLaw& law = std::get<BetaLaw>(spec.law);
      ctx.p_star = rng.beta(law.a, law.b);
    }
    pop.contexts.push_back(std::move(ctx));
  }
  return pop;
}

}  // namespace prefcal
