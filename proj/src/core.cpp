#include "prefcal/core.hpp"

#include <cmath>
#include <stdexcept>

#include "prefcal/estimate.hpp"

namespace prefcal {

VerdictClass mirror(VerdictClass v) {
  switch (v) {
    case VerdictClass::ABetter:
      return VerdictClass::BBetter;
    case VerdictClass::BBetter:
      return VerdictClass::ABetter;
    case VerdictClass::Tie:
      return VerdictClass::Tie;
  }
  return VerdictClass::Tie;
}

const char* to_string(VerdictClass v) {
  switch (v) {
    case VerdictClass::ABetter:
      return "A_better";
    case VerdictClass::Tie:
      return "tie";
    case VerdictClass::BBetter:
      return "B_better";
  }
  return "tie";
}

VerdictClass discretize_target(const PreferenceTarget& t) {
  if (t.p_hat < 0.5) return VerdictClass::ABetter;
  if (t.p_hat > 0.5) return VerdictClass::BBetter;
  return VerdictClass::Tie;
}

VerdictClass discretize_prediction(double p, double tie_band) {
  if (!(tie_band >= 0.0 && tie_band < 0.5)) {
    throw std::invalid_argument("tie_band must lie in [0, 0.5)");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("prediction must lie in [0, 1]");
  }
  double d = p - 0.5;
  if (std::fabs(d) <= tie_band) return VerdictClass::Tie;
  return d < 0.0 ? VerdictClass::ABetter : VerdictClass::BBetter;
}

ComparisonInstance swap_instance(const ComparisonInstance& inst) {
  ComparisonInstance out;
  out.id = inst.id;
  out.question = inst.question;
  out.response_a = inst.response_b;
  out.response_b = inst.response_a;
  out.votes.reserve(inst.votes.size());
  for (int v : inst.votes) out.votes.push_back(1 - v);
  if (inst.target) {
    if (!out.votes.empty()) {
      // Re-aggregating from the flipped votes keeps the transform an exact
      // involution; the complement-symmetric mean makes it equal 1 - p_hat.
      out.target = aggregate_votes(out.votes);
    } else {
      PreferenceTarget t = *inst.target;
      t.p_hat = 1.0 - t.p_hat;
      out.target = t;
    }
  }
  return out;
}

std::vector<ComparisonInstance> swap_augment(
    std::span<const ComparisonInstance> dataset) {
  std::vector<ComparisonInstance> out;
  out.reserve(dataset.size() * 2);
  for (const ComparisonInstance& inst : dataset) {
    out.push_back(inst);
    out.push_back(swap_instance(inst));
  }
  return out;
}

void validate_instance(const ComparisonInstance& inst) {
  for (int v : inst.votes) {
    if (v != 0 && v != 1) {
      throw std::invalid_argument("instance " + inst.id +
                                  ": votes must be 0 or 1");
    }
  }
  if (inst.target) {
    const PreferenceTarget& t = *inst.target;
    if (!(t.p_hat >= 0.0 && t.p_hat <= 1.0)) {
      throw std::invalid_argument("instance " + inst.id +
                                  ": p_hat out of [0, 1]");
    }
    if (t.m < 1) {
      throw std::invalid_argument("instance " + inst.id + ": m must be >= 1");
    }
    if (t.variance_estimate < 0.0) {
      throw std::invalid_argument("instance " + inst.id +
                                  ": negative variance estimate");
    }
    if (!inst.votes.empty()) {
      double mean = aggregate_votes(inst.votes).p_hat;
      if (std::fabs(mean - t.p_hat) > 1e-12) {
        throw std::invalid_argument("instance " + inst.id +
                                    ": target disagrees with vote mean");
      }
    }
  }
}

}  // namespace prefcal
