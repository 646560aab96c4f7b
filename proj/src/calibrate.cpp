#include "prefcal/calibrate.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "prefcal/metrics.hpp"

namespace prefcal {

namespace {

/// ln sigma(m), stable for any margin.
double log_sigmoid(double m) {
  return m < 0.0 ? m - std::log1p(std::exp(m)) : -std::log1p(std::exp(-m));
}

double sigmoid(double m) {
  if (m >= 0.0) {
    return 1.0 / (1.0 + std::exp(-m));
  }
  double e = std::exp(m);
  return e / (1.0 + e);
}

double mean_nll(std::span<const LogitPair> pairs, std::span<const int> labels,
                double temperature) {
  KahanSum sum;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    double m = pairs[i].margin / temperature;
    // NLL of the observed label under softmax(z / T).
    sum.add(labels[i] == 1 ? -log_sigmoid(m) : -log_sigmoid(-m));
  }
  return sum.sum() / static_cast<double>(pairs.size());
}

}  // namespace

double logit_to_prob(const LogitPair& pair) {
  if (!std::isfinite(pair.z_a) || !std::isfinite(pair.z_b)) {
    throw std::domain_error("logit_to_prob: non-finite logits");
  }
  return sigmoid(pair.margin);
}

double self_consistency(std::span<const VerdictLetter> votes,
                        std::size_t n_expected) {
  if (votes.empty()) {
    throw std::domain_error("self_consistency: empty vote list");
  }
  if (n_expected != 0 && votes.size() != n_expected) {
    throw std::invalid_argument("self_consistency: expected " +
                                std::to_string(n_expected) + " votes, got " +
                                std::to_string(votes.size()));
  }
  long b = 0, parsable = 0;
  for (VerdictLetter v : votes) {
    if (v == VerdictLetter::Unparsable) continue;
    ++parsable;
    if (v == VerdictLetter::B) ++b;
  }
  if (parsable == 0) {
    throw std::domain_error("self_consistency: no parsable votes");
  }
  return static_cast<double>(b) / static_cast<double>(parsable);
}

TemperatureModel fit_temperature(std::span<const LogitPair> pairs,
                                 std::span<const int> labels) {
  if (pairs.empty() || pairs.size() != labels.size()) {
    throw std::domain_error("fit_temperature: empty or mismatched inputs");
  }
  bool has0 = false, has1 = false;
  for (int y : labels) {
    if (y == 0) has0 = true;
    else if (y == 1) has1 = true;
    else throw std::invalid_argument("fit_temperature: labels must be binary");
  }
  if (!has0 || !has1) {
    throw std::domain_error(
        "fit_temperature: degenerate fit, both label values required");
  }

  TemperatureModel model;
  auto nll_at_log_t = [&](double lt) { return mean_nll(pairs, labels, std::exp(lt)); };

  // Golden-section search on ln T; the NLL of this one-parameter family is
  // unimodal in practice.
  const double inv_phi = 0.6180339887498948482;
  double a = model.log_lo, b = model.log_hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = nll_at_log_t(c);
  double fd = nll_at_log_t(d);
  while (std::fabs(b - a) > 1e-6) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = nll_at_log_t(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = nll_at_log_t(d);
    }
  }
  double log_t = 0.5 * (a + b);
  double best_nll = nll_at_log_t(log_t);
  // Never regress past the identity temperature.
  double identity_nll = mean_nll(pairs, labels, 1.0);
  if (identity_nll <= best_nll) {
    log_t = 0.0;
    best_nll = identity_nll;
  }
  model.temperature = std::exp(log_t);
  model.fit_nll = best_nll;
  model.boundary_hit = std::fabs(log_t - model.log_lo) < 1e-3 ||
                       std::fabs(log_t - model.log_hi) < 1e-3;
  return model;
}

double apply_temperature(const LogitPair& pair, const TemperatureModel& model) {
  if (!(model.temperature > 0.0)) {
    throw std::invalid_argument("apply_temperature: temperature must be > 0");
  }
  return logit_to_prob(LogitPair(pair.z_a / model.temperature,
                                 pair.z_b / model.temperature));
}

double contextual_calibrate(const ProbPair& probe, const ProbPair& pred) {
  if (!(probe.p_a > 0.0) || !(probe.p_b > 0.0)) {
    throw std::domain_error("contextual_calibrate: probe entries must be > 0");
  }
  if (pred.p_a < 0.0 || pred.p_b < 0.0 || pred.p_a + pred.p_b <= 0.0) {
    throw std::domain_error("contextual_calibrate: invalid prediction vector");
  }
  double q_a = pred.p_a / probe.p_a;
  double q_b = pred.p_b / probe.p_b;
  return q_b / (q_a + q_b);
}

std::pair<BiasVector, std::vector<double>> batch_calibrate(
    std::span<const ProbPair> batch) {
  if (batch.empty()) throw std::domain_error("batch_calibrate: empty batch");
  KahanSum sum_a, sum_b;
  for (const ProbPair& p : batch) {
    if (p.p_a < 0.0 || p.p_b < 0.0) {
      throw std::domain_error("batch_calibrate: negative probability");
    }
    sum_a.add(p.p_a);
    sum_b.add(p.p_b);
  }
  double n = static_cast<double>(batch.size());
  double mean_a = sum_a.sum() / n;
  double mean_b = sum_b.sum() / n;
  if (!(mean_a > 0.0) || !(mean_b > 0.0)) {
    throw std::domain_error("batch_calibrate: degenerate batch bias");
  }
  std::vector<double> calibrated;
  calibrated.reserve(batch.size());
  for (const ProbPair& p : batch) {
    double q_a = p.p_a / mean_a;
    double q_b = p.p_b / mean_b;
    calibrated.push_back(q_b / (q_a + q_b));
  }
  BiasVector bias{mean_a / (mean_a + mean_b), mean_b / (mean_a + mean_b)};
  return {bias, std::move(calibrated)};
}

void save_temperature_model(const TemperatureModel& model,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "temperature = " << model.temperature << "\n"
      << "fit_nll = " << model.fit_nll << "\n"
      << "log_lo = " << model.log_lo << "\n"
      << "log_hi = " << model.log_hi << "\n"
      << "boundary_hit = " << (model.boundary_hit ? "true" : "false") << "\n";
}

TemperatureModel load_temperature_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  TemperatureModel model;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key, eq;
    if (!(ls >> key >> eq)) continue;
    if (key == "temperature") ls >> model.temperature;
    else if (key == "fit_nll") ls >> model.fit_nll;
    else if (key == "log_lo") ls >> model.log_lo;
    else if (key == "log_hi") ls >> model.log_hi;
    else if (key == "boundary_hit") {
      std::string v;
      ls >> v;
      model.boundary_hit = v == "true";
    }
  }
  if (!(model.temperature > 0.0)) {
    throw std::runtime_error("invalid temperature model in " + path);
  }
  return model;
}

}  // namespace prefcal
