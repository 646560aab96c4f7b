#include "prefcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace prefcal {

namespace {

constexpr int kNumClasses = 3;

int class_index(VerdictClass v) {
  switch (v) {
    case VerdictClass::ABetter:
      return 0;
    case VerdictClass::Tie:
      return 1;
    case VerdictClass::BBetter:
      return 2;
  }
  return 1;
}

void check_same_nonempty(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::domain_error(std::string(what) + ": length mismatch");
  }
  if (a == 0) {
    throw std::domain_error(std::string(what) + ": empty input");
  }
}

}  // namespace

double mse_alignment(std::span<const double> preds,
                     std::span<const PreferenceTarget> targets) {
  check_same_nonempty(preds.size(), targets.size(), "mse_alignment");
  KahanSum sum;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double d = preds[i] - targets[i].p_hat;
    sum.add(d * d);
  }
  return sum.sum() / static_cast<double>(preds.size());
}

ConfusionStats confusion_metrics(std::span<const VerdictClass> pred_classes,
                                 std::span<const VerdictClass> target_classes) {
  check_same_nonempty(pred_classes.size(), target_classes.size(),
                      "confusion_metrics");
  long tp[kNumClasses] = {0, 0, 0};
  long fp[kNumClasses] = {0, 0, 0};
  long fn[kNumClasses] = {0, 0, 0};
  for (std::size_t i = 0; i < pred_classes.size(); ++i) {
    int p = class_index(pred_classes[i]);
    int t = class_index(target_classes[i]);
    if (p == t) {
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  ConfusionStats stats;
  long correct = 0;
  double precision_sum = 0.0, recall_sum = 0.0, f1_sum = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    correct += tp[c];
    // An empty class contributes 0 but the denominator stays 3.
    double prec = (tp[c] + fp[c]) > 0 ? static_cast<double>(tp[c]) /
                                            static_cast<double>(tp[c] + fp[c])
                                      : 0.0;
    double rec = (tp[c] + fn[c]) > 0 ? static_cast<double>(tp[c]) /
                                           static_cast<double>(tp[c] + fn[c])
                                     : 0.0;
    double f1 = (2 * tp[c] + fp[c] + fn[c]) > 0
                    ? 2.0 * static_cast<double>(tp[c]) /
                          static_cast<double>(2 * tp[c] + fp[c] + fn[c])
                    : 0.0;
    precision_sum += prec;
    recall_sum += rec;
    f1_sum += f1;
  }
  stats.agreement =
      static_cast<double>(correct) / static_cast<double>(pred_classes.size());
  stats.precision_macro = precision_sum / kNumClasses;
  stats.recall_macro = recall_sum / kNumClasses;
  stats.f1_macro = f1_sum / kNumClasses;
  return stats;
}

std::vector<ReliabilityBin> reliability_diagram(std::span<const double> preds,
                                                std::span<const int> labels,
                                                int k_bins) {
  if (k_bins < 1) {
    throw std::invalid_argument("reliability_diagram: k_bins must be >= 1");
  }
  check_same_nonempty(preds.size(), labels.size(), "reliability_diagram");
  const double k = static_cast<double>(k_bins);
  std::vector<ReliabilityBin> bins(static_cast<std::size_t>(k_bins));
  std::vector<KahanSum> conf_sums(static_cast<std::size_t>(k_bins));
  std::vector<long> hits(static_cast<std::size_t>(k_bins), 0);
  for (int b = 0; b < k_bins; ++b) {
    bins[static_cast<std::size_t>(b)].lo = static_cast<double>(b) / k;
    bins[static_cast<std::size_t>(b)].hi = static_cast<double>(b + 1) / k;
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double p = preds[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("reliability_diagram: prediction out of range");
    }
    if (labels[i] != 0 && labels[i] != 1) {
      throw std::invalid_argument("reliability_diagram: labels must be binary");
    }
    int predicted = p >= 0.5 ? 1 : 0;  // tie broken toward B
    double conf = predicted == 1 ? p : 1.0 - p;
    // Bin b holds confidences in (b/K, (b+1)/K]; conf >= 0.5 > 0 always
    // lands in a bin.
    int b = static_cast<int>(std::ceil(conf * k)) - 1;
    b = std::clamp(b, 0, k_bins - 1);
    std::size_t bi = static_cast<std::size_t>(b);
    bins[bi].count += 1;
    conf_sums[bi].add(conf);
    hits[bi] += predicted == labels[i] ? 1 : 0;
  }
  const double n = static_cast<double>(preds.size());
  for (int b = 0; b < k_bins; ++b) {
    std::size_t bi = static_cast<std::size_t>(b);
    if (bins[bi].count == 0) continue;
    double cnt = static_cast<double>(bins[bi].count);
    bins[bi].weight = cnt / n;
    bins[bi].accuracy = static_cast<double>(hits[bi]) / cnt;
    bins[bi].confidence = conf_sums[bi].sum() / cnt;
  }
  return bins;
}

double ece(std::span<const double> preds, std::span<const int> labels,
           int k_bins) {
  std::vector<ReliabilityBin> bins = reliability_diagram(preds, labels, k_bins);
  KahanSum total;
  for (const ReliabilityBin& b : bins) {
    if (b.count == 0) continue;
    total.add(b.weight * std::fabs(b.accuracy - b.confidence));
  }
  return total.sum();
}

double brier_score(std::span<const double> preds,
                   std::span<const int> labels) {
  check_same_nonempty(preds.size(), labels.size(), "brier_score");
  KahanSum sum;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw std::invalid_argument("brier_score: labels must be binary");
    }
    double d = static_cast<double>(labels[i]) - preds[i];
    sum.add(d * d);
  }
  return sum.sum() / static_cast<double>(preds.size());
}

std::pair<std::vector<double>, std::vector<int>> select_calibration_subset(
    std::span<const double> preds, std::span<const PreferenceTarget> targets) {
  if (preds.size() != targets.size()) {
    throw std::domain_error("select_calibration_subset: length mismatch");
  }
  std::vector<double> kept;
  std::vector<int> labels;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    VerdictClass v = discretize_target(targets[i]);
    if (v == VerdictClass::Tie) continue;
    kept.push_back(preds[i]);
    labels.push_back(v == VerdictClass::BBetter ? 1 : 0);
  }
  return {std::move(kept), std::move(labels)};
}

double symmetry_deviation(double p_orig, double p_swap) {
  if (!(p_orig >= 0.0 && p_orig <= 1.0) || !(p_swap >= 0.0 && p_swap <= 1.0)) {
    throw std::invalid_argument("symmetry_deviation: inputs must lie in [0, 1]");
  }
  return p_orig + p_swap - 1.0;
}

BiasReport bias_report(std::span<const PredictionRecord> records,
                       double tie_band) {
  if (records.empty()) {
    throw std::domain_error("bias_report: empty input");
  }
  std::ostringstream missing;
  int n_missing = 0;
  for (const PredictionRecord& r : records) {
    if (!r.p_swap) {
      if (n_missing < 10) missing << (n_missing ? ", " : "") << r.id;
      ++n_missing;
    }
  }
  if (n_missing > 0) {
    throw std::domain_error("bias_report: " + std::to_string(n_missing) +
                            " record(s) missing p_swap: " + missing.str());
  }
  BiasReport report;
  report.deviations.reserve(records.size());
  KahanSum abs_sum;
  long consistent = 0;
  for (const PredictionRecord& r : records) {
    double dev = symmetry_deviation(r.p_orig, *r.p_swap);
    report.deviations.push_back(dev);
    abs_sum.add(std::fabs(dev));
    VerdictClass orig = discretize_prediction(r.p_orig, tie_band);
    VerdictClass swapped = discretize_prediction(*r.p_swap, tie_band);
    if (orig == mirror(swapped)) ++consistent;
  }
  report.consistency =
      static_cast<double>(consistent) / static_cast<double>(records.size());
  report.expected_abs_symmetry_deviation =
      abs_sum.sum() / static_cast<double>(records.size());
  return report;
}

double win_rate(std::span<const double> preds) {
  if (preds.empty()) throw std::domain_error("win_rate: empty input");
  KahanSum sum;
  for (double p : preds) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("win_rate: predictions must lie in [0, 1]");
    }
    sum.add(p);
  }
  return sum.sum() / static_cast<double>(preds.size());
}

EvalReport evaluate(std::span<const double> preds,
                    std::span<const PreferenceTarget> targets, double tie_band,
                    int k_bins) {
  check_same_nonempty(preds.size(), targets.size(), "evaluate");
  EvalReport report;
  report.tie_band = tie_band;
  report.bins = k_bins;
  report.n_total = preds.size();
  report.mse = mse_alignment(preds, targets);

  std::vector<VerdictClass> pred_classes;
  std::vector<VerdictClass> target_classes;
  pred_classes.reserve(preds.size());
  target_classes.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pred_classes.push_back(discretize_prediction(preds[i], tie_band));
    target_classes.push_back(discretize_target(targets[i]));
  }
  ConfusionStats stats = confusion_metrics(pred_classes, target_classes);
  report.agreement = stats.agreement;
  report.precision_macro = stats.precision_macro;
  report.recall_macro = stats.recall_macro;
  report.f1_macro = stats.f1_macro;

  auto [cal_preds, cal_labels] = select_calibration_subset(preds, targets);
  report.n_calibration = cal_preds.size();
  if (!cal_preds.empty()) {
    report.ece = ece(cal_preds, cal_labels, k_bins);
    report.brier = brier_score(cal_preds, cal_labels);
  }
  return report;
}

BoxStats box_stats(std::span<const double> values) {
  if (values.empty()) throw std::domain_error("box_stats: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&sorted](double q) {
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
  };
  BoxStats s;
  s.min = sorted.front();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  s.max = sorted.back();
  KahanSum sum;
  for (double v : sorted) sum.add(v);
  s.mean = sum.sum() / static_cast<double>(sorted.size());
  return s;
}

}  // namespace prefcal
