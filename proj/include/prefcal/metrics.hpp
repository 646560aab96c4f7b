#ifndef PREFCAL_METRICS_HPP
#define PREFCAL_METRICS_HPP

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "prefcal/core.hpp"

namespace prefcal {

/// Order-independent compensated accumulator for means over large folds.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double sum() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

/// The Table-1 style metric block: alignment (MSE), performance (agreement
/// and macro precision/recall/F1 over the three classes), calibration (ECE
/// and Brier on the tie-free binarized subset).
struct EvalReport {
  double mse = 0.0;
  double agreement = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
  double ece = 0.0;
  double brier = 0.0;
  std::size_t n_total = 0;
  std::size_t n_calibration = 0;
  double tie_band = 0.05;
  int bins = 10;
};

/// Positional-bias metrics from paired original/swapped predictions.
struct BiasReport {
  double consistency = 0.0;
  double expected_abs_symmetry_deviation = 0.0;
  std::vector<double> deviations;  // per item, p_orig + p_swap - 1
};

struct ConfusionStats {
  double agreement = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
};

/// One row of a reliability diagram; conf bins are ((k-1)/K, k/K].
struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double weight = 0.0;
  double accuracy = 0.0;
  double confidence = 0.0;
};

/// Mean squared error between predicted probabilities and target p_hat.
double mse_alignment(std::span<const double> preds,
                     std::span<const PreferenceTarget> targets);

/// Macro metrics over the fixed three classes. A class absent from both
/// predictions and targets contributes 0 to the macro mean; the denominator
/// stays 3 so scores are comparable across datasets.
/// Agreement = sum TP / sum (TP + FN), i.e. plain accuracy.
ConfusionStats confusion_metrics(std::span<const VerdictClass> pred_classes,
                                 std::span<const VerdictClass> target_classes);

/// Expected Calibration Error over k_bins equal-width confidence bins.
/// Predicted label is p >= 0.5 (tie broken toward B); confidence is the
/// predicted-class probability max(p, 1-p), so bins below 0.5 stay empty.
double ece(std::span<const double> preds, std::span<const int> labels,
           int k_bins);

/// The per-bin series behind ece, for plotting.
std::vector<ReliabilityBin> reliability_diagram(std::span<const double> preds,
                                                std::span<const int> labels,
                                                int k_bins);

/// Mean of (y - p)^2 on the raw probability that B is better.
double brier_score(std::span<const double> preds, std::span<const int> labels);

/// Calibration is measured against binary labels only: drops samples whose
/// target discretizes to Tie and binarizes the rest (BBetter -> 1).
std::pair<std::vector<double>, std::vector<int>> select_calibration_subset(
    std::span<const double> preds, std::span<const PreferenceTarget> targets);

/// Symmetry deviation of one pair of orientation runs: p_orig + p_swap - 1.
/// Zero for a swap-symmetric judge; positive indicates bias toward B.
double symmetry_deviation(double p_orig, double p_swap);

/// Consistency (verdict survives swapping, with Tie matching Tie) and the
/// expected absolute symmetry deviation. Every record must carry p_swap;
/// otherwise throws std::domain_error naming the offending ids.
BiasReport bias_report(std::span<const PredictionRecord> records,
                       double tie_band);

/// Monte Carlo win rate: the mean of per-prompt probabilities.
double win_rate(std::span<const double> preds);

/// Full evaluation pipeline for aligned (prediction, target) pairs.
EvalReport evaluate(std::span<const double> preds,
                    std::span<const PreferenceTarget> targets, double tie_band,
                    int k_bins);

/// Five-number summary plus mean, for box-plot style bias reporting.
/// Quartiles use linear interpolation on the sorted sample.
struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
};
BoxStats box_stats(std::span<const double> values);

}  // namespace prefcal

#endif  // PREFCAL_METRICS_HPP
