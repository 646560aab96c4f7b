#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "prefcal/metrics.hpp"
#include "prefcal/rng.hpp"

using namespace prefcal;

namespace {

// Independent oracle: materialize the full 3x3 confusion matrix, then apply
// the macro formulas.
ConfusionStats brute_force_confusion(const std::vector<VerdictClass>& pred,
                                     const std::vector<VerdictClass>& target) {
  auto idx = [](VerdictClass v) {
    if (v == VerdictClass::ABetter) return 0;
    if (v == VerdictClass::Tie) return 1;
    return 2;
  };
  long matrix[3][3] = {};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    matrix[idx(target[i])][idx(pred[i])] += 1;
  }
  ConfusionStats s;
  long diag = 0, total = 0;
  for (int t = 0; t < 3; ++t) {
    for (int p = 0; p < 3; ++p) {
      total += matrix[t][p];
      if (t == p) diag += matrix[t][p];
    }
  }
  s.agreement = static_cast<double>(diag) / static_cast<double>(total);
  double psum = 0, rsum = 0, fsum = 0;
  for (int c = 0; c < 3; ++c) {
    long tp = matrix[c][c];
    long fp = 0, fn = 0;
    for (int o = 0; o < 3; ++o) {
      if (o == c) continue;
      fp += matrix[o][c];
      fn += matrix[c][o];
    }
    psum += (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    rsum += (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    fsum += (2 * tp + fp + fn) > 0
                ? 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn)
                : 0.0;
  }
  s.precision_macro = psum / 3;
  s.recall_macro = rsum / 3;
  s.f1_macro = fsum / 3;
  return s;
}

VerdictClass random_class(Rng& rng) {
  switch (rng.next_u64() % 3) {
    case 0: return VerdictClass::ABetter;
    case 1: return VerdictClass::Tie;
    default: return VerdictClass::BBetter;
  }
}

}  // namespace

TEST_CASE("mse alignment") {
  std::vector<PreferenceTarget> targets{{0.6, 10, 0.024}, {0.6, 10, 0.024}};
  std::vector<double> equal{0.6, 0.6};
  CHECK(mse_alignment(equal, targets) == 0.0);

  std::vector<PreferenceTarget> one{{1.0, 10, 0.0}};
  std::vector<double> zero{0.0};
  CHECK(mse_alignment(zero, one) == 1.0);

  std::vector<double> preds{0.5, 0.7};
  CHECK(mse_alignment(preds, targets) == doctest::Approx(0.01).epsilon(1e-12));

  std::vector<double> short_preds{0.5};
  CHECK_THROWS_AS(mse_alignment(short_preds, targets), std::domain_error);
  CHECK_THROWS_AS(mse_alignment({}, {}), std::domain_error);
}

TEST_CASE("confusion metrics on small hand cases") {
  using V = VerdictClass;
  std::vector<V> perfect{V::ABetter, V::Tie, V::BBetter};
  ConfusionStats s = confusion_metrics(perfect, perfect);
  CHECK(s.agreement == 1.0);
  CHECK(s.f1_macro == 1.0);

  std::vector<V> all_a{V::ABetter, V::ABetter, V::ABetter, V::ABetter};
  std::vector<V> half{V::ABetter, V::ABetter, V::BBetter, V::BBetter};
  ConfusionStats s2 = confusion_metrics(all_a, half);
  ConfusionStats oracle2 = brute_force_confusion(all_a, half);
  CHECK(s2.agreement == 0.5);
  CHECK(s2.agreement == oracle2.agreement);
  CHECK(s2.f1_macro == oracle2.f1_macro);

  std::vector<V> tie_only{V::Tie};
  ConfusionStats s3 = confusion_metrics(tie_only, tie_only);
  CHECK(s3.agreement == 1.0);
  CHECK(s3.f1_macro == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("confusion metrics match the brute-force oracle exactly") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 1 + static_cast<int>(rng.next_u64() % 20);
    std::vector<VerdictClass> pred, target;
    for (int i = 0; i < n; ++i) {
      pred.push_back(random_class(rng));
      target.push_back(random_class(rng));
    }
    ConfusionStats fast = confusion_metrics(pred, target);
    ConfusionStats slow = brute_force_confusion(pred, target);
    CHECK(fast.agreement == slow.agreement);
    CHECK(fast.precision_macro == slow.precision_macro);
    CHECK(fast.recall_macro == slow.recall_macro);
    CHECK(fast.f1_macro == slow.f1_macro);
  }
}

TEST_CASE("ece on hand cases") {
  std::vector<double> sure(5, 1.0);
  std::vector<int> ones(5, 1);
  CHECK(ece(sure, ones, 10) == 0.0);

  std::vector<double> both{0.95, 0.95};
  std::vector<int> labels{1, 0};
  CHECK(ece(both, labels, 10) == doctest::Approx(0.45).epsilon(1e-12));

  CHECK_THROWS_AS(ece(both, labels, 0), std::invalid_argument);
  std::vector<double> p1{0.5};
  std::vector<int> l2{1, 0};
  CHECK_THROWS_AS(ece(p1, l2, 10), std::domain_error);
}

TEST_CASE("reliability bins only populate above one half") {
  std::vector<double> preds{0.05, 0.5, 0.62, 0.93};
  std::vector<int> labels{0, 1, 1, 1};
  std::vector<ReliabilityBin> bins = reliability_diagram(preds, labels, 10);
  REQUIRE(bins.size() == 10);
  for (int b = 0; b < 4; ++b) CHECK(bins[b].count == 0);
  CHECK(bins[4].count == 1);  // conf 0.5 lands in (0.4, 0.5]
  CHECK(bins[6].count == 1);  // 0.62
  CHECK(bins[9].count == 2);  // 0.95 (from 0.05) and 0.93
}

TEST_CASE("a calibrated sampler has vanishing ECE") {
  // p drawn uniform, y ~ Bernoulli(p): E[Y | conf] = conf.
  Rng rng(31415);
  const int n = 50000;
  std::vector<double> preds;
  std::vector<int> labels;
  preds.reserve(n);
  labels.reserve(n);
  for (int i = 0; i < n; ++i) {
    double p = rng.uniform01();
    preds.push_back(p);
    labels.push_back(rng.bernoulli(p));
  }
  CHECK(ece(preds, labels, 10) < 0.01);
  for (const ReliabilityBin& bin : reliability_diagram(preds, labels, 10)) {
    if (bin.count == 0) continue;
    CHECK(std::fabs(bin.accuracy - bin.confidence) < 0.02);
  }
}

TEST_CASE("brier score") {
  std::vector<double> exact{1.0, 0.0, 1.0};
  std::vector<int> labels{1, 0, 1};
  CHECK(brier_score(exact, labels) == 0.0);

  std::vector<double> half(4, 0.5);
  std::vector<int> l4{1, 0, 1, 0};
  CHECK(brier_score(half, l4) == 0.25);

  std::vector<double> one{0.8};
  std::vector<int> zero{0};
  CHECK(brier_score(one, zero) == doctest::Approx(0.64).epsilon(1e-12));
}

TEST_CASE("ece stays within [0, 1] on arbitrary inputs") {
  Rng rng(64);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 1 + static_cast<int>(rng.next_u64() % 200);
    std::vector<double> preds;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      preds.push_back(rng.uniform01());
      labels.push_back(rng.bernoulli(0.3));
    }
    double e = ece(preds, labels, 1 + static_cast<int>(rng.next_u64() % 20));
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
  }
}

TEST_CASE("brier equals alignment MSE when targets are degenerate") {
  // with every p_hat in {0,1} no sample is a tie, the binarized label is
  // p_hat itself, and the two means run over identical terms
  Rng rng(1123);
  std::vector<double> preds;
  std::vector<PreferenceTarget> targets;
  for (int i = 0; i < 100; ++i) {
    preds.push_back(rng.uniform01());
    targets.push_back({rng.bernoulli(0.5) ? 1.0 : 0.0, 10, 0.0});
  }
  auto [cal_preds, cal_labels] = select_calibration_subset(preds, targets);
  REQUIRE(cal_preds.size() == preds.size());
  CHECK(brier_score(cal_preds, cal_labels) == mse_alignment(preds, targets));
  CHECK(brier_score(cal_preds, cal_labels) <= 1.0);
}

TEST_CASE("calibration subset drops ties and binarizes") {
  std::vector<double> preds{0.1, 0.2, 0.3, 0.4, 0.9};
  std::vector<PreferenceTarget> targets{
      {0.5, 10, 0.025}, {0.9, 10, 0.009}, {0.5, 10, 0.025},
      {0.1, 10, 0.009}, {0.8, 10, 0.016}};
  auto [kept, labels] = select_calibration_subset(preds, targets);
  REQUIRE(kept.size() == 3);
  CHECK(kept == std::vector<double>{0.2, 0.4, 0.9});
  CHECK(labels == std::vector<int>{1, 0, 1});

  std::vector<PreferenceTarget> all_tie(2, PreferenceTarget{0.5, 10, 0.025});
  std::vector<double> two{0.3, 0.4};
  CHECK(select_calibration_subset(two, all_tie).first.empty());

  std::vector<PreferenceTarget> no_tie(2, PreferenceTarget{0.7, 10, 0.021});
  CHECK(select_calibration_subset(two, no_tie).first.size() == 2);
}

TEST_CASE("symmetry deviation") {
  CHECK(symmetry_deviation(0.7, 0.3) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(symmetry_deviation(0.8, 0.4) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(symmetry_deviation(0.0, 0.0) == -1.0);
  CHECK(symmetry_deviation(1.0, 1.0) == 1.0);
}

TEST_CASE("symmetry deviation invariances") {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    double a = rng.uniform01();
    double b = rng.uniform01();
    CHECK(symmetry_deviation(a, b) == symmetry_deviation(b, a));
    CHECK(std::fabs(std::fabs(symmetry_deviation(1.0 - b, 1.0 - a)) -
                    std::fabs(symmetry_deviation(a, b))) < 1e-12);
  }
}

TEST_CASE("bias report on a swap-symmetric predictor") {
  Rng rng(55);
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 50; ++i) {
    PredictionRecord r;
    r.id = "r" + std::to_string(i);
    r.p_orig = 0.02 + 0.96 * rng.uniform01();
    r.p_swap = 1.0 - r.p_orig;
    records.push_back(r);
  }
  BiasReport report = bias_report(records, 0.05);
  CHECK(report.consistency == 1.0);
  CHECK(report.expected_abs_symmetry_deviation <= 1e-15);
}

TEST_CASE("bias report on a constant B-leaning predictor") {
  std::vector<PredictionRecord> records(20);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].id = "c" + std::to_string(i);
    records[i].p_orig = 0.6;
    records[i].p_swap = 0.6;
  }
  BiasReport report = bias_report(records, 0.05);
  // both orders say BBetter; mirrored verdicts conflict
  CHECK(report.consistency == 0.0);
  CHECK(report.expected_abs_symmetry_deviation ==
        doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("bias report mean of absolute deviations") {
  std::vector<PredictionRecord> records(2);
  records[0].id = "a";
  records[0].p_orig = 0.45;
  records[0].p_swap = 0.45;  // deviation -0.1
  records[1].id = "b";
  records[1].p_orig = 0.65;
  records[1].p_swap = 0.65;  // deviation +0.3
  BiasReport report = bias_report(records, 0.05);
  CHECK(report.expected_abs_symmetry_deviation ==
        doctest::Approx(0.2).epsilon(1e-12));
  CHECK(report.deviations[0] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(report.deviations[1] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("bias report lists records missing the swapped run") {
  std::vector<PredictionRecord> records(3);
  records[0].id = "ok";
  records[0].p_orig = 0.5;
  records[0].p_swap = 0.5;
  records[1].id = "missing1";
  records[1].p_orig = 0.5;
  records[2].id = "missing2";
  records[2].p_orig = 0.5;
  CHECK_THROWS_WITH_AS(bias_report(records, 0.05),
                       doctest::Contains("missing1"), std::domain_error);
}

TEST_CASE("win rate") {
  std::vector<double> half(7, 0.5);
  CHECK(win_rate(half) == 0.5);
  std::vector<double> pair{1.0, 0.0};
  CHECK(win_rate(pair) == 0.5);
  std::vector<double> one{0.3662};
  CHECK(std::fabs(std::fabs(win_rate(one) - 0.4344) - 0.0682) < 1e-6);
  CHECK_THROWS_AS(win_rate({}), std::domain_error);
}

TEST_CASE("full evaluation pipeline") {
  std::vector<PreferenceTarget> targets{
      {0.9, 10, 0.009}, {0.1, 10, 0.009}, {0.5, 10, 0.025}, {0.8, 10, 0.016}};
  std::vector<double> preds{0.9, 0.1, 0.5, 0.8};
  EvalReport report = evaluate(preds, targets, 0.05, 10);
  CHECK(report.mse == 0.0);
  CHECK(report.agreement == 1.0);
  CHECK(report.n_total == 4);
  CHECK(report.n_calibration == 3);  // one tie skipped
  CHECK(report.brier == doctest::Approx((0.01 + 0.01 + 0.04) / 3.0).epsilon(1e-12));
  CHECK(report.tie_band == 0.05);
  CHECK(report.bins == 10);
}

TEST_CASE("box stats five-number summary") {
  std::vector<double> values{4.0, 1.0, 3.0, 2.0, 5.0};
  BoxStats s = box_stats(values);
  CHECK(s.min == 1.0);
  CHECK(s.q1 == 2.0);
  CHECK(s.median == 3.0);
  CHECK(s.q3 == 4.0);
  CHECK(s.max == 5.0);
  CHECK(s.mean == 3.0);

  std::vector<double> two{0.0, 1.0};
  BoxStats t = box_stats(two);
  CHECK(t.q1 == 0.25);
  CHECK(t.median == 0.5);
  CHECK(t.q3 == 0.75);
  CHECK_THROWS_AS(box_stats({}), std::domain_error);
}
