#pragma once

#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace raw {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = std::numeric_limits<double>::infinity();  // score >= threshold is positive
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double auc = 0.0;
  double tpr_at_fpr0 = 0.0;  // largest TPR among points with FPR 0
  double fpr_at_tpr1 = 1.0;  // smallest FPR among points with TPR 1
};

/// ROC over every distinct score threshold. AUC is the trapezoidal area,
/// which equals the Mann-Whitney statistic with ties counted 1/2.
RocCurve roc_auc(std::span<const double> positive, std::span<const double> negative);

/// Trapezoidal area under an ordered list of points.
double trapezoid_auc(std::span<const RocPoint> points);

/// One-sided sign-test p-value: P[Binomial(trials, 1/2) >= successes].
double sign_test_p(int successes, int trials);

/// fpr,tpr,threshold rows.
std::string roc_points_csv(const RocCurve& roc);
std::vector<RocPoint> parse_roc_points_csv(std::string_view csv);

}  // namespace raw
