#pragma once

#include <vector>

#include "retfuse/errors.hpp"

namespace retfuse::eval {

// Raised when a metric is undefined for the given class balance.
struct UndefinedMetric : DataError {
  using DataError::DataError;
};

// Mann-Whitney statistic via rank sums with midrank tie handling:
// (#concordant + 0.5 #tied) / (n_pos * n_neg). O(n log n).
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Area under the precision-recall step curve; descending-score thresholds
// with tied scores processed as one block (average-precision form).
double auprc(const std::vector<double>& scores, const std::vector<int>& labels);

// Max sensitivity among thresholds with specificity >= target; thresholds
// enumerated at distinct scores plus +/- infinity; classifier is score >= t.
double sensitivity_at_specificity(const std::vector<double>& scores,
                                  const std::vector<int>& labels, double target_specificity);

struct RocPoint {
  double threshold;
  double tpr;
  double fpr;
};
struct PrPoint {
  double threshold;
  double precision;
  double recall;
};

std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels);
std::vector<PrPoint> pr_points(const std::vector<double>& scores, const std::vector<int>& labels);

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;        // sample standard deviation (n-1)
  bool single_run = false;  // SD reported as 0 with this flag set
};

Aggregate aggregate_runs(const std::vector<double>& values);

}  // namespace retfuse::eval
