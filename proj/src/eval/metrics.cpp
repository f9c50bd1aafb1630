#include "retfuse/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace retfuse::eval {

namespace {

void count_classes(const std::vector<double>& scores, const std::vector<int>& labels,
                   std::size_t& n_pos, std::size_t& n_neg) {
  if (scores.size() != labels.size()) throw DataError("metric: score/label size mismatch");
  n_pos = n_neg = 0;
  for (int y : labels) {
    if (y == 1)
      ++n_pos;
    else if (y == 0)
      ++n_neg;
    else
      throw DataError("metric: labels must be 0 or 1");
  }
}

std::vector<std::size_t> order_by_score_desc(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::size_t n_pos = 0, n_neg = 0;
  count_classes(scores, labels, n_pos, n_neg);
  if (n_pos == 0 || n_neg == 0)
    throw UndefinedMetric("auroc undefined: needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  const std::size_t n = scores.size();
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum += midrank;
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::size_t n_pos = 0, n_neg = 0;
  count_classes(scores, labels, n_pos, n_neg);
  if (n_pos == 0) throw UndefinedMetric("auprc undefined: no positive samples");

  const auto order = order_by_score_desc(scores);
  const double total_pos = static_cast<double>(n_pos);
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, area = 0.0;
  std::size_t i = 0;
  const std::size_t n = scores.size();
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1)
        tp += 1.0;
      else
        fp += 1.0;
    }
    const double recall = tp / total_pos;
    const double precision = tp / (tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double sensitivity_at_specificity(const std::vector<double>& scores,
                                  const std::vector<int>& labels, double target_specificity) {
  std::size_t n_pos = 0, n_neg = 0;
  count_classes(scores, labels, n_pos, n_neg);
  if (n_pos == 0 || n_neg == 0)
    throw UndefinedMetric("sensitivity@specificity undefined: needs both classes");

  std::vector<double> thresholds(scores);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  double best_sens = 0.0;
  bool found = false;
  for (double t : thresholds) {
    std::size_t tp = 0, tn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool predicted_pos = scores[i] >= t;
      if (labels[i] == 1 && predicted_pos) ++tp;
      if (labels[i] == 0 && !predicted_pos) ++tn;
    }
    const double spec = static_cast<double>(tn) / static_cast<double>(n_neg);
    if (spec >= target_specificity) {
      const double sens = static_cast<double>(tp) / static_cast<double>(n_pos);
      if (!found || sens > best_sens) best_sens = sens;
      found = true;
    }
  }
  return best_sens;  // threshold +inf always qualifies, so found is true
}

std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
  std::size_t n_pos = 0, n_neg = 0;
  count_classes(scores, labels, n_pos, n_neg);
  std::vector<double> thresholds(scores);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());

  std::vector<RocPoint> points;
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        if (labels[i] == 1)
          ++tp;
        else
          ++fp;
      }
    }
    points.push_back({t, n_pos ? static_cast<double>(tp) / static_cast<double>(n_pos) : 0.0,
                      n_neg ? static_cast<double>(fp) / static_cast<double>(n_neg) : 0.0});
  }
  return points;
}

std::vector<PrPoint> pr_points(const std::vector<double>& scores,
                               const std::vector<int>& labels) {
  std::size_t n_pos = 0, n_neg = 0;
  count_classes(scores, labels, n_pos, n_neg);
  const auto order = order_by_score_desc(scores);
  std::vector<PrPoint> points;
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  const std::size_t n = scores.size();
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1)
        tp += 1.0;
      else
        fp += 1.0;
    }
    points.push_back({scores[order[i]], tp / (tp + fp),
                      n_pos ? tp / static_cast<double>(n_pos) : 0.0});
    i = j;
  }
  return points;
}

Aggregate aggregate_runs(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("aggregate_runs: empty list");
  Aggregate agg;
  double sum = 0.0;
  for (double v : values) sum += v;
  agg.mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) {
    agg.sd = 0.0;
    agg.single_run = true;
    return agg;
  }
  const bool all_equal =
      std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; });
  if (all_equal) {
    agg.mean = values[0];
    agg.sd = 0.0;
    return agg;
  }
  double sq = 0.0;
  for (double v : values) sq += (v - agg.mean) * (v - agg.mean);
  agg.sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
  return agg;
}

}  // namespace retfuse::eval
