#pragma once

#include <optional>
#include <string>
#include <vector>

namespace nilmbench {

// Mean absolute per-timestep error, watts.
double mae(const std::vector<double>& pred, const std::vector<double>& truth);

// |sum(pred) - sum(truth)| / sum(truth). Undefined when sum(truth) == 0.
std::optional<double> sae(const std::vector<double>& pred, const std::vector<double>& truth);

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool no_positives = false;  // neither series ever crossed the ON threshold
};

// Both series binarized at `threshold` (value > threshold means ON). F1 is 0
// when precision + recall is 0.
F1Result f1_score(const std::vector<double>& pred, const std::vector<double>& truth,
                  double threshold);

inline constexpr double kDefaultOnThresholdWatts = 15.0;

struct ApplianceMetrics {
  std::string name;
  double mae = 0.0;
  std::optional<double> sae;
  F1Result f1;
};

struct MetricsReport {
  double on_threshold_watts = kDefaultOnThresholdWatts;
  std::vector<ApplianceMetrics> appliances;

  double mean_mae() const;
  std::string to_text_table() const;
};

// pred/truth in watts, task-major (n_tasks series of length count each).
MetricsReport evaluate_metrics(const std::vector<double>& pred_watts,
                               const std::vector<double>& truth_watts, int n_tasks,
                               const std::vector<std::string>& names,
                               double threshold = kDefaultOnThresholdWatts);

}  // namespace nilmbench
