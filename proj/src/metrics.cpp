#include "nilmbench/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace nilmbench {

double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw std::invalid_argument("mae: size mismatch or empty input");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - truth[i]);
  return acc / static_cast<double>(pred.size());
}

std::optional<double> sae(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw std::invalid_argument("sae: size mismatch or empty input");
  }
  double sum_pred = 0.0;
  double sum_truth = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sum_pred += pred[i];
    sum_truth += truth[i];
  }
  if (sum_truth <= 0.0) return std::nullopt;
  return std::abs(sum_pred - sum_truth) / sum_truth;
}

F1Result f1_score(const std::vector<double>& pred, const std::vector<double>& truth,
                  double threshold) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw std::invalid_argument("f1_score: size mismatch or empty input");
  }
  long tp = 0;
  long fp = 0;
  long fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] > threshold;
    const bool t = truth[i] > threshold;
    if (p && t) ++tp;
    else if (p && !t) ++fp;
    else if (!p && t) ++fn;
  }
  F1Result r;
  r.no_positives = (tp + fp + fn) == 0;
  r.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double pr = r.precision + r.recall;
  r.f1 = pr > 0.0 ? 2.0 * r.precision * r.recall / pr : 0.0;
  return r;
}

double MetricsReport::mean_mae() const {
  if (appliances.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& a : appliances) acc += a.mae;
  return acc / static_cast<double>(appliances.size());
}

std::string MetricsReport::to_text_table() const {
  std::string out = "appliance               MAE(W)      SAE     prec   recall       F1\n";
  char line[160];
  for (const auto& a : appliances) {
    if (a.sae) {
      std::snprintf(line, sizeof(line), "%-20s %9.3f %8.4f %8.4f %8.4f %8.4f\n", a.name.c_str(),
                    a.mae, *a.sae, a.f1.precision, a.f1.recall, a.f1.f1);
    } else {
      std::snprintf(line, sizeof(line), "%-20s %9.3f %8s %8.4f %8.4f %8.4f\n", a.name.c_str(),
                    a.mae, "n/a", a.f1.precision, a.f1.recall, a.f1.f1);
    }
    out += line;
  }
  return out;
}

MetricsReport evaluate_metrics(const std::vector<double>& pred_watts,
                               const std::vector<double>& truth_watts, int n_tasks,
                               const std::vector<std::string>& names, double threshold) {
  if (n_tasks < 1 || pred_watts.size() != truth_watts.size() ||
      pred_watts.size() % static_cast<std::size_t>(n_tasks) != 0) {
    throw std::invalid_argument("evaluate_metrics: inconsistent sizes");
  }
  const std::size_t count = pred_watts.size() / static_cast<std::size_t>(n_tasks);
  MetricsReport report;
  report.on_threshold_watts = threshold;
  for (int t = 0; t < n_tasks; ++t) {
    std::vector<double> p(pred_watts.begin() + t * count, pred_watts.begin() + (t + 1) * count);
    std::vector<double> y(truth_watts.begin() + t * count,
                          truth_watts.begin() + (t + 1) * count);
    ApplianceMetrics m;
    m.name = t < static_cast<int>(names.size()) ? names[t] : "task_" + std::to_string(t);
    m.mae = mae(p, y);
    m.sae = sae(p, y);
    m.f1 = f1_score(p, y, threshold);
    report.appliances.push_back(std::move(m));
  }
  return report;
}

}  // namespace nilmbench
