#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace tsadapt {

/// A metric value that may be undefined (degenerate denominator). Undefined
/// values carry a reason and are skipped by aggregation instead of
/// poisoning it with NaN.
struct MetricValue {
  double value = 0.0;
  bool defined = true;
  std::string reason;  // set when !defined

  static MetricValue undefined(std::string why) {
    return MetricValue{0.0, false, std::move(why)};
  }
  static MetricValue of(double v) { return MetricValue{v, true, {}}; }
};

struct ForecastPair {
  std::vector<double> truth;
  std::vector<double> pred;
  std::size_t seasonal_period = 1;  // m, MASE only
};

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

double mse(const ForecastPair& p);
double mae(const ForecastPair& p);
/// 100/N · Σ |Y−ŷ| / ((|Y|+|ŷ|)/2); a term with both values exactly zero
/// contributes 0.
double smape(const ForecastPair& p);
/// MAE scaled by the seasonal-naive in-sample mean absolute difference.
/// Undefined when the truth is m-periodic (zero denominator).
MetricValue mase(const ForecastPair& p);
/// Half-sum of model/naive ratios of sMAPE and MASE.
MetricValue owa(const ForecastPair& model, const ForecastPair& naive);

struct ClassificationMetrics {
  MetricValue accuracy, precision, recall, f1;
};
ClassificationMetrics classification_metrics(const ConfusionCounts& c);

/// Seasonal-naive forecast for OWA's reference: repeats the last observed
/// cycle of `history` over `horizon` steps.
std::vector<double> seasonal_naive_forecast(const std::vector<double>& history,
                                            std::size_t m, std::size_t horizon);

/// Seasonal period per M-style frequency name (yearly 1, quarterly 4,
/// monthly 12).
std::size_t seasonal_period_for(const std::string& frequency);

/// Named metrics plus the configuration that produced them.
struct MetricReport {
  std::map<std::string, MetricValue> values;  // stable (sorted) key order
  std::size_t seasonal_period = 1;
  std::string naive_baseline = "seasonal-naive";

  void set(const std::string& name, MetricValue v) { values[name] = v; }
  /// JSON with stable key order; undefined metrics serialize as
  /// {"undefined": reason}.
  std::string to_json() const;
};

}  // namespace tsadapt
