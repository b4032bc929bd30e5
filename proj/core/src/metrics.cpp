#include "tsadapt/metrics.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

#include "tsadapt/errors.hpp"
#include "tsadapt/util.hpp"

namespace tsadapt {

namespace {

void require_pair(const ForecastPair& p, const char* who) {
  if (p.truth.empty()) throw DomainError(std::string(who) + ": empty series");
  if (p.truth.size() != p.pred.size()) {
    throw DomainError(std::string(who) + ": truth has " +
                      std::to_string(p.truth.size()) + " points, pred has " +
                      std::to_string(p.pred.size()));
  }
}

}  // namespace

double mse(const ForecastPair& p) {
  require_pair(p, "mse");
  double acc = 0.0;
  for (std::size_t n = 0; n < p.truth.size(); ++n) {
    const double e = p.truth[n] - p.pred[n];
    acc += e * e;
  }
  return acc / static_cast<double>(p.truth.size());
}

double mae(const ForecastPair& p) {
  require_pair(p, "mae");
  double acc = 0.0;
  for (std::size_t n = 0; n < p.truth.size(); ++n)
    acc += std::abs(p.truth[n] - p.pred[n]);
  return acc / static_cast<double>(p.truth.size());
}

double smape(const ForecastPair& p) {
  require_pair(p, "smape");
  double acc = 0.0;
  for (std::size_t n = 0; n < p.truth.size(); ++n) {
    const double denom = (std::abs(p.truth[n]) + std::abs(p.pred[n])) / 2.0;
    if (denom > 0.0) acc += std::abs(p.truth[n] - p.pred[n]) / denom;
    // denom == 0 means both values are exactly zero: zero error, zero term.
  }
  return 100.0 * acc / static_cast<double>(p.truth.size());
}

MetricValue mase(const ForecastPair& p) {
  require_pair(p, "mase");
  const std::size_t n = p.truth.size(), m = p.seasonal_period;
  if (m == 0 || n <= m) {
    throw DomainError("mase: need N > m, got N=" + std::to_string(n) +
                      ", m=" + std::to_string(m));
  }
  double naive = 0.0;
  for (std::size_t i = m; i < n; ++i)
    naive += std::abs(p.truth[i] - p.truth[i - m]);
  naive /= static_cast<double>(n - m);
  if (naive == 0.0) {
    return MetricValue::undefined("seasonal-naive denominator is zero");
  }
  return MetricValue::of(mae(p) / naive);
}

MetricValue owa(const ForecastPair& model, const ForecastPair& naive) {
  const double s_model = smape(model), s_naive = smape(naive);
  const MetricValue m_model = mase(model), m_naive = mase(naive);
  if (s_naive <= 0.0) return MetricValue::undefined("naive sMAPE is zero");
  if (!m_naive.defined || m_naive.value <= 0.0) {
    return MetricValue::undefined("naive MASE is zero or undefined");
  }
  if (!m_model.defined) return MetricValue::undefined(m_model.reason);
  return MetricValue::of(
      0.5 * (s_model / s_naive + m_model.value / m_naive.value));
}

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) {
    throw DomainError("classification_metrics: all counts are zero");
  }
  ClassificationMetrics out;
  out.accuracy = MetricValue::of(static_cast<double>(c.tp + c.tn) /
                                 static_cast<double>(c.total()));
  out.precision = (c.tp + c.fp == 0)
                      ? MetricValue::undefined("no positive predictions")
                      : MetricValue::of(static_cast<double>(c.tp) /
                                        static_cast<double>(c.tp + c.fp));
  out.recall = (c.tp + c.fn == 0)
                   ? MetricValue::undefined("no positive labels")
                   : MetricValue::of(static_cast<double>(c.tp) /
                                     static_cast<double>(c.tp + c.fn));
  if (!out.precision.defined || !out.recall.defined) {
    out.f1 = MetricValue::undefined("precision or recall undefined");
  } else if (out.precision.value + out.recall.value == 0.0) {
    out.f1 = MetricValue::undefined("precision + recall is zero");
  } else {
    out.f1 = MetricValue::of(2.0 * out.precision.value * out.recall.value /
                             (out.precision.value + out.recall.value));
  }
  return out;
}

std::vector<double> seasonal_naive_forecast(const std::vector<double>& history,
                                            std::size_t m,
                                            std::size_t horizon) {
  if (m == 0 || history.size() < m) {
    throw DomainError("seasonal_naive_forecast: history shorter than period");
  }
  std::vector<double> out(horizon);
  for (std::size_t h = 0; h < horizon; ++h)
    out[h] = history[history.size() - m + (h % m)];
  return out;
}

std::size_t seasonal_period_for(const std::string& frequency) {
  if (frequency == "yearly") return 1;
  if (frequency == "quarterly") return 4;
  if (frequency == "monthly") return 12;
  throw DomainError("seasonal_period_for: no M-style period for '" +
                    frequency + "'");
}

std::string MetricReport::to_json() const {
  nlohmann::json j;  // object keys sort lexicographically: stable order
  for (const auto& [name, v] : values) {
    if (v.defined) {
      j["metrics"][name] = v.value;
    } else {
      j["metrics"][name] = {{"undefined", v.reason}};
    }
  }
  j["seasonal_period"] = seasonal_period;
  j["naive_baseline"] = naive_baseline;
  return j.dump(2);
}

}  // namespace tsadapt
