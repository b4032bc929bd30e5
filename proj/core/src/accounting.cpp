#include "tsadapt/accounting.hpp"

#include <sstream>

#include "tsadapt/errors.hpp"
#include "tsadapt/util.hpp"

namespace tsadapt {

namespace {
constexpr double kBytesPerParam = 4.0;  // f32 checkpoint storage
constexpr double kMiB = 1024.0 * 1024.0;
}  // namespace

ParamBudget count_params(const FrozenTransformer& model) {
  ParamBudget b;
  b.trainable = model.trainable_params();
  b.total = model.total_params();
  b.percent = 100.0 * static_cast<double>(b.trainable) /
              static_cast<double>(b.total);
  b.checkpoint_mib = static_cast<double>(b.trainable) * kBytesPerParam / kMiB;
  // Manifest: one name/shape/offset entry per adapter tensor, ~100 B each.
  b.overhead_mib = 4.0 * 100.0 / kMiB;
  return b;
}

double efficiency_score(double trainable_millions, double metric_value) {
  if (metric_value <= 0.0) {
    throw DomainError("efficiency_score: metric must be positive");
  }
  if (trainable_millions <= 0.0) {
    throw DomainError("efficiency_score: trainable count must be positive");
  }
  return (1.0 / metric_value) / trainable_millions;
}

double efficiency_score(const ParamBudget& budget, double metric_value) {
  return efficiency_score(static_cast<double>(budget.trainable) / 1e6,
                          metric_value);
}

std::vector<ParamRow> params_table(const ModelConfig& base,
                                   const std::vector<std::size_t>& horizons,
                                   const std::vector<std::size_t>& ranks,
                                   std::uint64_t seed) {
  std::vector<ParamRow> rows;
  for (std::size_t horizon : horizons) {
    for (std::size_t rank : ranks) {
      ModelConfig cfg = base;
      cfg.horizon = horizon;
      cfg.rank = rank;
      FrozenTransformer model(cfg, seed);
      ParamBudget b = count_params(model);
      rows.push_back(ParamRow{horizon, rank,
                              static_cast<double>(b.trainable) / 1e6,
                              b.percent, b.checkpoint_mib});
    }
  }
  return rows;
}

std::string params_csv(const std::vector<ParamRow>& rows) {
  std::ostringstream os;
  os << "horizon,rank,trainable_M,percent_all,mem_mib\n";
  for (const ParamRow& r : rows) {
    os << r.horizon << "," << r.rank << "," << fmt_double(r.trainable_millions)
       << "," << fmt_double(r.percent) << "," << fmt_double(r.mem_mib) << "\n";
  }
  return os.str();
}

}  // namespace tsadapt
