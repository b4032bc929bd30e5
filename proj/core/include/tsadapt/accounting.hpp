#pragma once

#include <string>
#include <vector>

#include "tsadapt/backbone.hpp"

namespace tsadapt {

struct ParamBudget {
  std::size_t trainable = 0;
  std::size_t total = 0;
  double percent = 0.0;        // 100 · trainable / total
  double checkpoint_mib = 0.0; // raw f32 tensor bytes / 2^20
  double overhead_mib = 0.0;   // manifest/container bytes, reported separately
};

ParamBudget count_params(const FrozenTransformer& model);

/// (1/metric) / (trainable in millions). Throws DomainError for
/// non-positive inputs.
double efficiency_score(const ParamBudget& budget, double metric_value);
double efficiency_score(double trainable_millions, double metric_value);

struct ParamRow {
  std::size_t horizon;
  std::size_t rank;
  double trainable_millions;
  double percent;
  double mem_mib;
};

/// Budget table across (horizon, rank) without training anything:
/// columns horizon, rank, trainable_M, percent_all, mem_mib.
std::vector<ParamRow> params_table(const ModelConfig& base,
                                   const std::vector<std::size_t>& horizons,
                                   const std::vector<std::size_t>& ranks,
                                   std::uint64_t seed);
std::string params_csv(const std::vector<ParamRow>& rows);

}  // namespace tsadapt
