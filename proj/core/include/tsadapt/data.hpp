#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsadapt/tensor.hpp"

namespace tsadapt {

enum class Frequency { hourly, min15, min10, yearly, quarterly, monthly };

Frequency frequency_from_string(const std::string& s);
std::string frequency_to_string(Frequency f);

/// Prediction length per M-style frequency: yearly 6, quarterly 8,
/// monthly 18. Throws DomainError for high-resolution frequencies.
std::size_t zero_shot_horizon(Frequency f);

/// Multivariate series: T rows, d variables, all values finite.
struct SeriesTable {
  std::string name;
  Frequency frequency = Frequency::hourly;
  std::size_t n_rows = 0;
  std::size_t n_vars = 0;
  std::vector<double> values;  // row-major T×d
  std::vector<std::string> timestamps;  // optional, empty or size T

  double at(std::size_t t, std::size_t v) const {
    return values[t * n_vars + v];
  }
};

struct CsvSchema {
  bool has_header = true;
  /// First column is a timestamp, not a value.
  bool has_timestamp_column = false;
  /// When set, ingestion fails unless the value-column count matches.
  std::optional<std::size_t> expected_columns;
};

SeriesTable load_csv(const std::string& path, const CsvSchema& schema,
                     const std::string& name = "",
                     Frequency frequency = Frequency::hourly);

/// Chronological split by row index: [0, train_end) train,
/// [train_end, val_end) validation, [val_end, T) test.
struct SplitSpec {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  double few_shot_fraction = 1.0;  // applied to train windows only

  static SplitSpec from_ratios(std::size_t n_rows, double train_ratio,
                               double val_ratio);
};

struct Window {
  Tensor input;   // L×d
  Tensor target;  // horizon×d
  std::size_t start = 0;  // index of the first input row in the table
};

struct WindowSet {
  std::vector<Window> windows;
  std::size_t input_length = 0;
  std::size_t horizon = 0;
  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }
};

struct DatasetWindows {
  WindowSet train, val, test;
};

/// Stride-1 (configurable) sliding windows per split; a window's input and
/// target both stay inside its split, so splits never leak into each other.
/// The few-shot fraction keeps the chronologically first windows of train.
DatasetWindows make_windows(const SeriesTable& table, std::size_t input_length,
                            std::size_t horizon, const SplitSpec& split,
                            std::size_t stride = 1);

/// Expected window count for a contiguous segment: len − L − horizon + 1,
/// clamped at zero, then strided.
std::size_t window_count(std::size_t segment_len, std::size_t input_length,
                         std::size_t horizon, std::size_t stride = 1);

/// Cross-dataset evaluation plan: train on the source's train split,
/// evaluate on the target's test split at the frequency's fixed horizon.
struct ZeroShotPlan {
  Frequency frequency;
  std::size_t horizon;
  const SeriesTable* source;
  const SeriesTable* target;
};

std::vector<ZeroShotPlan> zero_shot_pair(
    const std::vector<SeriesTable>& sources,
    const std::vector<SeriesTable>& targets);

enum class SynthKind { multi_sine, trend_season_noise };

struct SynthParams {
  std::vector<double> amplitudes{1.0, 0.5};
  std::vector<double> frequencies{1.0 / 24.0, 1.0 / 96.0};  // cycles per step
  double noise_sigma = 0.05;
  double trend_slope = 0.001;  // trend_season_noise only
};

/// Deterministic synthetic series. Variable j of multi_sine is
/// Σ_k a_k sin(2π f_k t + φ_{jk}) + σ·N(0,1) with seed-derived phases.
SeriesTable synth(SynthKind kind, std::size_t n_rows, std::size_t n_vars,
                  std::uint64_t seed, const SynthParams& params = {},
                  Frequency frequency = Frequency::hourly);

/// Series as CSV (header var0..var{d-1}); inverse of load_csv for synth.
std::string series_to_csv(const SeriesTable& table);

}  // namespace tsadapt
