#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsadapt/accounting.hpp"
#include "tsadapt/adapter.hpp"
#include "tsadapt/backbone.hpp"
#include "tsadapt/data.hpp"
#include "tsadapt/metrics.hpp"

namespace tsadapt {

struct DatasetSpec {
  std::string kind = "synth";  // synth | csv
  // csv
  std::string path;
  bool has_header = true;
  bool has_timestamp_column = false;
  Frequency frequency = Frequency::hourly;
  // synth
  SynthKind synth_kind = SynthKind::multi_sine;
  std::size_t n_rows = 4000;
  std::size_t n_vars = 3;
  std::uint64_t synth_seed = 7;
  SynthParams synth_params;
  // windowing
  double train_ratio = 0.7;
  double val_ratio = 0.1;
  double few_shot_fraction = 1.0;
  std::size_t stride = 1;
};

struct ExperimentSpec {
  DatasetSpec dataset;
  ModelConfig model;
  std::vector<std::size_t> ranks{16};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  TrainOptions train;
  std::string out_dir = "runs/default";

  /// Parses a spec file; unknown keys are validation errors, every
  /// violation is listed in the thrown message.
  static ExperimentSpec from_json_file(const std::string& path);
  static ExperimentSpec from_json_text(const std::string& text);

  /// Canonical JSON (sorted keys), the input to spec_hash.
  std::string canonical_json() const;
  /// FNV-1a over the canonical form: stable under field reordering.
  std::uint64_t spec_hash() const;

  /// Throws ValidationError listing all violations. With strict_ranks off,
  /// ranks beyond the adapter dimension cap pass here and surface as
  /// per-rank failures in the sweep instead.
  void validate(bool strict_ranks = true) const;
};

struct SeedResult {
  std::uint64_t seed;
  std::vector<EpochLog> epochs;
  MetricReport test_metrics;
};

struct RunRecord {
  std::uint64_t spec_hash;
  std::vector<SeedResult> per_seed;
  MetricReport mean_metrics;  // arithmetic mean over seeds, defined only
  ParamBudget budget;
  double wall_clock_seconds = 0.0;

  std::string to_json() const;
};

/// Builds windows for the spec's dataset (loads or synthesizes it).
DatasetWindows materialize_dataset(const ExperimentSpec& spec);

/// Trains per seed, reports per-seed and mean metrics, writes
/// record.json, metrics.csv, and adapters.ckpt under out_dir.
RunRecord cmd_train(const ExperimentSpec& spec);

struct RankSweepRow {
  std::size_t rank;
  std::size_t params;
  double mem_mib;
  double mse = 0.0;
  double mae = 0.0;
  bool failed = false;
  std::string error;
};

struct RankSweepResult {
  std::vector<RankSweepRow> rows;
  std::optional<std::size_t> saturation_rank;  // smallest rank within 5% of best
  std::string to_csv() const;
};

RankSweepResult cmd_rank_sweep(const ExperimentSpec& spec);

struct ZeroShotRow {
  std::string frequency;
  std::size_t horizon;
  MetricValue smape;
};

struct ZeroShotResult {
  std::vector<ZeroShotRow> rows;
  MetricValue average;
  /// Gradient-update count observed on target data; must stay 0.
  std::uint64_t target_updates = 0;
  std::string to_csv() const;
};

/// Trains on each source table's train split, evaluates on the matching-
/// frequency target's test split with zero gradient updates on it.
ZeroShotResult cmd_zero_shot(const ExperimentSpec& spec,
                             const std::vector<SeriesTable>& sources,
                             const std::vector<SeriesTable>& targets);

/// Writes text to path, creating parent directories.
void write_file(const std::string& path, const std::string& text);

}  // namespace tsadapt
