// Command-line front end: train/eval runs, rank sweeps, the rank-stability
// experiment, zero-shot transfer plans, parameter accounting, and synthetic
// dataset generation.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "tsadapt/accounting.hpp"
#include "tsadapt/adapter.hpp"
#include "tsadapt/checkpoint.hpp"
#include "tsadapt/data.hpp"
#include "tsadapt/errors.hpp"
#include "tsadapt/experiment.hpp"
#include "tsadapt/util.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSpecInvalid = 2;
constexpr int kExitNumeric = 3;

tsadapt::ExperimentSpec load_spec(const std::string& spec_path,
                                  const std::string& out_dir,
                                  std::uint64_t seed_override,
                                  unsigned threads) {
  tsadapt::ExperimentSpec spec =
      tsadapt::ExperimentSpec::from_json_file(spec_path);
  if (!out_dir.empty()) spec.out_dir = out_dir;
  if (seed_override != 0) spec.seeds = {seed_override};
  if (threads != 0) spec.train.threads = threads;
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rank-stabilized low-rank adaptation for time-series tasks"};
  app.require_subcommand(1);

  std::string spec_path, out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  app.add_option("--spec", spec_path, "experiment spec file (JSON)");
  app.add_option("--out", out_dir, "output directory (overrides spec)");
  app.add_option("--seed", seed, "single-seed override");
  app.add_option("--threads", threads, "worker threads");

  CLI::App* cmd_train = app.add_subcommand("train", "train and evaluate");
  CLI::App* cmd_eval =
      app.add_subcommand("eval", "evaluate a saved adapter checkpoint");
  std::string ckpt_path;
  cmd_eval->add_option("--ckpt", ckpt_path, "adapter checkpoint path");

  CLI::App* cmd_sweep =
      app.add_subcommand("rank-sweep", "one train/eval per rank in the spec");

  CLI::App* cmd_stab =
      app.add_subcommand("stability", "rank-stability moment experiment");
  tsadapt::StabilizationConfig stab;
  stab.ranks = {4, 16, 64, 256};
  cmd_stab->add_option("--ranks", stab.ranks, "ranks to test");
  cmd_stab->add_option("--gammas", stab.gammas, "scaling exponents");
  cmd_stab->add_option("--moment-order", stab.moment_order, "moment order n");
  cmd_stab->add_option("--steps", stab.steps, "SGD steps");
  cmd_stab->add_option("--eta", stab.learning_rate, "learning rate");
  cmd_stab->add_option("--stability-seeds", stab.seeds, "Monte-Carlo seeds");
  cmd_stab->add_option("--dim", stab.dim, "adapter dimension d = d'");

  CLI::App* cmd_zero =
      app.add_subcommand("zero-shot", "cross-dataset transfer evaluation");
  std::vector<std::string> src_paths, tgt_paths, src_freqs, tgt_freqs;
  cmd_zero->add_option("--source", src_paths, "source CSV path(s)");
  cmd_zero->add_option("--source-freq", src_freqs, "source frequency per path");
  cmd_zero->add_option("--target", tgt_paths, "target CSV path(s)");
  cmd_zero->add_option("--target-freq", tgt_freqs, "target frequency per path");

  CLI::App* cmd_params =
      app.add_subcommand("params", "parameter/memory table without training");
  std::vector<std::size_t> horizons{96};
  cmd_params->add_option("--horizons", horizons, "horizons to tabulate");

  CLI::App* cmd_synth =
      app.add_subcommand("synth", "write a synthetic dataset CSV");
  std::string synth_kind = "multi-sine";
  std::size_t synth_rows = 4000, synth_vars = 3;
  std::uint64_t synth_seed = 7;
  std::string synth_out = "synth.csv";
  cmd_synth->add_option("--kind", synth_kind, "multi-sine | trend-season-noise");
  cmd_synth->add_option("--rows", synth_rows, "number of time steps");
  cmd_synth->add_option("--vars", synth_vars, "number of variables");
  cmd_synth->add_option("--synth-seed", synth_seed, "generator seed");
  cmd_synth->add_option("--file", synth_out, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_train->parsed()) {
      auto spec = load_spec(spec_path, out_dir, seed, threads);
      tsadapt::RunRecord record = tsadapt::cmd_train(spec);
      std::cout << "run " << spec.out_dir << " done, mean metrics:\n";
      for (const auto& [name, v] : record.mean_metrics.values) {
        std::cout << "  " << name << " = "
                  << (v.defined ? tsadapt::fmt_double(v.value) : "undefined")
                  << "\n";
      }
      return kExitOk;
    }
    if (cmd_eval->parsed()) {
      auto spec = load_spec(spec_path, out_dir, seed, threads);
      spec.train.epochs = 0;  // evaluation only
      if (ckpt_path.empty()) ckpt_path = spec.out_dir + "/adapters.ckpt";
      spec.validate();
      tsadapt::DatasetWindows data = tsadapt::materialize_dataset(spec);
      tsadapt::ModelConfig cfg = spec.model;
      cfg.rank = spec.ranks.front();
      tsadapt::FrozenTransformer model(cfg, spec.seeds.front());
      tsadapt::load_adapters(ckpt_path, model);
      const tsadapt::WindowSet& eval_set =
          data.test.empty() ? data.val : data.test;
      std::cout << "test mse = "
                << tsadapt::fmt_double(model.evaluate_mse(eval_set)) << "\n";
      return kExitOk;
    }
    if (cmd_sweep->parsed()) {
      auto spec = load_spec(spec_path, out_dir, seed, threads);
      tsadapt::RankSweepResult result = tsadapt::cmd_rank_sweep(spec);
      tsadapt::write_file(spec.out_dir + "/rank_sweep.csv", result.to_csv());
      std::cout << result.to_csv();
      if (result.saturation_rank) {
        std::cout << "saturation rank: " << *result.saturation_rank << "\n";
      }
      return kExitOk;
    }
    if (cmd_stab->parsed()) {
      if (stab.seeds == 0) {
        throw tsadapt::ValidationError("stability: seeds must be positive");
      }
      stab.threads = threads ? threads : 1;
      auto rows = tsadapt::stability_experiment(stab);
      const std::string csv = tsadapt::stability_csv(rows);
      const std::string path =
          (out_dir.empty() ? std::string("stability") : out_dir) +
          "/stability.csv";
      tsadapt::write_file(path, csv);
      std::cout << csv;
      return kExitOk;
    }
    if (cmd_zero->parsed()) {
      auto spec = load_spec(spec_path, out_dir, seed, threads);
      if (src_paths.size() != src_freqs.size() ||
          tgt_paths.size() != tgt_freqs.size() || src_paths.empty() ||
          tgt_paths.empty()) {
        throw tsadapt::ValidationError(
            "zero-shot: need matching --source/--source-freq and "
            "--target/--target-freq lists");
      }
      tsadapt::CsvSchema schema;
      schema.has_header = spec.dataset.has_header;
      std::vector<tsadapt::SeriesTable> sources, targets;
      for (std::size_t i = 0; i < src_paths.size(); ++i) {
        sources.push_back(tsadapt::load_csv(
            src_paths[i], schema, "",
            tsadapt::frequency_from_string(src_freqs[i])));
      }
      for (std::size_t i = 0; i < tgt_paths.size(); ++i) {
        targets.push_back(tsadapt::load_csv(
            tgt_paths[i], schema, "",
            tsadapt::frequency_from_string(tgt_freqs[i])));
      }
      tsadapt::ZeroShotResult result =
          tsadapt::cmd_zero_shot(spec, sources, targets);
      tsadapt::write_file(spec.out_dir + "/zero_shot.csv", result.to_csv());
      std::cout << result.to_csv();
      if (result.target_updates != 0) {
        std::cerr << "zero-shot purity violated: " << result.target_updates
                  << " updates on target data\n";
        return kExitNumeric;
      }
      return kExitOk;
    }
    if (cmd_params->parsed()) {
      auto spec = load_spec(spec_path, out_dir, seed, threads);
      spec.validate();
      auto rows = tsadapt::params_table(spec.model, horizons, spec.ranks,
                                        spec.seeds.front());
      const std::string csv = tsadapt::params_csv(rows);
      tsadapt::write_file(spec.out_dir + "/params.csv", csv);
      std::cout << csv;
      return kExitOk;
    }
    if (cmd_synth->parsed()) {
      tsadapt::SynthKind kind = synth_kind == "multi-sine"
                                    ? tsadapt::SynthKind::multi_sine
                                    : tsadapt::SynthKind::trend_season_noise;
      tsadapt::SeriesTable table =
          tsadapt::synth(kind, synth_rows, synth_vars, synth_seed);
      tsadapt::write_file(synth_out, tsadapt::series_to_csv(table));
      std::cout << "wrote " << synth_out << " (" << table.n_rows << "x"
                << table.n_vars << ")\n";
      return kExitOk;
    }
  } catch (const tsadapt::ValidationError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return kExitSpecInvalid;
  } catch (const tsadapt::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
