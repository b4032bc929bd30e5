#include "tsadapt/experiment.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tsadapt/checkpoint.hpp"
#include "tsadapt/errors.hpp"
#include "tsadapt/util.hpp"

namespace tsadapt {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& ctx, std::vector<std::string>& errors) {
  if (!j.is_object()) {
    errors.push_back(ctx + ": expected an object");
    return;
  }
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) {
      errors.push_back(ctx + ": unknown key '" + key + "'");
    }
  }
}

HeadKind head_kind_from(const std::string& s) {
  if (s == "forecast") return HeadKind::forecast;
  if (s == "classify") return HeadKind::classify;
  throw ValidationError("model.head_kind: unknown value '" + s + "'");
}

LossKind loss_from(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "smape") return LossKind::smape;
  if (s == "cross-entropy") return LossKind::cross_entropy;
  throw ValidationError("train.loss: unknown value '" + s + "'");
}

std::string loss_to(LossKind k) {
  switch (k) {
    case LossKind::mse: return "mse";
    case LossKind::smape: return "smape";
    case LossKind::cross_entropy: return "cross-entropy";
  }
  return "?";
}

Optimizer optimizer_from(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam") return Optimizer::adam;
  throw ValidationError("train.optimizer: unknown value '" + s + "'");
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("spec: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

ExperimentSpec ExperimentSpec::from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ValidationError("spec: not valid JSON");

  std::vector<std::string> errors;
  check_keys(j, {"dataset", "model", "ranks", "seeds", "train", "out_dir"},
             "spec", errors);

  ExperimentSpec spec;
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    check_keys(d,
               {"kind", "path", "has_header", "has_timestamp_column",
                "frequency", "synth_kind", "n_rows", "n_vars", "synth_seed",
                "amplitudes", "frequencies", "noise_sigma", "trend_slope",
                "train_ratio", "val_ratio", "few_shot_fraction", "stride"},
               "dataset", errors);
    DatasetSpec& ds = spec.dataset;
    ds.kind = d.value("kind", ds.kind);
    ds.path = d.value("path", ds.path);
    ds.has_header = d.value("has_header", ds.has_header);
    ds.has_timestamp_column =
        d.value("has_timestamp_column", ds.has_timestamp_column);
    if (d.contains("frequency"))
      ds.frequency = frequency_from_string(d["frequency"]);
    if (d.contains("synth_kind")) {
      const std::string k = d["synth_kind"];
      if (k == "multi-sine") ds.synth_kind = SynthKind::multi_sine;
      else if (k == "trend-season-noise") ds.synth_kind = SynthKind::trend_season_noise;
      else errors.push_back("dataset.synth_kind: unknown value '" + k + "'");
    }
    ds.n_rows = d.value("n_rows", ds.n_rows);
    ds.n_vars = d.value("n_vars", ds.n_vars);
    ds.synth_seed = d.value("synth_seed", ds.synth_seed);
    if (d.contains("amplitudes"))
      ds.synth_params.amplitudes = d["amplitudes"].get<std::vector<double>>();
    if (d.contains("frequencies"))
      ds.synth_params.frequencies = d["frequencies"].get<std::vector<double>>();
    ds.synth_params.noise_sigma =
        d.value("noise_sigma", ds.synth_params.noise_sigma);
    ds.synth_params.trend_slope =
        d.value("trend_slope", ds.synth_params.trend_slope);
    ds.train_ratio = d.value("train_ratio", ds.train_ratio);
    ds.val_ratio = d.value("val_ratio", ds.val_ratio);
    ds.few_shot_fraction = d.value("few_shot_fraction", ds.few_shot_fraction);
    ds.stride = d.value("stride", ds.stride);
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m,
               {"layers", "heads", "hidden_dim", "patch_size", "input_length",
                "label_length", "horizon", "n_vars", "head_kind", "n_classes",
                "alpha", "sigma_x"},
               "model", errors);
    ModelConfig& c = spec.model;
    c.layers = m.value("layers", c.layers);
    c.heads = m.value("heads", c.heads);
    c.hidden_dim = m.value("hidden_dim", c.hidden_dim);
    c.patch_size = m.value("patch_size", c.patch_size);
    c.input_length = m.value("input_length", c.input_length);
    c.label_length = m.value("label_length", c.label_length);
    c.horizon = m.value("horizon", c.horizon);
    c.n_vars = m.value("n_vars", c.n_vars);
    if (m.contains("head_kind")) c.head_kind = head_kind_from(m["head_kind"]);
    c.n_classes = m.value("n_classes", c.n_classes);
    c.alpha = m.value("alpha", c.alpha);
    c.sigma_x = m.value("sigma_x", c.sigma_x);
  }
  if (j.contains("ranks"))
    spec.ranks = j["ranks"].get<std::vector<std::size_t>>();
  if (j.contains("seeds"))
    spec.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t,
               {"loss", "optimizer", "learning_rate", "batch_size", "epochs",
                "threads"},
               "train", errors);
    TrainOptions& o = spec.train;
    if (t.contains("loss")) o.loss = loss_from(t["loss"]);
    if (t.contains("optimizer")) o.optimizer = optimizer_from(t["optimizer"]);
    o.learning_rate = t.value("learning_rate", o.learning_rate);
    o.batch_size = t.value("batch_size", o.batch_size);
    o.epochs = t.value("epochs", o.epochs);
    o.threads = t.value("threads", o.threads);
  }
  spec.out_dir = j.value("out_dir", spec.out_dir);

  if (!errors.empty()) {
    std::string msg = "spec validation failed:";
    for (const std::string& e : errors) msg += "\n  - " + e;
    throw ValidationError(msg);
  }
  return spec;
}

void ExperimentSpec::validate(bool strict_ranks) const {
  std::vector<std::string> errors;
  try {
    model.validate();
  } catch (const ValidationError& e) {
    errors.push_back(e.what());
  }
  if (ranks.empty()) errors.push_back("ranks: list must be nonempty");
  const std::size_t head_in = model.head_kind == HeadKind::forecast
                                  ? model.n_tokens() * model.hidden_dim
                                  : model.hidden_dim;
  const std::size_t max_rank =
      std::min({model.hidden_dim, model.token_dim(), model.head_out(), head_in});
  for (std::size_t r : ranks) {
    if (r == 0 || (strict_ranks && r > max_rank)) {
      errors.push_back("ranks: rank " + std::to_string(r) +
                       " outside [1, " + std::to_string(max_rank) + "]");
    }
  }
  if (seeds.empty()) errors.push_back("seeds: list must be nonempty");
  if (dataset.kind != "synth" && dataset.kind != "csv") {
    errors.push_back("dataset.kind: must be 'synth' or 'csv'");
  }
  if (dataset.kind == "csv" && !std::filesystem::exists(dataset.path)) {
    errors.push_back("dataset.path: file '" + dataset.path + "' not found");
  }
  if (dataset.few_shot_fraction <= 0.0 || dataset.few_shot_fraction > 1.0) {
    errors.push_back("dataset.few_shot_fraction: must be in (0, 1]");
  }
  if (!errors.empty()) {
    std::string msg = "spec validation failed:";
    for (const std::string& e : errors) msg += "\n  - " + e;
    throw ValidationError(msg);
  }
}

std::string ExperimentSpec::canonical_json() const {
  json j;  // nlohmann objects are key-sorted: canonical by construction
  j["dataset"] = {
      {"kind", dataset.kind},
      {"path", dataset.path},
      {"has_header", dataset.has_header},
      {"has_timestamp_column", dataset.has_timestamp_column},
      {"frequency", frequency_to_string(dataset.frequency)},
      {"synth_kind",
       dataset.synth_kind == SynthKind::multi_sine ? "multi-sine"
                                                   : "trend-season-noise"},
      {"n_rows", dataset.n_rows},
      {"n_vars", dataset.n_vars},
      {"synth_seed", dataset.synth_seed},
      {"amplitudes", dataset.synth_params.amplitudes},
      {"frequencies", dataset.synth_params.frequencies},
      {"noise_sigma", dataset.synth_params.noise_sigma},
      {"trend_slope", dataset.synth_params.trend_slope},
      {"train_ratio", dataset.train_ratio},
      {"val_ratio", dataset.val_ratio},
      {"few_shot_fraction", dataset.few_shot_fraction},
      {"stride", dataset.stride},
  };
  j["model"] = {
      {"layers", model.layers},
      {"heads", model.heads},
      {"hidden_dim", model.hidden_dim},
      {"patch_size", model.patch_size},
      {"input_length", model.input_length},
      {"label_length", model.label_length},
      {"horizon", model.horizon},
      {"n_vars", model.n_vars},
      {"head_kind",
       model.head_kind == HeadKind::forecast ? "forecast" : "classify"},
      {"n_classes", model.n_classes},
      {"alpha", model.alpha},
      {"sigma_x", model.sigma_x},
  };
  j["ranks"] = ranks;
  j["seeds"] = seeds;
  j["train"] = {
      {"loss", loss_to(train.loss)},
      {"optimizer", train.optimizer == Optimizer::sgd ? "sgd" : "adam"},
      {"learning_rate", train.learning_rate},
      {"batch_size", train.batch_size},
      {"epochs", train.epochs},
  };
  return j.dump();
}

std::uint64_t ExperimentSpec::spec_hash() const {
  const std::string s = canonical_json();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

DatasetWindows materialize_dataset(const ExperimentSpec& spec) {
  SeriesTable table;
  if (spec.dataset.kind == "synth") {
    table = synth(spec.dataset.synth_kind, spec.dataset.n_rows,
                  spec.dataset.n_vars, spec.dataset.synth_seed,
                  spec.dataset.synth_params, spec.dataset.frequency);
  } else {
    CsvSchema schema;
    schema.has_header = spec.dataset.has_header;
    schema.has_timestamp_column = spec.dataset.has_timestamp_column;
    table = load_csv(spec.dataset.path, schema, "", spec.dataset.frequency);
  }
  if (table.n_vars != spec.model.n_vars) {
    throw ValidationError("dataset has " + std::to_string(table.n_vars) +
                          " variables, model expects " +
                          std::to_string(spec.model.n_vars));
  }
  SplitSpec split = SplitSpec::from_ratios(table.n_rows,
                                           spec.dataset.train_ratio,
                                           spec.dataset.val_ratio);
  split.few_shot_fraction = spec.dataset.few_shot_fraction;
  return make_windows(table, spec.model.input_length, spec.model.horizon,
                      split, spec.dataset.stride);
}

namespace {

struct ForecastEval {
  double mse = 0.0;
  double mae = 0.0;
  MetricValue smape_mean;
};

ForecastEval evaluate_forecast(const FrozenTransformer& model,
                               const WindowSet& windows) {
  if (windows.empty()) throw DomainError("evaluate_forecast: no windows");
  ForecastEval ev;
  double smape_acc = 0.0;
  for (const Window& w : windows.windows) {
    Tensor pred = model.forward(w.input);
    ForecastPair p;
    p.truth = w.target.data;
    p.pred = pred.data;
    ev.mse += mse(p);
    ev.mae += mae(p);
    smape_acc += smape(p);
  }
  const double n = static_cast<double>(windows.size());
  ev.mse /= n;
  ev.mae /= n;
  ev.smape_mean = MetricValue::of(smape_acc / n);
  return ev;
}

MetricReport report_for(const ForecastEval& ev) {
  MetricReport r;
  r.set("mse", MetricValue::of(ev.mse));
  r.set("mae", MetricValue::of(ev.mae));
  r.set("smape", ev.smape_mean);
  return r;
}

json metric_report_json(const MetricReport& r) {
  return json::parse(r.to_json());
}

}  // namespace

std::string RunRecord::to_json() const {
  json j;
  j["spec_hash"] = spec_hash;
  j["wall_clock_seconds"] = wall_clock_seconds;
  j["budget"] = {
      {"trainable", budget.trainable},
      {"total", budget.total},
      {"percent", budget.percent},
      {"checkpoint_mib", budget.checkpoint_mib},
      {"overhead_mib", budget.overhead_mib},
  };
  j["mean_metrics"] = metric_report_json(mean_metrics);
  for (const SeedResult& s : per_seed) {
    json e;
    e["seed"] = s.seed;
    e["metrics"] = metric_report_json(s.test_metrics);
    for (const EpochLog& l : s.epochs) {
      e["epochs"].push_back({{"epoch", l.epoch},
                             {"train_loss", l.train_loss},
                             {"val_loss", l.val_loss}});
    }
    j["per_seed"].push_back(e);
  }
  return j.dump(2);
}

void write_file(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc | std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
}

RunRecord cmd_train(const ExperimentSpec& spec) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  DatasetWindows data = materialize_dataset(spec);

  RunRecord record;
  record.spec_hash = spec.spec_hash();

  ModelConfig cfg = spec.model;
  cfg.rank = spec.ranks.front();

  std::map<std::string, std::pair<double, std::size_t>> sums;
  bool ckpt_written = false;
  for (std::uint64_t seed : spec.seeds) {
    FrozenTransformer model(cfg, seed);
    TrainOptions opts = spec.train;
    opts.seed = seed;
    SeedResult sr;
    sr.seed = seed;
    if (opts.epochs > 0) sr.epochs = model.train(data, opts);
    const WindowSet& eval_set = data.test.empty() ? data.val : data.test;
    sr.test_metrics = report_for(evaluate_forecast(model, eval_set));
    for (const auto& [name, v] : sr.test_metrics.values) {
      if (v.defined) {
        sums[name].first += v.value;
        sums[name].second += 1;
      }
    }
    if (!ckpt_written) {
      save_adapters(spec.out_dir + "/adapters.ckpt", model);
      record.budget = count_params(model);
      ckpt_written = true;
    }
    record.per_seed.push_back(std::move(sr));
  }
  for (const auto& [name, acc] : sums) {
    if (acc.second == spec.seeds.size()) {
      record.mean_metrics.set(
          name, MetricValue::of(acc.first / static_cast<double>(acc.second)));
    } else {
      record.mean_metrics.set(
          name, MetricValue::undefined("undefined for some seeds"));
    }
  }
  record.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  write_file(spec.out_dir + "/record.json", record.to_json());
  std::ostringstream csv;
  csv << "seed,mse,mae,smape\n";
  for (const SeedResult& s : record.per_seed) {
    csv << s.seed;
    for (const char* k : {"mse", "mae", "smape"}) {
      const MetricValue& v = s.test_metrics.values.at(k);
      csv << "," << (v.defined ? fmt_double(v.value) : "undefined");
    }
    csv << "\n";
  }
  csv << "mean";
  for (const char* k : {"mse", "mae", "smape"}) {
    const MetricValue& v = record.mean_metrics.values.at(k);
    csv << "," << (v.defined ? fmt_double(v.value) : "undefined");
  }
  csv << "\n";
  write_file(spec.out_dir + "/metrics.csv", csv.str());
  return record;
}

std::string RankSweepResult::to_csv() const {
  std::ostringstream os;
  os << "rank,params,mem_mib,mse,mae,saturation,error\n";
  for (const RankSweepRow& r : rows) {
    os << r.rank << "," << r.params << "," << fmt_double(r.mem_mib) << ",";
    if (r.failed) {
      os << ",,," << r.error << "\n";
      continue;
    }
    os << fmt_double(r.mse) << "," << fmt_double(r.mae) << ","
       << (saturation_rank && *saturation_rank == r.rank ? "1" : "0") << ",\n";
  }
  return os.str();
}

RankSweepResult cmd_rank_sweep(const ExperimentSpec& spec) {
  // Over-cap ranks become per-row failures instead of aborting the sweep.
  spec.validate(/*strict_ranks=*/false);
  DatasetWindows data = materialize_dataset(spec);

  RankSweepResult result;
  for (std::size_t rank : spec.ranks) {
    RankSweepRow row;
    row.rank = rank;
    try {
      ModelConfig cfg = spec.model;
      cfg.rank = rank;
      double mse_sum = 0.0, mae_sum = 0.0;
      std::size_t budget_params = 0;
      double mem = 0.0;
      for (std::uint64_t seed : spec.seeds) {
        FrozenTransformer model(cfg, seed);
        TrainOptions opts = spec.train;
        opts.seed = seed;
        if (opts.epochs > 0) model.train(data, opts);
        const WindowSet& eval_set = data.test.empty() ? data.val : data.test;
        ForecastEval ev = evaluate_forecast(model, eval_set);
        mse_sum += ev.mse;
        mae_sum += ev.mae;
        if (budget_params == 0) {
          ParamBudget b = count_params(model);
          budget_params = b.trainable;
          mem = b.checkpoint_mib;
        }
      }
      row.params = budget_params;
      row.mem_mib = mem;
      row.mse = mse_sum / static_cast<double>(spec.seeds.size());
      row.mae = mae_sum / static_cast<double>(spec.seeds.size());
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    result.rows.push_back(row);
  }

  double best = 0.0;
  bool any = false;
  for (const RankSweepRow& r : result.rows) {
    if (!r.failed && (!any || r.mse < best)) {
      best = r.mse;
      any = true;
    }
  }
  if (any) {
    // 5% rule: smallest rank whose MSE is within 5% of the sweep best.
    std::vector<RankSweepRow> sorted = result.rows;
    std::sort(sorted.begin(), sorted.end(),
              [](const RankSweepRow& a, const RankSweepRow& b) {
                return a.rank < b.rank;
              });
    for (const RankSweepRow& r : sorted) {
      if (!r.failed && r.mse <= 1.05 * best) {
        result.saturation_rank = r.rank;
        break;
      }
    }
  }
  return result;
}

std::string ZeroShotResult::to_csv() const {
  std::ostringstream os;
  os << "frequency,horizon,smape\n";
  for (const ZeroShotRow& r : rows) {
    os << r.frequency << "," << r.horizon << ","
       << (r.smape.defined ? fmt_double(r.smape.value) : "undefined") << "\n";
  }
  os << "average,,"
     << (average.defined ? fmt_double(average.value) : "undefined") << "\n";
  return os.str();
}

ZeroShotResult cmd_zero_shot(const ExperimentSpec& spec,
                             const std::vector<SeriesTable>& sources,
                             const std::vector<SeriesTable>& targets) {
  std::vector<ZeroShotPlan> plans = zero_shot_pair(sources, targets);
  ZeroShotResult result;
  double acc = 0.0;
  std::size_t n_defined = 0;

  for (const ZeroShotPlan& plan : plans) {
    ModelConfig cfg = spec.model;
    cfg.rank = spec.ranks.front();
    cfg.horizon = plan.horizon;
    cfg.n_vars = plan.source->n_vars;

    SplitSpec src_split = SplitSpec::from_ratios(
        plan.source->n_rows, spec.dataset.train_ratio, spec.dataset.val_ratio);
    DatasetWindows src = make_windows(*plan.source, cfg.input_length,
                                      plan.horizon, src_split,
                                      spec.dataset.stride);

    FrozenTransformer model(cfg, spec.seeds.front());
    TrainOptions opts = spec.train;
    opts.seed = spec.seeds.front();
    if (opts.epochs > 0) model.train(src, opts);

    // Target data: evaluation only. Any SGD step here is a contract
    // violation surfaced through target_updates.
    const std::uint64_t steps_before = model.adapter_steps();
    SplitSpec tgt_split = SplitSpec::from_ratios(
        plan.target->n_rows, spec.dataset.train_ratio, spec.dataset.val_ratio);
    DatasetWindows tgt = make_windows(*plan.target, cfg.input_length,
                                      plan.horizon, tgt_split,
                                      spec.dataset.stride);
    const WindowSet& eval_set = tgt.test.empty() ? tgt.val : tgt.test;
    ForecastEval ev = evaluate_forecast(model, eval_set);
    result.target_updates += model.adapter_steps() - steps_before;

    ZeroShotRow row;
    row.frequency = frequency_to_string(plan.frequency);
    row.horizon = plan.horizon;
    row.smape = ev.smape_mean;
    if (row.smape.defined) {
      acc += row.smape.value;
      ++n_defined;
    }
    result.rows.push_back(row);
  }
  result.average = n_defined
                       ? MetricValue::of(acc / static_cast<double>(n_defined))
                       : MetricValue::undefined("no defined sMAPE rows");
  return result;
}

}  // namespace tsadapt
