#include "tsadapt/data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "tsadapt/errors.hpp"
#include "tsadapt/util.hpp"

namespace tsadapt {

Frequency frequency_from_string(const std::string& s) {
  if (s == "hourly") return Frequency::hourly;
  if (s == "15-min" || s == "15min") return Frequency::min15;
  if (s == "10-min" || s == "10min") return Frequency::min10;
  if (s == "yearly") return Frequency::yearly;
  if (s == "quarterly") return Frequency::quarterly;
  if (s == "monthly") return Frequency::monthly;
  throw ValidationError("unknown frequency '" + s + "'");
}

std::string frequency_to_string(Frequency f) {
  switch (f) {
    case Frequency::hourly: return "hourly";
    case Frequency::min15: return "15-min";
    case Frequency::min10: return "10-min";
    case Frequency::yearly: return "yearly";
    case Frequency::quarterly: return "quarterly";
    case Frequency::monthly: return "monthly";
  }
  return "?";
}

std::size_t zero_shot_horizon(Frequency f) {
  switch (f) {
    case Frequency::yearly: return 6;
    case Frequency::quarterly: return 8;
    case Frequency::monthly: return 18;
    default:
      throw DomainError("zero_shot_horizon: no fixed horizon for frequency '" +
                        frequency_to_string(f) + "'");
  }
}

SeriesTable load_csv(const std::string& path, const CsvSchema& schema,
                     const std::string& name, Frequency frequency) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_csv: cannot open '" + path + "'");

  SeriesTable table;
  table.name = name.empty() ? path : name;
  table.frequency = frequency;

  std::string line;
  std::size_t line_no = 0;
  bool header_pending = schema.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!cells.empty() && line.back() == ',') cells.push_back("");

    std::size_t first_value = 0;
    if (schema.has_timestamp_column) {
      if (cells.empty()) {
        throw ValidationError("load_csv: line " + std::to_string(line_no) +
                              ": missing timestamp column");
      }
      table.timestamps.push_back(cells[0]);
      first_value = 1;
    }
    const std::size_t n_values = cells.size() - first_value;
    if (schema.expected_columns && n_values != *schema.expected_columns) {
      throw ValidationError("load_csv: line " + std::to_string(line_no) +
                            ": expected " +
                            std::to_string(*schema.expected_columns) +
                            " value columns, got " + std::to_string(n_values));
    }
    if (table.n_vars == 0) {
      table.n_vars = n_values;
    } else if (n_values != table.n_vars) {
      throw ValidationError("load_csv: line " + std::to_string(line_no) +
                            ": ragged row, expected " +
                            std::to_string(table.n_vars) + " columns, got " +
                            std::to_string(n_values));
    }
    for (std::size_t c = 0; c < n_values; ++c) {
      const std::string& s = cells[first_value + c];
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      const bool parsed = end && *end == '\0' && end != s.c_str();
      if (!parsed || !std::isfinite(v)) {
        throw ValidationError("load_csv: non-finite or unparsable cell at (" +
                              std::to_string(line_no) + ", " +
                              std::to_string(first_value + c + 1) + "): '" +
                              s + "'");
      }
      table.values.push_back(v);
    }
    ++table.n_rows;
  }
  if (table.n_rows == 0) throw ValidationError("load_csv: '" + path + "' has no data rows");
  return table;
}

SplitSpec SplitSpec::from_ratios(std::size_t n_rows, double train_ratio,
                                 double val_ratio) {
  if (train_ratio <= 0.0 || val_ratio < 0.0 || train_ratio + val_ratio >= 1.0) {
    throw ValidationError("split: ratios must satisfy 0 < train, 0 <= val, "
                          "train + val < 1");
  }
  SplitSpec s;
  s.train_end = static_cast<std::size_t>(
      static_cast<double>(n_rows) * train_ratio);
  s.val_end = s.train_end + static_cast<std::size_t>(
                                static_cast<double>(n_rows) * val_ratio);
  return s;
}

std::size_t window_count(std::size_t segment_len, std::size_t input_length,
                         std::size_t horizon, std::size_t stride) {
  const std::size_t need = input_length + horizon;
  if (segment_len < need) return 0;
  const std::size_t raw = segment_len - need + 1;
  return (raw + stride - 1) / stride;
}

namespace {

WindowSet windows_for_segment(const SeriesTable& table, std::size_t begin,
                              std::size_t end, std::size_t input_length,
                              std::size_t horizon, std::size_t stride) {
  WindowSet set;
  set.input_length = input_length;
  set.horizon = horizon;
  const std::size_t d = table.n_vars;
  if (end < begin + input_length + horizon) return set;
  for (std::size_t s = begin; s + input_length + horizon <= end; s += stride) {
    Window w;
    w.start = s;
    w.input = Tensor::zeros(input_length, d);
    w.target = Tensor::zeros(horizon, d);
    for (std::size_t t = 0; t < input_length; ++t)
      for (std::size_t v = 0; v < d; ++v)
        w.input.at(t, v) = table.at(s + t, v);
    for (std::size_t t = 0; t < horizon; ++t)
      for (std::size_t v = 0; v < d; ++v)
        w.target.at(t, v) = table.at(s + input_length + t, v);
    set.windows.push_back(std::move(w));
  }
  return set;
}

}  // namespace

DatasetWindows make_windows(const SeriesTable& table, std::size_t input_length,
                            std::size_t horizon, const SplitSpec& split,
                            std::size_t stride) {
  if (stride == 0) throw ValidationError("make_windows: stride must be >= 1");
  if (split.train_end > split.val_end || split.val_end > table.n_rows) {
    throw ValidationError("make_windows: split boundaries out of order");
  }
  if (split.few_shot_fraction <= 0.0 || split.few_shot_fraction > 1.0) {
    throw ValidationError("make_windows: few_shot_fraction must be in (0, 1]");
  }
  if (table.n_rows < input_length + horizon) {
    throw ValidationError("make_windows: table has " +
                          std::to_string(table.n_rows) + " rows, needs >= " +
                          std::to_string(input_length + horizon));
  }
  DatasetWindows out;
  out.train = windows_for_segment(table, 0, split.train_end, input_length,
                                  horizon, stride);
  out.val = windows_for_segment(table, split.train_end, split.val_end,
                                input_length, horizon, stride);
  out.test = windows_for_segment(table, split.val_end, table.n_rows,
                                 input_length, horizon, stride);
  if (split.few_shot_fraction < 1.0) {
    const std::size_t keep = static_cast<std::size_t>(
        static_cast<double>(out.train.size()) * split.few_shot_fraction +
        1e-12);
    out.train.windows.resize(std::min(out.train.size(), std::max<std::size_t>(keep, 1)));
  }
  return out;
}

std::vector<ZeroShotPlan> zero_shot_pair(
    const std::vector<SeriesTable>& sources,
    const std::vector<SeriesTable>& targets) {
  std::vector<ZeroShotPlan> plans;
  for (const SeriesTable& src : sources) {
    for (const SeriesTable& tgt : targets) {
      if (src.frequency == tgt.frequency) {
        plans.push_back(ZeroShotPlan{src.frequency,
                                     zero_shot_horizon(src.frequency), &src,
                                     &tgt});
      }
    }
  }
  if (plans.empty()) {
    throw DomainError("zero_shot_pair: no matching frequency between source "
                      "and target sets");
  }
  return plans;
}

SeriesTable synth(SynthKind kind, std::size_t n_rows, std::size_t n_vars,
                  std::uint64_t seed, const SynthParams& params,
                  Frequency frequency) {
  if (n_rows == 0 || n_vars == 0) {
    throw DomainError("synth: n_rows and n_vars must be >= 1");
  }
  SeriesTable table;
  table.name = kind == SynthKind::multi_sine ? "multi-sine" : "trend-season";
  table.frequency = frequency;
  table.n_rows = n_rows;
  table.n_vars = n_vars;
  table.values.resize(n_rows * n_vars);

  std::mt19937_64 rng(mix_seed(seed));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  std::normal_distribution<double> noise(0.0, 1.0);

  // Phases drawn up front so the deterministic part is independent of how
  // many noise samples follow.
  std::vector<double> phases(n_vars * params.amplitudes.size());
  for (double& p : phases) p = phase(rng);

  for (std::size_t v = 0; v < n_vars; ++v) {
    for (std::size_t t = 0; t < n_rows; ++t) {
      double x = 0.0;
      for (std::size_t k = 0; k < params.amplitudes.size(); ++k) {
        const double f =
            k < params.frequencies.size() ? params.frequencies[k] : 0.01;
        x += params.amplitudes[k] *
             std::sin(2.0 * M_PI * f * static_cast<double>(t) +
                      phases[v * params.amplitudes.size() + k]);
      }
      if (kind == SynthKind::trend_season_noise) {
        x += params.trend_slope * static_cast<double>(t);
      }
      if (params.noise_sigma > 0.0) x += params.noise_sigma * noise(rng);
      table.values[t * n_vars + v] = x;
    }
  }
  return table;
}

std::string series_to_csv(const SeriesTable& table) {
  std::ostringstream os;
  for (std::size_t v = 0; v < table.n_vars; ++v) {
    if (v) os << ",";
    os << "var" << v;
  }
  os << "\n";
  for (std::size_t t = 0; t < table.n_rows; ++t) {
    for (std::size_t v = 0; v < table.n_vars; ++v) {
      if (v) os << ",";
      os << fmt_double(table.at(t, v));
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace tsadapt
