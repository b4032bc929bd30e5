#include "tsadapt/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tsadapt/errors.hpp"
#include "tsadapt/util.hpp"

namespace tsadapt {

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (patch_size == 0 || input_length % patch_size != 0) {
    problems.push_back("input_length " + std::to_string(input_length) +
                       " not divisible by patch_size " +
                       std::to_string(patch_size));
  }
  if (heads == 0 || hidden_dim % heads != 0) {
    problems.push_back("heads " + std::to_string(heads) +
                       " does not divide hidden_dim " +
                       std::to_string(hidden_dim));
  }
  if (head_kind == HeadKind::forecast && horizon == 0) {
    problems.push_back("forecast head needs horizon >= 1");
  }
  if (head_kind == HeadKind::classify && n_classes < 2) {
    problems.push_back("classify head needs n_classes >= 2");
  }
  if (layers == 0) problems.push_back("layers must be >= 1");
  if (n_vars == 0) problems.push_back("n_vars must be >= 1");
  if (rank == 0) problems.push_back("rank must be >= 1");
  if (!problems.empty()) {
    std::string msg = "model config invalid:";
    for (const std::string& p : problems) msg += "\n  - " + p;
    throw ValidationError(msg);
  }
}

std::pair<Tensor, NormStats> zscore(const Tensor& series, double eps) {
  if (!series.is_matrix() || series.shape[0] < 2) {
    throw DomainError("zscore: need a window of at least 2 rows, got " +
                      series.shape_str());
  }
  const std::size_t L = series.shape[0], d = series.shape[1];
  NormStats stats;
  stats.eps = eps;
  stats.mean.resize(d);
  stats.std.resize(d);
  Tensor out = Tensor::zeros(L, d);
  for (std::size_t v = 0; v < d; ++v) {
    double mu = 0.0;
    for (std::size_t t = 0; t < L; ++t) mu += series.at(t, v);
    mu /= static_cast<double>(L);
    double var = 0.0;
    for (std::size_t t = 0; t < L; ++t) {
      const double c = series.at(t, v) - mu;
      var += c * c;
    }
    var /= static_cast<double>(L);  // population convention
    stats.mean[v] = mu;
    stats.std[v] = std::sqrt(var);
    const double div = stats.divisor(v);
    for (std::size_t t = 0; t < L; ++t)
      out.at(t, v) = (series.at(t, v) - mu) / div;
  }
  return {std::move(out), std::move(stats)};
}

Tensor denormalize(const Tensor& series, const NormStats& stats) {
  if (!series.is_matrix() || series.shape[1] != stats.mean.size()) {
    throw ShapeError("denormalize: series " + series.shape_str() +
                     " does not match stats with " +
                     std::to_string(stats.mean.size()) + " variables");
  }
  Tensor out = series;
  for (std::size_t t = 0; t < out.shape[0]; ++t)
    for (std::size_t v = 0; v < out.shape[1]; ++v)
      out.at(t, v) = out.at(t, v) * stats.divisor(v) + stats.mean[v];
  return out;
}

Tensor patchify(const Tensor& series, std::size_t patch_size) {
  if (!series.is_matrix()) {
    throw ShapeError("patchify: expected matrix, got " + series.shape_str());
  }
  const std::size_t L = series.shape[0], d = series.shape[1];
  if (patch_size == 0 || L % patch_size != 0) {
    throw DomainError("patchify: patch size " + std::to_string(patch_size) +
                      " does not divide length " + std::to_string(L));
  }
  const std::size_t n = L / patch_size;
  Tensor out = Tensor::zeros(n, patch_size * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < patch_size; ++p)
      for (std::size_t v = 0; v < d; ++v)
        out.at(i, p * d + v) = series.at(i * patch_size + p, v);
  return out;
}

Tensor unpatchify(const Tensor& tokens, std::size_t patch_size,
                  std::size_t n_vars) {
  if (!tokens.is_matrix() || tokens.shape[1] != patch_size * n_vars) {
    throw ShapeError("unpatchify: token width mismatch " + tokens.shape_str());
  }
  const std::size_t n = tokens.shape[0];
  Tensor out = Tensor::zeros(n * patch_size, n_vars);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < patch_size; ++p)
      for (std::size_t v = 0; v < n_vars; ++v)
        out.at(i * patch_size + p, v) = tokens.at(i, p * n_vars + v);
  return out;
}

namespace {

Tensor init_weight(std::size_t out_dim, std::size_t in_dim,
                   std::mt19937_64& rng) {
  return Tensor::gaussian(out_dim, in_dim,
                          1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
}

}  // namespace

FrozenTransformer::FrozenTransformer(const ModelConfig& config,
                                     std::uint64_t seed)
    : config_(config) {
  config_.validate();
  const std::size_t D = config_.hidden_dim;
  const std::size_t F = 4 * D;
  std::mt19937_64 rng(mix_seed(seed));

  embed_.base = init_weight(D, config_.token_dim(), rng);
  const std::size_t head_in = config_.head_kind == HeadKind::forecast
                                  ? config_.n_tokens() * D
                                  : D;
  head_.base = init_weight(config_.head_out(), head_in, rng);

  blocks_.resize(config_.layers);
  for (FrozenBlock& b : blocks_) {
    b.wq = init_weight(D, D, rng);
    b.wk = init_weight(D, D, rng);
    b.wv = init_weight(D, D, rng);
    b.wo = init_weight(D, D, rng);
    b.bq = Tensor::zeros_vec(D);
    b.bk = Tensor::zeros_vec(D);
    b.bv = Tensor::zeros_vec(D);
    b.bo = Tensor::zeros_vec(D);
    b.w1 = init_weight(F, D, rng);
    b.b1 = Tensor::zeros_vec(F);
    b.w2 = init_weight(D, F, rng);
    b.b2 = Tensor::zeros_vec(D);
    b.ln1_g = Tensor({D}, std::vector<double>(D, 1.0));
    b.ln1_b = Tensor::zeros_vec(D);
    b.ln2_g = Tensor({D}, std::vector<double>(D, 1.0));
    b.ln2_b = Tensor::zeros_vec(D);
  }
  lnf_g_ = Tensor({D}, std::vector<double>(D, 1.0));
  lnf_b_ = Tensor::zeros_vec(D);

  const std::uint64_t adapter_seed = mix_seed(seed, 0xada9);
  embed_.adapter = LowRankAdapter::init(D, config_.token_dim(), config_.rank,
                                        config_.alpha, config_.sigma_x,
                                        mix_seed(adapter_seed, 1));
  head_.adapter = LowRankAdapter::init(config_.head_out(), head_in,
                                       config_.rank, config_.alpha,
                                       config_.sigma_x,
                                       mix_seed(adapter_seed, 2));
}

FrozenTransformer::TapeRun FrozenTransformer::run_tape(GradientTape& tape,
                                                       const Tensor& window,
                                                       NormStats* stats_out,
                                                       bool trainable) const {
  if (!window.is_matrix() || window.shape[0] != config_.input_length ||
      window.shape[1] != config_.n_vars) {
    throw ValidationError("forward: window " + window.shape_str() +
                          " does not match config L=" +
                          std::to_string(config_.input_length) +
                          ", d=" + std::to_string(config_.n_vars));
  }
  auto [normalized, stats] = zscore(window, config_.norm_eps);
  if (stats_out) *stats_out = stats;

  NodeId x = tape.constant(patchify(normalized, config_.patch_size));
  auto embed_handles = embed_.apply(tape, x, trainable);
  NodeId h = embed_handles.out;

  const std::size_t D = config_.hidden_dim;
  const std::size_t n_heads = config_.heads;
  const std::size_t dh = D / n_heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (const FrozenBlock& b : blocks_) {
    NodeId a = tape.add_rowvec(
        tape.mul_rowvec(tape.layer_norm_rows(h, config_.ln_eps),
                        tape.constant(b.ln1_g)),
        tape.constant(b.ln1_b));
    NodeId q = tape.add_rowvec(tape.matmul_nt(a, tape.constant(b.wq)),
                               tape.constant(b.bq));
    NodeId k = tape.add_rowvec(tape.matmul_nt(a, tape.constant(b.wk)),
                               tape.constant(b.bk));
    NodeId v = tape.add_rowvec(tape.matmul_nt(a, tape.constant(b.wv)),
                               tape.constant(b.bv));
    std::vector<NodeId> ctx_heads;
    ctx_heads.reserve(n_heads);
    for (std::size_t hh = 0; hh < n_heads; ++hh) {
      NodeId qh = tape.slice_cols(q, hh * dh, dh);
      NodeId kh = tape.slice_cols(k, hh * dh, dh);
      NodeId vh = tape.slice_cols(v, hh * dh, dh);
      NodeId scores = tape.scale(tape.matmul_nt(qh, kh), att_scale);
      NodeId probs = tape.softmax_rows(scores, /*causal=*/true);
      ctx_heads.push_back(tape.matmul(probs, vh));
    }
    NodeId ctx = tape.concat_cols(ctx_heads);
    NodeId attn = tape.add_rowvec(tape.matmul_nt(ctx, tape.constant(b.wo)),
                                  tape.constant(b.bo));
    h = tape.add(h, attn);

    NodeId m = tape.add_rowvec(
        tape.mul_rowvec(tape.layer_norm_rows(h, config_.ln_eps),
                        tape.constant(b.ln2_g)),
        tape.constant(b.ln2_b));
    NodeId up = tape.gelu(tape.add_rowvec(
        tape.matmul_nt(m, tape.constant(b.w1)), tape.constant(b.b1)));
    NodeId down = tape.add_rowvec(tape.matmul_nt(up, tape.constant(b.w2)),
                                  tape.constant(b.b2));
    h = tape.add(h, down);
  }

  h = tape.add_rowvec(
      tape.mul_rowvec(tape.layer_norm_rows(h, config_.ln_eps),
                      tape.constant(lnf_g_)),
      tape.constant(lnf_b_));

  NodeId head_in;
  if (config_.head_kind == HeadKind::forecast) {
    head_in = tape.reshape(h, {1, config_.n_tokens() * D});
  } else {
    head_in = tape.mean_rows(h);
  }
  auto head_handles = head_.apply(tape, head_in, trainable);
  return TapeRun{head_handles.out, embed_handles, head_handles};
}

Tensor FrozenTransformer::forward_normalized(const Tensor& window) const {
  GradientTape tape;
  TapeRun run = run_tape(tape, window, nullptr, /*trainable=*/false);
  const Tensor& out = tape.value(run.out);
  if (config_.head_kind == HeadKind::forecast) {
    return Tensor({config_.horizon, config_.n_vars}, out.data);
  }
  return out;
}

Tensor FrozenTransformer::forward(const Tensor& window) const {
  GradientTape tape;
  NormStats stats;
  TapeRun run = run_tape(tape, window, &stats, /*trainable=*/false);
  const Tensor& out = tape.value(run.out);
  if (config_.head_kind == HeadKind::forecast) {
    Tensor fc({config_.horizon, config_.n_vars}, out.data);
    return denormalize(fc, stats);
  }
  return out;
}

double FrozenTransformer::evaluate_mse(const WindowSet& windows) const {
  if (windows.empty()) throw DomainError("evaluate_mse: empty window set");
  std::vector<double> per_window(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const Window& w = windows.windows[i];
    Tensor pred = forward(w.input);
    double acc = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double e = pred.data[k] - w.target.data[k];
      acc += e * e;
    }
    per_window[i] = acc / static_cast<double>(pred.size());
  }
  double total = 0.0;
  for (double v : per_window) total += v;
  return total / static_cast<double>(per_window.size());
}

namespace {

/// Adam state for one tensor; plain SGD when disabled.
struct AdamState {
  Tensor m, v;
  void init(const Tensor& like) {
    m = Tensor(like.shape, std::vector<double>(like.size(), 0.0));
    v = Tensor(like.shape, std::vector<double>(like.size(), 0.0));
  }
};

void apply_update(Tensor& param, const Tensor& grad, double lr,
                  Optimizer opt, AdamState& state, std::size_t step) {
  if (opt == Optimizer::sgd) {
    for (std::size_t i = 0; i < param.size(); ++i)
      param.data[i] -= lr * grad.data[i];
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    state.m.data[i] = b1 * state.m.data[i] + (1.0 - b1) * grad.data[i];
    state.v.data[i] = b2 * state.v.data[i] + (1.0 - b2) * grad.data[i] * grad.data[i];
    param.data[i] -= lr * (state.m.data[i] / c1) /
                     (std::sqrt(state.v.data[i] / c2) + eps);
  }
}

}  // namespace

std::vector<EpochLog> FrozenTransformer::train(const DatasetWindows& data,
                                               const TrainOptions& opts) {
  if (data.train.empty()) throw ValidationError("train: no training windows");
  if (opts.batch_size == 0) throw ValidationError("train: batch_size >= 1");
  if (config_.head_kind == HeadKind::classify &&
      opts.loss != LossKind::cross_entropy) {
    throw ValidationError("train: classify head requires cross-entropy loss");
  }

  std::vector<EpochLog> log;
  std::mt19937_64 shuffle_rng(mix_seed(opts.seed, 0x5f0f));

  AdamState st_eu, st_ed, st_hu, st_hd;
  st_eu.init(embed_.adapter.up);
  st_ed.init(embed_.adapter.down);
  st_hu.init(head_.adapter.up);
  st_hd.init(head_.adapter.down);
  std::size_t opt_step = 0;

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  struct WindowGrads {
    Tensor eu, ed, hu, hd;
    double loss = 0.0;
  };

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;

    for (std::size_t begin = 0; begin < order.size();
         begin += opts.batch_size) {
      const std::size_t end =
          std::min(begin + opts.batch_size, order.size());
      const std::size_t bs = end - begin;
      std::vector<WindowGrads> grads(bs);

      parallel_for(bs, opts.threads, [&](std::size_t bi) {
        const Window& w = data.train.windows[order[begin + bi]];
        GradientTape tape;
        NormStats stats;
        TapeRun run = run_tape(tape, w.input, &stats, /*trainable=*/true);
        NodeId loss;
        if (opts.loss == LossKind::cross_entropy) {
          loss = tape.cross_entropy(
              run.out, static_cast<std::size_t>(w.target.data[0]));
        } else {
          Tensor norm_target = w.target;
          for (std::size_t t = 0; t < norm_target.shape[0]; ++t)
            for (std::size_t v = 0; v < norm_target.shape[1]; ++v)
              norm_target.at(t, v) =
                  (norm_target.at(t, v) - stats.mean[v]) / stats.divisor(v);
          Tensor flat({1, norm_target.size()}, norm_target.data);
          loss = opts.loss == LossKind::mse
                     ? tape.mse_against(run.out, flat)
                     : tape.smape_against(run.out, flat);
        }
        tape.backward(loss);
        grads[bi].loss = tape.value(loss).data[0];
        grads[bi].eu = tape.grad(run.embed_handles.up);
        grads[bi].ed = tape.grad(run.embed_handles.down);
        grads[bi].hu = tape.grad(run.head_handles.up);
        grads[bi].hd = tape.grad(run.head_handles.down);
      });

      Tensor g_eu = Tensor::zeros(embed_.adapter.up.shape[0],
                                  embed_.adapter.up.shape[1]);
      Tensor g_ed = Tensor::zeros(embed_.adapter.down.shape[0],
                                  embed_.adapter.down.shape[1]);
      Tensor g_hu = Tensor::zeros(head_.adapter.up.shape[0],
                                  head_.adapter.up.shape[1]);
      Tensor g_hd = Tensor::zeros(head_.adapter.down.shape[0],
                                  head_.adapter.down.shape[1]);
      double batch_loss = 0.0;
      for (const WindowGrads& g : grads) {  // fixed reduction order
        batch_loss += g.loss;
        g_eu = add(g_eu, g.eu);
        g_ed = add(g_ed, g.ed);
        g_hu = add(g_hu, g.hu);
        g_hd = add(g_hd, g.hd);
      }
      const double inv = 1.0 / static_cast<double>(bs);
      batch_loss *= inv;
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(n_batches));
      }
      g_eu = scale(g_eu, inv);
      g_ed = scale(g_ed, inv);
      g_hu = scale(g_hu, inv);
      g_hd = scale(g_hd, inv);

      ++opt_step;
      apply_update(embed_.adapter.up, g_eu, opts.learning_rate, opts.optimizer,
                   st_eu, opt_step);
      apply_update(embed_.adapter.down, g_ed, opts.learning_rate,
                   opts.optimizer, st_ed, opt_step);
      apply_update(head_.adapter.up, g_hu, opts.learning_rate, opts.optimizer,
                   st_hu, opt_step);
      apply_update(head_.adapter.down, g_hd, opts.learning_rate,
                   opts.optimizer, st_hd, opt_step);
      ++embed_.step_count;
      ++head_.step_count;

      epoch_loss += batch_loss;
      ++n_batches;
    }

    EpochLog e;
    e.epoch = epoch;
    e.train_loss = epoch_loss / static_cast<double>(n_batches);
    e.val_loss = data.val.empty() ? 0.0 : evaluate_mse(data.val);
    log.push_back(e);
  }
  return log;
}

std::uint64_t FrozenTransformer::frozen_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [name, t] : frozen_tensors()) {
    (void)name;
    h = hash_bytes(*t, h);
  }
  return h;
}

std::size_t FrozenTransformer::trainable_params() const {
  return embed_.adapter.trainable_params() + head_.adapter.trainable_params();
}

std::size_t FrozenTransformer::total_params() const {
  std::size_t n = trainable_params();
  for (const auto& [name, t] : frozen_tensors()) {
    (void)name;
    n += t->size();
  }
  return n;
}

std::vector<std::pair<std::string, const Tensor*>>
FrozenTransformer::frozen_tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.emplace_back("embed.base", &embed_.base);
  out.emplace_back("head.base", &head_.base);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const FrozenBlock& b = blocks_[i];
    const std::string p = "block" + std::to_string(i) + ".";
    out.emplace_back(p + "wq", &b.wq);
    out.emplace_back(p + "wk", &b.wk);
    out.emplace_back(p + "wv", &b.wv);
    out.emplace_back(p + "wo", &b.wo);
    out.emplace_back(p + "bq", &b.bq);
    out.emplace_back(p + "bk", &b.bk);
    out.emplace_back(p + "bv", &b.bv);
    out.emplace_back(p + "bo", &b.bo);
    out.emplace_back(p + "w1", &b.w1);
    out.emplace_back(p + "b1", &b.b1);
    out.emplace_back(p + "w2", &b.w2);
    out.emplace_back(p + "b2", &b.b2);
    out.emplace_back(p + "ln1_g", &b.ln1_g);
    out.emplace_back(p + "ln1_b", &b.ln1_b);
    out.emplace_back(p + "ln2_g", &b.ln2_g);
    out.emplace_back(p + "ln2_b", &b.ln2_b);
  }
  out.emplace_back("lnf_g", &lnf_g_);
  out.emplace_back("lnf_b", &lnf_b_);
  return out;
}

std::vector<std::pair<std::string, Tensor*>>
FrozenTransformer::adapter_tensors() {
  return {
      {"embed.adapter.up", &embed_.adapter.up},
      {"embed.adapter.down", &embed_.adapter.down},
      {"head.adapter.up", &head_.adapter.up},
      {"head.adapter.down", &head_.adapter.down},
  };
}

}  // namespace tsadapt
