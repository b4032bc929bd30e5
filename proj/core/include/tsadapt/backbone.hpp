#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsadapt/adapter.hpp"
#include "tsadapt/data.hpp"
#include "tsadapt/tensor.hpp"

namespace tsadapt {

enum class HeadKind { forecast, classify };
enum class LossKind { mse, smape, cross_entropy };
enum class Optimizer { sgd, adam };

struct ModelConfig {
  std::size_t layers = 6;
  std::size_t heads = 4;
  std::size_t hidden_dim = 64;    // D
  std::size_t patch_size = 16;    // P
  std::size_t input_length = 336; // L, must be divisible by P
  std::size_t label_length = 0;   // recorded, not consumed by the head
  std::size_t horizon = 96;
  std::size_t n_vars = 7;         // d
  HeadKind head_kind = HeadKind::forecast;
  std::size_t n_classes = 2;      // classify head only
  std::size_t rank = 16;
  double alpha = 1.0;
  double sigma_x = 0.02;
  double norm_eps = 1e-8;         // constant-window floor in zscore
  double ln_eps = 1e-5;

  std::size_t n_tokens() const { return input_length / patch_size; }
  std::size_t token_dim() const { return patch_size * n_vars; }
  std::size_t head_out() const {
    return head_kind == HeadKind::forecast ? horizon * n_vars : n_classes;
  }
  void validate() const;  // throws ValidationError
};

/// Per-variable window statistics; sigma is recorded before flooring and
/// the effective divisor is max(sigma, eps).
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
  double eps = 1e-8;
  double divisor(std::size_t v) const { return std::max(std[v], eps); }
};

/// Per-variable Z-score over the window (population std). L >= 2 required.
std::pair<Tensor, NormStats> zscore(const Tensor& series, double eps);
Tensor denormalize(const Tensor& series, const NormStats& stats);

/// L×d → N×(P·d), token i = row-major flattening of rows [iP, (i+1)P).
Tensor patchify(const Tensor& series, std::size_t patch_size);
Tensor unpatchify(const Tensor& tokens, std::size_t patch_size,
                  std::size_t n_vars);

/// One frozen decoder block: pre-LN causal self-attention plus GELU MLP.
struct FrozenBlock {
  Tensor wq, wk, wv, wo;      // D×D, applied as x·Wᵀ
  Tensor bq, bk, bv, bo;      // D
  Tensor w1, b1;              // ffn up: F×D, F
  Tensor w2, b2;              // ffn down: D×F, D
  Tensor ln1_g, ln1_b, ln2_g, ln2_b;
};

struct EpochLog {
  std::size_t epoch;
  double train_loss;  // normalized-scale training objective
  double val_loss;    // denormalized validation MSE (or CE for classify)
};

struct TrainOptions {
  LossKind loss = LossKind::mse;
  Optimizer optimizer = Optimizer::sgd;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// GPT-style frozen backbone with adapted embedding and head projections.
/// Everything outside the two adapters' Y/X factors is frozen: no gradient
/// buffer is ever attached to it.
class FrozenTransformer {
 public:
  explicit FrozenTransformer(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  AdaptedLinear& embed() { return embed_; }
  AdaptedLinear& head() { return head_; }
  const AdaptedLinear& embed() const { return embed_; }
  const AdaptedLinear& head() const { return head_; }

  /// Inference forward: forecast (denormalized horizon×d) or class logits.
  Tensor forward(const Tensor& window) const;
  /// Forecast on the normalized scale, no denormalization (training target
  /// space). Also used by tests for affine invariance.
  Tensor forward_normalized(const Tensor& window) const;

  /// Trains adapter factors only; returns the per-epoch log. Deterministic
  /// under a fixed seed, including the batch shuffle.
  std::vector<EpochLog> train(const DatasetWindows& data,
                              const TrainOptions& opts);

  /// Denormalized validation/test MSE over a window set.
  double evaluate_mse(const WindowSet& windows) const;

  std::uint64_t frozen_hash() const;
  std::size_t trainable_params() const;
  std::size_t total_params() const;
  std::uint64_t adapter_steps() const {
    return embed_.step_count + head_.step_count;
  }

  /// All frozen tensors with stable names, for checkpointing.
  std::vector<std::pair<std::string, const Tensor*>> frozen_tensors() const;
  std::vector<std::pair<std::string, Tensor*>> adapter_tensors();

 private:
  struct TapeRun {
    NodeId out;                   // head output (1×head_out)
    AdaptedLinear::TapeHandles embed_handles;
    AdaptedLinear::TapeHandles head_handles;
  };
  TapeRun run_tape(GradientTape& tape, const Tensor& window,
                   NormStats* stats_out, bool trainable) const;

  ModelConfig config_;
  AdaptedLinear embed_;  // token_dim → D
  AdaptedLinear head_;   // N·D → head_out
  std::vector<FrozenBlock> blocks_;
  Tensor lnf_g_, lnf_b_;
};

}  // namespace tsadapt
