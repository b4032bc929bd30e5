#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "tsadapt/tape.hpp"
#include "tsadapt/tensor.hpp"

namespace tsadapt {

/// beta_r = alpha / sqrt(r). Throws DomainError for r = 0.
double scaling_factor(std::size_t rank, double alpha);

/// Generalized beta_r = alpha / r^gamma, used by the stability experiment
/// to contrast the sqrt law (gamma = 1/2) with gamma = 0 and gamma = 1.
double scaling_factor_gamma(std::size_t rank, double alpha, double gamma);

/// Trainable low-rank factor pair attached to a frozen weight.
/// Y (d×r) starts at zero, X (r×d') is Gaussian, so the initial
/// perturbation Y·X is exactly zero.
struct LowRankAdapter {
  Tensor down;  // X: r×d'
  Tensor up;    // Y: d×r
  std::size_t rank = 0;
  double alpha = 1.0;
  double sigma_x = 0.02;
  double beta = 1.0;  // cached alpha / sqrt(rank) unless overridden

  static LowRankAdapter init(std::size_t d, std::size_t d_prime,
                             std::size_t rank, double alpha, double sigma_x,
                             std::uint64_t seed);

  std::size_t out_dim() const { return up.shape[0]; }
  std::size_t in_dim() const { return down.shape[1]; }
  std::size_t trainable_params() const { return rank * (out_dim() + in_dim()); }

  /// beta · Y · X, materialized (tests and merge only; forward never does).
  Tensor delta_weight() const;
};

/// Per-sample cotangent pair for an SGD step: input z and the loss
/// gradient v at the adapter output.
struct GradSample {
  Tensor z;  // length d'
  Tensor v;  // length d
};

/// Analytic adapter gradients:
///   dL/dY = beta · v · zᵀ · Xᵀ      (d×r)
///   dL/dX = beta · Yᵀ · v · zᵀ      (r×d')
std::pair<Tensor, Tensor> analytic_grads(const LowRankAdapter& adapter,
                                         const Tensor& z, const Tensor& v);

/// Frozen linear layer with an adapter riding on it.
struct AdaptedLinear {
  Tensor base;  // W_o: d×d', never updated
  LowRankAdapter adapter;
  std::uint64_t step_count = 0;  // SGD steps taken; instrumentation

  static AdaptedLinear make(std::size_t d, std::size_t d_prime,
                            std::size_t rank, double alpha, double sigma_x,
                            std::uint64_t seed_base, std::uint64_t seed_adapter);

  /// W_o z + beta · Y (X z), evaluated right-to-left in O(r(d+d')).
  Tensor forward(const Tensor& z) const;

  /// Deployment form W_o + beta·Y·X.
  Tensor merge() const;

  /// One SGD step over a batch of (z, v) samples using the analytic
  /// gradients, averaged over the batch.
  void sgd_step(std::span<const GradSample> batch, double eta);

  /// Tape-integrated forward over row-token input (n_tokens × d'):
  /// out = in·W_oᵀ + beta (in·Xᵀ)·Yᵀ. When `trainable`, Y and X enter the
  /// tape as leaves whose ids are returned for gradient readback.
  struct TapeHandles {
    NodeId out;
    NodeId up;    // invalid when frozen
    NodeId down;  // invalid when frozen
  };
  TapeHandles apply(GradientTape& tape, NodeId input, bool trainable) const;
};

/// Configuration of the rank-stability experiment around the sqrt scaling
/// law: for each (rank, gamma) it runs `steps` SGD updates on fresh
/// adapters with an i.i.d. standard-Gaussian input and unit-scale output
/// cotangent, then measures per-entry moments of the adapter output at that
/// input (and of the input gradient at that cotangent) after every step,
/// averaged over seeds. Measuring at the training sample is what realizes
/// the mean-field contraction E[X0^T X0] = r sigma^2 I: an independent
/// probe instead picks up the initialization fluctuation, whose per-entry
/// second moment scales like beta^4 d^2 r and swamps the (beta^2 r)^2 law
/// whenever r < d.
struct StabilizationConfig {
  std::vector<std::size_t> ranks;
  std::vector<double> gammas{0.0, 0.5, 1.0};
  std::size_t moment_order = 2;
  std::size_t steps = 5;
  // Small enough that the second-order factor drift eta^2 beta^2 |v|^2 |z|^2
  // stays negligible next to the first-order signal at every tested rank.
  double learning_rate = 1e-4;
  std::size_t seeds = 256;
  std::size_t dim = 256;       // d = d'
  double alpha = 1.0;
  double sigma_x = 0.02;
  std::uint64_t base_seed = 0x5eed;
  unsigned threads = 1;
};

struct StabilityRow {
  std::size_t rank;
  double gamma;
  std::size_t step;
  std::size_t moment_order;
  double output_moment;
  double input_grad_moment;
  std::size_t seeds;
};

std::vector<StabilityRow> stability_experiment(const StabilizationConfig& cfg);

/// CSV form of the stability rows: rank, gamma, step, moment_order,
/// output_moment, input_grad_moment, seeds.
std::string stability_csv(const std::vector<StabilityRow>& rows);

}  // namespace tsadapt
