#include "tsadapt/adapter.hpp"

#include <cmath>
#include <sstream>

#include "tsadapt/errors.hpp"
#include "tsadapt/util.hpp"

namespace tsadapt {

double scaling_factor(std::size_t rank, double alpha) {
  if (rank == 0) throw DomainError("scaling_factor: rank must be positive");
  return alpha / std::sqrt(static_cast<double>(rank));
}

double scaling_factor_gamma(std::size_t rank, double alpha, double gamma) {
  if (rank == 0) throw DomainError("scaling_factor: rank must be positive");
  return alpha / std::pow(static_cast<double>(rank), gamma);
}

LowRankAdapter LowRankAdapter::init(std::size_t d, std::size_t d_prime,
                                    std::size_t rank, double alpha,
                                    double sigma_x, std::uint64_t seed) {
  if (rank == 0 || rank > std::min(d, d_prime)) {
    throw DomainError("adapter init: rank " + std::to_string(rank) +
                      " exceeds min(" + std::to_string(d) + ", " +
                      std::to_string(d_prime) + ")");
  }
  LowRankAdapter a;
  a.rank = rank;
  a.alpha = alpha;
  a.sigma_x = sigma_x;
  a.beta = scaling_factor(rank, alpha);
  a.up = Tensor::zeros(d, rank);
  std::mt19937_64 rng(seed);
  a.down = Tensor::gaussian(rank, d_prime, sigma_x, rng);
  return a;
}

Tensor LowRankAdapter::delta_weight() const {
  return scale(matmul(up, down), beta);
}

std::pair<Tensor, Tensor> analytic_grads(const LowRankAdapter& adapter,
                                         const Tensor& z, const Tensor& v) {
  if (z.size() != adapter.in_dim()) {
    throw ShapeError("analytic_grads: z has " + std::to_string(z.size()) +
                     " entries, adapter expects " +
                     std::to_string(adapter.in_dim()));
  }
  if (v.size() != adapter.out_dim()) {
    throw ShapeError("analytic_grads: v has " + std::to_string(v.size()) +
                     " entries, adapter emits " +
                     std::to_string(adapter.out_dim()));
  }
  // dL/dY = beta · v (X z)ᵀ, dL/dX = beta · (Yᵀ v) zᵀ.
  Tensor xz = Tensor::zeros_vec(adapter.rank);
  for (std::size_t i = 0; i < adapter.rank; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < adapter.in_dim(); ++j)
      s += adapter.down.at(i, j) * z.data[j];
    xz.data[i] = s;
  }
  Tensor ytv = Tensor::zeros_vec(adapter.rank);
  for (std::size_t i = 0; i < adapter.rank; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < adapter.out_dim(); ++j)
      s += adapter.up.at(j, i) * v.data[j];
    ytv.data[i] = s;
  }
  Tensor g_up = scale(outer(v, xz), adapter.beta);
  Tensor g_down = scale(outer(ytv, z), adapter.beta);
  return {std::move(g_up), std::move(g_down)};
}

AdaptedLinear AdaptedLinear::make(std::size_t d, std::size_t d_prime,
                                  std::size_t rank, double alpha,
                                  double sigma_x, std::uint64_t seed_base,
                                  std::uint64_t seed_adapter) {
  AdaptedLinear layer;
  std::mt19937_64 rng(seed_base);
  layer.base = Tensor::gaussian(d, d_prime,
                                1.0 / std::sqrt(static_cast<double>(d_prime)),
                                rng);
  layer.adapter = LowRankAdapter::init(d, d_prime, rank, alpha, sigma_x,
                                       seed_adapter);
  return layer;
}

Tensor AdaptedLinear::forward(const Tensor& z) const {
  const std::size_t d = base.shape[0], dp = base.shape[1];
  if (z.size() != dp) {
    throw ShapeError("adapter forward: input has " + std::to_string(z.size()) +
                     " entries, layer expects " + std::to_string(dp));
  }
  Tensor out = Tensor::zeros_vec(d);
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < dp; ++j) s += base.at(i, j) * z.data[j];
    out.data[i] = s;
  }
  // Low-rank path right-to-left: never materialize Y·X.
  const LowRankAdapter& a = adapter;
  Tensor xz = Tensor::zeros_vec(a.rank);
  for (std::size_t i = 0; i < a.rank; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < dp; ++j) s += a.down.at(i, j) * z.data[j];
    xz.data[i] = s;
  }
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.rank; ++k) s += a.up.at(i, k) * xz.data[k];
    out.data[i] += a.beta * s;
  }
  return out;
}

Tensor AdaptedLinear::merge() const {
  return add(base, adapter.delta_weight());
}

void AdaptedLinear::sgd_step(std::span<const GradSample> batch, double eta) {
  if (eta < 0.0) throw DomainError("sgd_step: learning rate must be >= 0");
  if (batch.empty()) return;
  Tensor g_up = Tensor::zeros(adapter.up.shape[0], adapter.up.shape[1]);
  Tensor g_down = Tensor::zeros(adapter.down.shape[0], adapter.down.shape[1]);
  for (const GradSample& s : batch) {
    auto [gy, gx] = analytic_grads(adapter, s.z, s.v);
    g_up = add(g_up, gy);
    g_down = add(g_down, gx);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  if (!g_up.all_finite() || !g_down.all_finite()) {
    throw NumericError("sgd_step: non-finite gradient at step " +
                       std::to_string(step_count));
  }
  for (std::size_t i = 0; i < adapter.up.size(); ++i)
    adapter.up.data[i] -= eta * inv * g_up.data[i];
  for (std::size_t i = 0; i < adapter.down.size(); ++i)
    adapter.down.data[i] -= eta * inv * g_down.data[i];
  ++step_count;
}

AdaptedLinear::TapeHandles AdaptedLinear::apply(GradientTape& tape,
                                                NodeId input,
                                                bool trainable) const {
  NodeId base_id = tape.constant(base);
  NodeId up_id = trainable ? tape.leaf(adapter.up) : tape.constant(adapter.up);
  NodeId down_id =
      trainable ? tape.leaf(adapter.down) : tape.constant(adapter.down);
  NodeId frozen_path = tape.matmul_nt(input, base_id);
  NodeId low = tape.matmul_nt(input, down_id);   // n×r
  NodeId lifted = tape.matmul_nt(low, up_id);    // n×d
  NodeId out = tape.add(frozen_path, tape.scale(lifted, adapter.beta));
  return TapeHandles{out, trainable ? up_id : NodeId{},
                     trainable ? down_id : NodeId{}};
}

namespace {

/// Adapter-only output beta·Y(Xz) for a probe input.
Tensor adapter_output(const LowRankAdapter& a, const Tensor& z) {
  Tensor xz = Tensor::zeros_vec(a.rank);
  for (std::size_t i = 0; i < a.rank; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.in_dim(); ++j)
      s += a.down.at(i, j) * z.data[j];
    xz.data[i] = s;
  }
  Tensor out = Tensor::zeros_vec(a.out_dim());
  for (std::size_t i = 0; i < a.out_dim(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.rank; ++k) s += a.up.at(i, k) * xz.data[k];
    out.data[i] = a.beta * s;
  }
  return out;
}

/// Input gradient (beta·Y·X)ᵀ v for a probe cotangent.
Tensor adapter_input_grad(const LowRankAdapter& a, const Tensor& v) {
  Tensor ytv = Tensor::zeros_vec(a.rank);
  for (std::size_t i = 0; i < a.rank; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.out_dim(); ++j)
      s += a.up.at(j, i) * v.data[j];
    ytv.data[i] = s;
  }
  Tensor g = Tensor::zeros_vec(a.in_dim());
  for (std::size_t j = 0; j < a.in_dim(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rank; ++i) s += a.down.at(i, j) * ytv.data[i];
    g.data[j] = a.beta * s;
  }
  return g;
}

double entry_moment(const Tensor& t, std::size_t order) {
  double acc = 0.0;
  for (double v : t.data) acc += std::pow(v, static_cast<double>(order));
  return acc / static_cast<double>(t.size());
}

}  // namespace

std::vector<StabilityRow> stability_experiment(const StabilizationConfig& cfg) {
  if (cfg.ranks.empty()) throw DomainError("stability: empty rank list");
  if (cfg.seeds == 0) throw DomainError("stability: seeds must be positive");
  if (cfg.moment_order == 0) throw DomainError("stability: moment order >= 1");
  for (std::size_t r : cfg.ranks) {
    if (r > cfg.dim) {
      throw DomainError("stability: rank " + std::to_string(r) +
                        " exceeds adapter dim " + std::to_string(cfg.dim));
    }
  }

  std::vector<StabilityRow> rows;
  for (double gamma : cfg.gammas) {
    for (std::size_t rank : cfg.ranks) {
      // per-seed, per-step (output_moment, input_grad_moment)
      std::vector<std::vector<std::pair<double, double>>> per_seed(
          cfg.seeds,
          std::vector<std::pair<double, double>>(cfg.steps, {0.0, 0.0}));

      parallel_for(cfg.seeds, cfg.threads, [&](std::size_t s) {
        const std::uint64_t gbits =
            static_cast<std::uint64_t>(gamma * 1024.0);
        LowRankAdapter adapter = LowRankAdapter::init(
            cfg.dim, cfg.dim, rank, cfg.alpha, cfg.sigma_x,
            mix_seed(cfg.base_seed, mix_seed(rank, mix_seed(s, gbits))));
        adapter.beta = scaling_factor_gamma(rank, cfg.alpha, gamma);
        AdaptedLinear layer;
        layer.base = Tensor::zeros(cfg.dim, cfg.dim);
        layer.adapter = std::move(adapter);

        std::mt19937_64 rng(
            mix_seed(cfg.base_seed ^ 0xdadaULL, mix_seed(rank, mix_seed(s, gbits))));
        std::normal_distribution<double> unit(0.0, 1.0);
        auto draw_vec = [&](std::size_t n) {
          Tensor t = Tensor::zeros_vec(n);
          for (double& x : t.data) x = unit(rng);
          return t;
        };

        // One Gaussian training sample per seed; moments are measured at
        // that sample so the quadratic form z^T X0^T X0 z concentrates on
        // tr(X0^T X0) = r sigma^2 d, the proof's mean-field expectation.
        GradSample sample{draw_vec(cfg.dim), draw_vec(cfg.dim)};
        for (std::size_t step = 0; step < cfg.steps; ++step) {
          layer.sgd_step(std::span<const GradSample>(&sample, 1),
                         cfg.learning_rate);
          per_seed[s][step] = {
              entry_moment(adapter_output(layer.adapter, sample.z),
                           cfg.moment_order),
              entry_moment(adapter_input_grad(layer.adapter, sample.v),
                           cfg.moment_order)};
        }
      });

      for (std::size_t step = 0; step < cfg.steps; ++step) {
        double out_m = 0.0, grad_m = 0.0;
        for (std::size_t s = 0; s < cfg.seeds; ++s) {
          out_m += per_seed[s][step].first;
          grad_m += per_seed[s][step].second;
        }
        rows.push_back(StabilityRow{rank, gamma, step + 1, cfg.moment_order,
                                    out_m / static_cast<double>(cfg.seeds),
                                    grad_m / static_cast<double>(cfg.seeds),
                                    cfg.seeds});
      }
    }
  }
  return rows;
}

std::string stability_csv(const std::vector<StabilityRow>& rows) {
  std::ostringstream os;
  os << "rank,gamma,step,moment_order,output_moment,input_grad_moment,seeds\n";
  for (const StabilityRow& r : rows) {
    os << r.rank << "," << fmt_double(r.gamma) << "," << r.step << ","
       << r.moment_order << "," << fmt_double(r.output_moment) << ","
       << fmt_double(r.input_grad_moment) << "," << r.seeds << "\n";
  }
  return os.str();
}

}  // namespace tsadapt
