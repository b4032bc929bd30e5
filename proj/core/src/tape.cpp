#include "tsadapt/tape.hpp"

#include <algorithm>
#include <cmath>

#include "tsadapt/errors.hpp"

namespace tsadapt {

NodeId GradientTape::push(Tensor value, bool requires_grad,
                          std::function<void(GradientTape&, const Tensor&)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) {
    n.grad = Tensor(n.value.shape, std::vector<double>(n.value.size(), 0.0));
  }
  n.backward = std::move(back);
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

void GradientTape::accumulate(NodeId id, const Tensor& g) {
  Node& n = nodes_[id.index];
  if (!n.requires_grad) return;
  for (std::size_t i = 0; i < g.size(); ++i) n.grad.data[i] += g.data[i];
}

NodeId GradientTape::constant(Tensor value) {
  return push(std::move(value), false, nullptr);
}

NodeId GradientTape::leaf(Tensor value) {
  return push(std::move(value), true, nullptr);
}

NodeId GradientTape::matmul(NodeId a, NodeId b) {
  Tensor out = tsadapt::matmul(value(a), value(b));
  bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](GradientTape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, tsadapt::matmul_nt(g, t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, tsadapt::matmul_tn(t.value(a), g));
  });
}

NodeId GradientTape::matmul_nt(NodeId a, NodeId b) {
  Tensor out = tsadapt::matmul_nt(value(a), value(b));
  bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](GradientTape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, tsadapt::matmul(g, t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, tsadapt::matmul_tn(g, t.value(a)));
  });
}

NodeId GradientTape::add(NodeId a, NodeId b) {
  Tensor out = tsadapt::add(value(a), value(b));
  bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](GradientTape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

NodeId GradientTape::sub(NodeId a, NodeId b) {
  Tensor out = tsadapt::sub(value(a), value(b));
  bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](GradientTape& t, const Tensor& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, tsadapt::scale(g, -1.0));
  });
}

NodeId GradientTape::mul(NodeId a, NodeId b) {
  Tensor out = tsadapt::mul(value(a), value(b));
  bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](GradientTape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, tsadapt::mul(g, t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, tsadapt::mul(g, t.value(a)));
  });
}

NodeId GradientTape::scale(NodeId a, double c) {
  Tensor out = tsadapt::scale(value(a), c);
  return push(std::move(out), requires_grad(a),
              [a, c](GradientTape& t, const Tensor& g) {
                t.accumulate(a, tsadapt::scale(g, c));
              });
}

NodeId GradientTape::add_rowvec(NodeId a, NodeId v) {
  const Tensor& av = value(a);
  const Tensor& vv = value(v);
  if (!av.is_matrix() || vv.size() != av.shape[1]) {
    throw ShapeError("add_rowvec: shape mismatch " + av.shape_str() + " vs " +
                     vv.shape_str());
  }
  Tensor out = av;
  for (std::size_t i = 0; i < av.shape[0]; ++i)
    for (std::size_t j = 0; j < av.shape[1]; ++j) out.at(i, j) += vv.data[j];
  bool rg = requires_grad(a) || requires_grad(v);
  return push(std::move(out), rg, [a, v](GradientTape& t, const Tensor& g) {
    t.accumulate(a, g);
    if (t.requires_grad(v)) {
      Tensor gv = Tensor::zeros_vec(g.shape[1]);
      for (std::size_t i = 0; i < g.shape[0]; ++i)
        for (std::size_t j = 0; j < g.shape[1]; ++j) gv.data[j] += g.at(i, j);
      t.accumulate(v, gv);
    }
  });
}

NodeId GradientTape::mul_rowvec(NodeId a, NodeId v) {
  const Tensor& av = value(a);
  const Tensor& vv = value(v);
  if (!av.is_matrix() || vv.size() != av.shape[1]) {
    throw ShapeError("mul_rowvec: shape mismatch " + av.shape_str() + " vs " +
                     vv.shape_str());
  }
  Tensor out = av;
  for (std::size_t i = 0; i < av.shape[0]; ++i)
    for (std::size_t j = 0; j < av.shape[1]; ++j) out.at(i, j) *= vv.data[j];
  bool rg = requires_grad(a) || requires_grad(v);
  return push(std::move(out), rg, [a, v](GradientTape& t, const Tensor& g) {
    if (t.requires_grad(a)) {
      Tensor ga = g;
      for (std::size_t i = 0; i < g.shape[0]; ++i)
        for (std::size_t j = 0; j < g.shape[1]; ++j)
          ga.at(i, j) *= t.value(v).data[j];
      t.accumulate(a, ga);
    }
    if (t.requires_grad(v)) {
      Tensor gv = Tensor::zeros_vec(g.shape[1]);
      for (std::size_t i = 0; i < g.shape[0]; ++i)
        for (std::size_t j = 0; j < g.shape[1]; ++j)
          gv.data[j] += g.at(i, j) * t.value(a).at(i, j);
      t.accumulate(v, gv);
    }
  });
}

NodeId GradientTape::relu(NodeId a) {
  Tensor out = value(a);
  for (double& x : out.data) x = std::max(0.0, x);
  return push(std::move(out), requires_grad(a),
              [a](GradientTape& t, const Tensor& g) {
                Tensor ga = g;
                const Tensor& x = t.value(a);
                for (std::size_t i = 0; i < ga.size(); ++i)
                  if (x.data[i] <= 0.0) ga.data[i] = 0.0;
                t.accumulate(a, ga);
              });
}

NodeId GradientTape::gelu(NodeId a) {
  Tensor out = value(a);
  for (double& x : out.data) x = gelu_scalar(x);
  return push(std::move(out), requires_grad(a),
              [a](GradientTape& t, const Tensor& g) {
                Tensor ga = g;
                const Tensor& x = t.value(a);
                for (std::size_t i = 0; i < ga.size(); ++i)
                  ga.data[i] *= gelu_grad_scalar(x.data[i]);
                t.accumulate(a, ga);
              });
}

NodeId GradientTape::softmax_rows(NodeId a, bool causal) {
  const Tensor& av = value(a);
  if (!av.is_matrix()) {
    throw ShapeError("softmax_rows: expected matrix, got " + av.shape_str());
  }
  if (causal && av.shape[0] != av.shape[1]) {
    throw ShapeError("softmax_rows: causal mask needs a square matrix, got " +
                     av.shape_str());
  }
  const std::size_t m = av.shape[0], n = av.shape[1];
  Tensor out = Tensor::zeros(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t lim = causal ? i + 1 : n;
    double mx = av.at(i, 0);
    for (std::size_t j = 1; j < lim; ++j) mx = std::max(mx, av.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < lim; ++j) z += std::exp(av.at(i, j) - mx);
    for (std::size_t j = 0; j < lim; ++j)
      out.at(i, j) = std::exp(av.at(i, j) - mx) / z;
  }
  NodeId self_pending{nodes_.size()};  // node being created holds the softmax values
  return push(std::move(out), requires_grad(a),
              [a, causal, self_pending](GradientTape& t, const Tensor& g) {
                const Tensor& s = t.value(self_pending);
                const std::size_t m = s.shape[0], n = s.shape[1];
                Tensor ga = Tensor::zeros(m, n);
                for (std::size_t i = 0; i < m; ++i) {
                  const std::size_t lim = causal ? i + 1 : n;
                  double gs = 0.0;
                  for (std::size_t j = 0; j < lim; ++j)
                    gs += g.at(i, j) * s.at(i, j);
                  for (std::size_t j = 0; j < lim; ++j)
                    ga.at(i, j) = s.at(i, j) * (g.at(i, j) - gs);
                }
                t.accumulate(a, ga);
              });
}

NodeId GradientTape::layer_norm_rows(NodeId a, double eps) {
  const Tensor& av = value(a);
  if (!av.is_matrix()) {
    throw ShapeError("layer_norm_rows: expected matrix, got " + av.shape_str());
  }
  const std::size_t m = av.shape[0], n = av.shape[1];
  Tensor out = Tensor::zeros(m, n);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += av.at(i, j);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = av.at(i, j) - mu;
      var += c * c;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j)
      out.at(i, j) = (av.at(i, j) - mu) * inv_std[i];
  }
  NodeId self_pending{nodes_.size()};
  return push(std::move(out), requires_grad(a),
              [a, inv_std, self_pending](GradientTape& t, const Tensor& g) {
                const Tensor& y = t.value(self_pending);
                const std::size_t m = y.shape[0], n = y.shape[1];
                Tensor ga = Tensor::zeros(m, n);
                for (std::size_t i = 0; i < m; ++i) {
                  double gmean = 0.0, gymean = 0.0;
                  for (std::size_t j = 0; j < n; ++j) {
                    gmean += g.at(i, j);
                    gymean += g.at(i, j) * y.at(i, j);
                  }
                  gmean /= static_cast<double>(n);
                  gymean /= static_cast<double>(n);
                  for (std::size_t j = 0; j < n; ++j)
                    ga.at(i, j) =
                        inv_std[i] * (g.at(i, j) - gmean - y.at(i, j) * gymean);
                }
                t.accumulate(a, ga);
              });
}

NodeId GradientTape::slice_cols(NodeId a, std::size_t start, std::size_t len) {
  const Tensor& av = value(a);
  if (!av.is_matrix() || start + len > av.shape[1]) {
    throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of " + av.shape_str());
  }
  const std::size_t m = av.shape[0];
  Tensor out = Tensor::zeros(m, len);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < len; ++j) out.at(i, j) = av.at(i, start + j);
  return push(std::move(out), requires_grad(a),
              [a, start, len](GradientTape& t, const Tensor& g) {
                if (!t.requires_grad(a)) return;
                const Tensor& av = t.value(a);
                Tensor ga = Tensor::zeros(av.shape[0], av.shape[1]);
                for (std::size_t i = 0; i < g.shape[0]; ++i)
                  for (std::size_t j = 0; j < len; ++j)
                    ga.at(i, start + j) = g.at(i, j);
                t.accumulate(a, ga);
              });
}

NodeId GradientTape::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const std::size_t m = value(parts[0]).shape[0];
  std::size_t total = 0;
  bool rg = false;
  for (NodeId p : parts) {
    const Tensor& pv = value(p);
    if (!pv.is_matrix() || pv.shape[0] != m) {
      throw ShapeError("concat_cols: row mismatch " + pv.shape_str());
    }
    total += pv.shape[1];
    rg = rg || requires_grad(p);
  }
  Tensor out = Tensor::zeros(m, total);
  std::size_t off = 0;
  for (NodeId p : parts) {
    const Tensor& pv = value(p);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < pv.shape[1]; ++j)
        out.at(i, off + j) = pv.at(i, j);
    off += pv.shape[1];
  }
  return push(std::move(out), rg,
              [parts](GradientTape& t, const Tensor& g) {
                std::size_t off = 0;
                for (NodeId p : parts) {
                  const Tensor& pv = t.value(p);
                  if (t.requires_grad(p)) {
                    Tensor gp = Tensor::zeros(pv.shape[0], pv.shape[1]);
                    for (std::size_t i = 0; i < pv.shape[0]; ++i)
                      for (std::size_t j = 0; j < pv.shape[1]; ++j)
                        gp.at(i, j) = g.at(i, off + j);
                    t.accumulate(p, gp);
                  }
                  off += pv.shape[1];
                }
              });
}

NodeId GradientTape::reshape(NodeId a, std::vector<std::size_t> shape) {
  Tensor out(std::move(shape), value(a).data);
  return push(std::move(out), requires_grad(a),
              [a](GradientTape& t, const Tensor& g) {
                Tensor ga(t.value(a).shape, g.data);
                t.accumulate(a, ga);
              });
}

NodeId GradientTape::sum(NodeId a) {
  Tensor out({1}, {sum_all(value(a))});
  return push(std::move(out), requires_grad(a),
              [a](GradientTape& t, const Tensor& g) {
                const Tensor& av = t.value(a);
                Tensor ga(av.shape, std::vector<double>(av.size(), g.data[0]));
                t.accumulate(a, ga);
              });
}

NodeId GradientTape::mean_rows(NodeId a) {
  const Tensor& av = value(a);
  if (!av.is_matrix()) {
    throw ShapeError("mean_rows: expected matrix, got " + av.shape_str());
  }
  const std::size_t m = av.shape[0], n = av.shape[1];
  Tensor out = Tensor::zeros(1, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.at(0, j) += av.at(i, j) / static_cast<double>(m);
  return push(std::move(out), requires_grad(a),
              [a, m, n](GradientTape& t, const Tensor& g) {
                Tensor ga = Tensor::zeros(m, n);
                for (std::size_t i = 0; i < m; ++i)
                  for (std::size_t j = 0; j < n; ++j)
                    ga.at(i, j) = g.at(0, j) / static_cast<double>(m);
                t.accumulate(a, ga);
              });
}

NodeId GradientTape::smape_against(NodeId pred, const Tensor& target) {
  const Tensor& p = value(pred);
  if (p.size() != target.size()) {
    throw ShapeError("smape_against: size mismatch " + p.shape_str() + " vs " +
                     target.shape_str());
  }
  const double n = static_cast<double>(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = (std::abs(p.data[i]) + std::abs(target.data[i])) / 2.0;
    if (m > 0.0) acc += std::abs(p.data[i] - target.data[i]) / m;
  }
  Tensor out({1}, {100.0 * acc / n});
  Tensor tgt = target;
  return push(std::move(out), requires_grad(pred),
              [pred, tgt, n](GradientTape& t, const Tensor& g) {
                const Tensor& p = t.value(pred);
                Tensor gp(p.shape, std::vector<double>(p.size(), 0.0));
                auto sgn = [](double x) {
                  return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
                };
                for (std::size_t i = 0; i < p.size(); ++i) {
                  const double y = tgt.data[i], x = p.data[i];
                  const double m = (std::abs(x) + std::abs(y)) / 2.0;
                  if (m <= 0.0) continue;
                  const double num = std::abs(x - y);
                  gp.data[i] = g.data[0] * (100.0 / n) *
                               (sgn(x - y) / m - num * sgn(x) / (2.0 * m * m));
                }
                t.accumulate(pred, gp);
              });
}

NodeId GradientTape::mse_against(NodeId pred, const Tensor& target) {
  const Tensor& p = value(pred);
  if (p.size() != target.size()) {
    throw ShapeError("mse_against: size mismatch " + p.shape_str() + " vs " +
                     target.shape_str());
  }
  const double n = static_cast<double>(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = p.data[i] - target.data[i];
    acc += e * e;
  }
  Tensor out({1}, {acc / n});
  Tensor tgt = target;
  return push(std::move(out), requires_grad(pred),
              [pred, tgt, n](GradientTape& t, const Tensor& g) {
                const Tensor& p = t.value(pred);
                Tensor gp(p.shape, std::vector<double>(p.size(), 0.0));
                for (std::size_t i = 0; i < p.size(); ++i)
                  gp.data[i] = g.data[0] * 2.0 * (p.data[i] - tgt.data[i]) / n;
                t.accumulate(pred, gp);
              });
}

NodeId GradientTape::cross_entropy(NodeId logits, std::size_t label) {
  const Tensor& l = value(logits);
  if (label >= l.size()) {
    throw DomainError("cross_entropy: label " + std::to_string(label) +
                      " out of " + std::to_string(l.size()) + " classes");
  }
  double mx = l.data[0];
  for (double v : l.data) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : l.data) z += std::exp(v - mx);
  const double log_z = std::log(z) + mx;
  Tensor out({1}, {log_z - l.data[label]});
  return push(std::move(out), requires_grad(logits),
              [logits, label, log_z](GradientTape& t, const Tensor& g) {
                const Tensor& l = t.value(logits);
                Tensor gl(l.shape, std::vector<double>(l.size(), 0.0));
                for (std::size_t i = 0; i < l.size(); ++i) {
                  double p = std::exp(l.data[i] - log_z);
                  gl.data[i] = g.data[0] * (p - (i == label ? 1.0 : 0.0));
                }
                t.accumulate(logits, gl);
              });
}

void GradientTape::backward(NodeId loss_node) {
  const Tensor& loss = value(loss_node);
  if (!loss.is_scalar()) {
    throw DomainError("backward: loss must be scalar, got " + loss.shape_str());
  }
  if (!nodes_[loss_node.index].requires_grad) return;  // nothing trainable
  nodes_[loss_node.index].grad.data[0] = 1.0;
  for (std::size_t i = loss_node.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backward) n.backward(*this, n.grad);
  }
}

}  // namespace tsadapt
