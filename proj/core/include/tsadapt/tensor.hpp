#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tsadapt {

/// Dense row-major tensor of 64-bit floats. Rank 1 or 2 covers everything
/// the backbone needs; higher ranks are unsupported on purpose.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor zeros_vec(std::size_t n);
  static Tensor identity(std::size_t n);
  static Tensor full(std::size_t rows, std::size_t cols, double v);
  /// i.i.d. N(0, sigma^2) entries from a dedicated stream.
  static Tensor gaussian(std::size_t rows, std::size_t cols, double sigma,
                         std::mt19937_64& rng);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool is_scalar() const { return data.size() == 1; }
  bool is_matrix() const { return shape.size() == 2; }

  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  std::string shape_str() const;
  bool all_finite() const;
};

// Plain (tape-free) kernels. The tape ops reuse these for their forward
// passes so both paths share one numeric implementation.

Tensor matmul(const Tensor& a, const Tensor& b);        // a(m×k) · b(k×n)
Tensor matmul_nt(const Tensor& a, const Tensor& b);     // a(m×k) · b(n×k)ᵀ
Tensor matmul_tn(const Tensor& a, const Tensor& b);     // a(k×m)ᵀ · b(k×n)
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);           // elementwise
Tensor scale(const Tensor& a, double c);
Tensor outer(const Tensor& u, const Tensor& v);         // u(m) v(n)ᵀ → m×n

double dot(const Tensor& a, const Tensor& b);
double sum_all(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

double gelu_scalar(double z);
double gelu_grad_scalar(double z);

/// FNV-1a over the raw f64 bytes; used for freeze checks.
std::uint64_t hash_bytes(const Tensor& t, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace tsadapt
