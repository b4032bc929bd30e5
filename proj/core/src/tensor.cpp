#include "tsadapt/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "tsadapt/errors.hpp"

namespace tsadapt {

namespace {

using MatMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                   Eigen::Dynamic, Eigen::RowMajor>>;

ConstMatMap map_of(const Tensor& t, std::size_t r, std::size_t c) {
  return ConstMatMap(t.data.data(), static_cast<Eigen::Index>(r),
                     static_cast<Eigen::Index>(c));
}

void require_matrix(const Tensor& t, const char* who) {
  if (t.shape.size() != 2) {
    throw ShapeError(std::string(who) + ": expected a matrix, got shape " +
                     t.shape_str());
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  std::size_t n = 1;
  for (std::size_t dim : shape) n *= dim;
  if (n != data.size()) {
    throw ShapeError("tensor: shape " + shape_str() + " does not cover " +
                     std::to_string(data.size()) + " elements");
  }
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, 0.0));
}

Tensor Tensor::zeros_vec(std::size_t n) {
  return Tensor({n}, std::vector<double>(n, 0.0));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double v) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, v));
}

Tensor Tensor::gaussian(std::size_t rows, std::size_t cols, double sigma,
                        std::mt19937_64& rng) {
  Tensor t = zeros(rows, cols);
  std::normal_distribution<double> dist(0.0, sigma);
  for (double& v : t.data) v = dist(rng);
  return t;
}

std::size_t Tensor::rows() const {
  if (shape.empty()) return 1;
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.size() < 2) return shape.empty() ? 1 : shape[0];
  return shape[1];
}

double& Tensor::at(std::size_t i, std::size_t j) {
  return data[i * shape[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return data[i * shape[1] + j];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.shape[1] != b.shape[0]) {
    throw ShapeError("matmul: inner dimensions disagree, " + a.shape_str() +
                     " vs " + b.shape_str());
  }
  Tensor out = Tensor::zeros(a.shape[0], b.shape[1]);
  MatMap(out.data.data(), a.shape[0], b.shape[1]) =
      map_of(a, a.shape[0], a.shape[1]) * map_of(b, b.shape[0], b.shape[1]);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.shape[1] != b.shape[1]) {
    throw ShapeError("matmul_nt: inner dimensions disagree, " + a.shape_str() +
                     " vs " + b.shape_str() + " transposed");
  }
  Tensor out = Tensor::zeros(a.shape[0], b.shape[0]);
  MatMap(out.data.data(), a.shape[0], b.shape[0]) =
      map_of(a, a.shape[0], a.shape[1]) *
      map_of(b, b.shape[0], b.shape[1]).transpose();
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (a.shape[0] != b.shape[0]) {
    throw ShapeError("matmul_tn: inner dimensions disagree, " + a.shape_str() +
                     " transposed vs " + b.shape_str());
  }
  Tensor out = Tensor::zeros(a.shape[1], b.shape[1]);
  MatMap(out.data.data(), a.shape[1], b.shape[1]) =
      map_of(a, a.shape[0], a.shape[1]).transpose() *
      map_of(b, b.shape[0], b.shape[1]);
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor out = Tensor::zeros(a.shape[1], a.shape[0]);
  for (std::size_t i = 0; i < a.shape[0]; ++i)
    for (std::size_t j = 0; j < a.shape[1]; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("add: shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("sub: shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("mul: shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  for (double& v : out.data) v *= c;
  return out;
}

Tensor outer(const Tensor& u, const Tensor& v) {
  Tensor out = Tensor::zeros(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j)
      out.at(i, j) = u.data[i] * v.data[j];
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: size mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

double sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += v;
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError("max_abs_diff: size mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

double gelu_scalar(double z) {
  return 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0)));
}

double gelu_grad_scalar(double z) {
  const double cdf = 0.5 * (1.0 + std::erf(z / std::sqrt(2.0)));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return cdf + z * pdf;
}

std::uint64_t hash_bytes(const Tensor& t, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (double v : t.data) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (bits >> (8 * byte)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace tsadapt
