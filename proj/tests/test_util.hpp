#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "magcn/params.hpp"
#include "magcn/tensor.hpp"

namespace magcn::testing {

inline Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -2.0, double hi = 2.0,
                            bool requires_grad = false) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::matrix(rows, cols, std::move(v), requires_grad);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

/// Row i of the result is row perm[i] of x.
inline Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  return gather_rows(x, perm).detach();
}

/// P A P^T for the permutation above.
inline Tensor permute_square(const Tensor& a, const std::vector<std::size_t>& perm) {
  const std::size_t n = perm.size();
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.at(perm[i], perm[j]);
  return Tensor::matrix(n, n, std::move(out));
}

inline std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  rng.shuffle(p);
  return p;
}

inline Tensor matrix_from(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor::matrix(rows, cols, std::move(v));
}

}  // namespace magcn::testing
