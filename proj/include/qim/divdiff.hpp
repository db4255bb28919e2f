#pragma once

// Divided differences of the exponential, exp[x_1, ..., x_n], including
// coincident and nearly coincident nodes.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "qim/errors.hpp"

namespace qim {

// Sub-ranges of the sorted nodes whose spread is at most this are evaluated
// by a power series around their midpoint instead of the Newton recursion.
inline constexpr double kDivdiffClusterSpread = 1.0;

namespace detail {

// exp[y_0..y_{m-1}] = exp(c) * sum_k h_k(y - c) / (k + m - 1)!, with h_k the
// complete homogeneous symmetric polynomials and c the midpoint.
inline double divdiff_exp_series(const double* y, int m) {
  constexpr int kTerms = 40;
  double lo = y[0], hi = y[0];
  for (int i = 1; i < m; ++i) {
    lo = std::min(lo, y[i]);
    hi = std::max(hi, y[i]);
  }
  const double c = 0.5 * (lo + hi);
  double h[kTerms + 1] = {1.0};
  for (int i = 0; i < m; ++i) {
    const double z = y[i] - c;
    for (int k = 1; k <= kTerms; ++k) h[k] += z * h[k - 1];
  }
  double inv_fact = 1.0;  // 1 / (m - 1)!
  for (int k = 2; k < m; ++k) inv_fact /= k;
  double sum = 0.0;
  double prev = 1.0;
  for (int k = 0; k <= kTerms; ++k) {
    const double term = h[k] * inv_fact;
    sum += term;
    // odd terms vanish for symmetric node sets, so require two small terms in a row
    if (k > 2 && std::abs(term) + std::abs(prev) <= 1e-18 * std::abs(sum)) break;
    prev = term;
    inv_fact /= (k + m);
  }
  return std::exp(c) * sum;
}

}  // namespace detail

/// exp[x_1, ..., x_n]: the (n-1)-st divided difference of exp, equal to the
/// integral of exp(sum_j a_j x_j) over the standard simplex. Symmetric in its
/// arguments and continuous at coincident nodes.
inline double divdiff_exp(std::span<const double> nodes) {
  const int m = static_cast<int>(nodes.size());
  if (m == 0) throw InputError("divdiff_exp: at least one node is required");
  std::vector<double> y(nodes.begin(), nodes.end());
  for (double v : y)
    if (!std::isfinite(v)) throw InputError("divdiff_exp: non-finite node");
  std::sort(y.begin(), y.end());
  const double top = y.back();
  for (double& v : y) v -= top;

  if (y.back() - y.front() <= kDivdiffClusterSpread)
    return std::exp(top) * detail::divdiff_exp_series(y.data(), m);

  std::vector<double> dd(m);
  for (int i = 0; i < m; ++i) dd[i] = std::exp(y[i]);
  for (int k = 1; k < m; ++k) {
    for (int i = 0; i + k < m; ++i) {
      const double gap = y[i + k] - y[i];
      dd[i] = gap <= kDivdiffClusterSpread ? detail::divdiff_exp_series(&y[i], k + 1)
                                           : (dd[i + 1] - dd[i]) / gap;
    }
  }
  return std::exp(top) * dd[0];
}

inline double divdiff_exp(std::initializer_list<double> nodes) {
  return divdiff_exp(std::span<const double>(nodes.begin(), nodes.size()));
}

}  // namespace qim
