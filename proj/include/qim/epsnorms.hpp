#pragma once

// The eps-norm family ||X||_eps = ||R^{1/2+eps} X R^{1/2-eps}||, R = H^{-1}, its
// endpoints (the form norm at eps = 0 and ||X R|| at eps = 1/2), and the
// comparison constants between the norms of two Hamiltonians H0 and HX.
//
// All functions take the Hamiltonian either as a HermitianOperator or as its
// SpectralDecomposition; callers that evaluate many norms against the same H
// should pass the decomposition.

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "qim/errors.hpp"
#include "qim/speccalc.hpp"

namespace qim {

inline constexpr double kGeqIdentityTol = 1e-12;

inline void require_geq_identity(const SpectralDecomposition& h, const char* who) {
  if (h.min_eigenvalue() < 1.0 - kGeqIdentityTol) {
    std::ostringstream os;
    os.precision(17);
    os << who << ": Hamiltonian must satisfy H >= I (smallest eigenvalue " << h.min_eigenvalue()
       << ")";
    throw PreconditionError(os.str());
  }
}

inline void require_eps_range(double eps, const char* who) {
  if (!(eps >= 0.0 && eps <= 0.5)) {
    std::ostringstream os;
    os << who << ": epsilon must lie in [0, 1/2], got " << eps;
    throw InputError(os.str());
  }
}

/// ||R^y X R^{1-y}|| for y in [0, 1].
inline double sandwich_norm(const HermitianOperator& x, const SpectralDecomposition& h, double y) {
  require_geq_identity(h, "sandwich_norm");
  if (!(y >= 0.0 && y <= 1.0)) throw InputError("sandwich_norm: exponent must lie in [0, 1]");
  if (x.dim() != h.dim()) throw InputError("sandwich_norm: dimension mismatch");
  return largest_singular_value(sandwich_in_eigenbasis(h, -y, x.matrix(), -(1.0 - y)));
}

inline double eps_norm(const HermitianOperator& x, const SpectralDecomposition& h, double eps) {
  require_eps_range(eps, "eps_norm");
  require_geq_identity(h, "eps_norm");
  return sandwich_norm(x, h, 0.5 + eps);
}

inline double eps_norm(const HermitianOperator& x, const HermitianOperator& h, double eps) {
  return eps_norm(x, decompose(h), eps);
}

/// ||X H^{-1}||, the operator-bound norm.
inline double omega_norm(const HermitianOperator& x, const SpectralDecomposition& h) {
  require_geq_identity(h, "omega_norm");
  if (x.dim() != h.dim()) throw InputError("omega_norm: dimension mismatch");
  return largest_singular_value(sandwich_in_eigenbasis(h, 0.0, x.matrix(), -1.0));
}

inline double omega_norm(const HermitianOperator& x, const HermitianOperator& h) {
  return omega_norm(x, decompose(h));
}

/// ||R^{1/2} X R^{1/2}||: a computable upper bound on the relative form bound
/// of X with respect to H. In finite dimension the true infimum is 0, so this
/// surrogate is what the library uses everywhere a relative bound appears.
inline double form_bound_surrogate(const HermitianOperator& x, const SpectralDecomposition& h) {
  return eps_norm(x, h, 0.0);
}

inline double form_bound_surrogate(const HermitianOperator& x, const HermitianOperator& h) {
  return form_bound_surrogate(x, decompose(h));
}

/// 11 equispaced points on [0, 1/2], both endpoints included.
inline std::vector<double> default_eps_grid() {
  std::vector<double> g(11);
  for (int i = 0; i <= 10; ++i) g[i] = 0.05 * i;
  g[10] = 0.5;
  return g;
}

inline constexpr double kMonotoneRelSlack = 1e-10;

struct EpsNormReport {
  std::vector<double> epsilon_grid;
  std::vector<double> values;
  double omega_norm = 0.0;
  double form_bound_surrogate = 0.0;
  // Largest relative decrease (values[k] - values[k+1]) / values[k+1]; <= 0 when monotone.
  double max_relative_drop = 0.0;
  bool monotone = true;
  // max_k values[k] - omega_norm, relative to omega_norm; <= 0 when every value is dominated.
  double max_excess_over_omega = 0.0;
  bool omega_dominates = true;
};

inline EpsNormReport monotonicity_scan(const HermitianOperator& x, const SpectralDecomposition& h,
                                       const std::vector<double>& grid) {
  if (grid.empty()) throw InputError("monotonicity_scan: empty epsilon grid");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    require_eps_range(grid[k], "monotonicity_scan");
    if (k > 0 && grid[k] < grid[k - 1])
      throw InputError("monotonicity_scan: epsilon grid must be sorted ascending");
  }
  EpsNormReport r;
  r.epsilon_grid = grid;
  r.values.reserve(grid.size());
  for (double e : grid) r.values.push_back(eps_norm(x, h, e));
  r.omega_norm = omega_norm(x, h);
  r.form_bound_surrogate = grid.front() == 0.0 ? r.values.front() : form_bound_surrogate(x, h);

  constexpr double tiny = std::numeric_limits<double>::min();
  r.max_relative_drop = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < r.values.size(); ++k) {
    const double drop = (r.values[k] - r.values[k + 1]) / std::max(r.values[k + 1], tiny);
    r.max_relative_drop = std::max(r.max_relative_drop, drop);
  }
  if (r.values.size() < 2) r.max_relative_drop = 0.0;
  r.monotone = r.max_relative_drop <= kMonotoneRelSlack;

  r.max_excess_over_omega = -std::numeric_limits<double>::infinity();
  for (double v : r.values)
    r.max_excess_over_omega =
        std::max(r.max_excess_over_omega, (v - r.omega_norm) / std::max(r.omega_norm, tiny));
  r.omega_dominates = r.max_excess_over_omega <= kMonotoneRelSlack;
  return r;
}

inline EpsNormReport monotonicity_scan(const HermitianOperator& x, const HermitianOperator& h,
                                       const std::vector<double>& grid = default_eps_grid()) {
  return monotonicity_scan(x, decompose(h), grid);
}

namespace detail {

// U diag(h^t) U^dagger as a plain matrix.
inline Matrix power_matrix(const SpectralDecomposition& h, double t) {
  RealVector p(h.dim());
  for (Index i = 0; i < h.dim(); ++i) p(i) = std::pow(h.eigenvalues(i), t);
  return h.eigenvectors * p.cast<Complex>().asDiagonal() * h.eigenvectors.adjoint();
}

}  // namespace detail

/// m ||Y||_eps(0) <= ||Y||_eps(X) <= M ||Y||_eps(0) with
///   M      = ||R_X^{1/2+eps} H0^{1/2+eps}|| * ||H0^{1/2-eps} R_X^{1/2-eps}||
///   1 / m  = ||R0^{1/2+eps} H_X^{1/2+eps}|| * ||H_X^{1/2-eps} R0^{1/2-eps}||
struct EquivalenceConstants {
  double m = 1.0;
  double M = 1.0;
};

/// The four factor norms entering EquivalenceConstants and the products that
/// must reproduce the identity.
struct ComparabilityReport {
  // {||R_X^{1/2+e} H0^{1/2+e}||, ||H0^{1/2-e} R_X^{1/2-e}||,
  //  ||R0^{1/2+e} H_X^{1/2+e}||, ||H_X^{1/2-e} R0^{1/2-e}||}
  std::array<double, 4> factor_norms{};
  // max over the four products A B, B A of each inverse pair of ||product - I||_op
  double max_identity_residual = 0.0;
  bool products_are_identity = false;
  // ||H_X - H0||_eps(0) and whether it is < 1
  double difference_eps_norm = 0.0;
  bool difference_is_small = false;
};

inline constexpr double kIdentityTol = 1e-9;

inline ComparabilityReport comparability_check(const SpectralDecomposition& h0,
                                               const SpectralDecomposition& hx, double eps) {
  require_eps_range(eps, "comparability_check");
  require_geq_identity(h0, "comparability_check");
  require_geq_identity(hx, "comparability_check");
  if (h0.dim() != hx.dim()) throw InputError("comparability_check: dimension mismatch");
  using detail::power_matrix;
  const double up = 0.5 + eps;
  const double lo = 0.5 - eps;

  const Matrix rx_up_h0_up = power_matrix(hx, -up) * power_matrix(h0, up);
  const Matrix h0_lo_rx_lo = power_matrix(h0, lo) * power_matrix(hx, -lo);
  const Matrix r0_up_hx_up = power_matrix(h0, -up) * power_matrix(hx, up);
  const Matrix hx_lo_r0_lo = power_matrix(hx, lo) * power_matrix(h0, -lo);

  ComparabilityReport r;
  r.factor_norms = {largest_singular_value(rx_up_h0_up), largest_singular_value(h0_lo_rx_lo),
                    largest_singular_value(r0_up_hx_up), largest_singular_value(hx_lo_r0_lo)};

  const Index d = h0.dim();
  const Matrix id = Matrix::Identity(d, d);
  const double res[] = {
      largest_singular_value(h0_lo_rx_lo * hx_lo_r0_lo - id),
      largest_singular_value(hx_lo_r0_lo * h0_lo_rx_lo - id),
      largest_singular_value(r0_up_hx_up * rx_up_h0_up - id),
      largest_singular_value(rx_up_h0_up * r0_up_hx_up - id),
  };
  for (double v : res) r.max_identity_residual = std::max(r.max_identity_residual, v);
  r.products_are_identity = r.max_identity_residual <= kIdentityTol;

  const HermitianOperator diff(hx.reconstruct() - h0.reconstruct());
  r.difference_eps_norm = eps_norm(diff, h0, eps);
  r.difference_is_small = r.difference_eps_norm < 1.0;
  return r;
}

inline ComparabilityReport comparability_check(const HermitianOperator& h0,
                                               const HermitianOperator& hx, double eps) {
  return comparability_check(decompose(h0), decompose(hx), eps);
}

inline EquivalenceConstants equivalence_constants(const SpectralDecomposition& h0,
                                                  const SpectralDecomposition& hx, double eps) {
  const ComparabilityReport c = comparability_check(h0, hx, eps);
  EquivalenceConstants k;
  k.M = c.factor_norms[0] * c.factor_norms[1];
  k.m = 1.0 / (c.factor_norms[2] * c.factor_norms[3]);
  return k;
}

inline EquivalenceConstants equivalence_constants(const HermitianOperator& h0,
                                                  const HermitianOperator& hx, double eps) {
  return equivalence_constants(decompose(h0), decompose(hx), eps);
}

}  // namespace qim
