#pragma once

// Taylor expansion of lambda -> Psi(lambda) = log Tr exp(-(H + lambda V)) about 0.
//
// Coefficients come from the Kubo functions: Z(lambda) / Z(0) has Taylor
// coefficients a_k = (-1)^k K_k(V, ..., V) / k, and the coefficients of its
// logarithm follow from l_k = a_k - (1/k) sum_{j<k} j l_j a_{k-j}. The first
// three orders are cross-checked against finite differences.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "qim/bounds.hpp"
#include "qim/gibbs.hpp"
#include "qim/kubo.hpp"

namespace qim {

inline constexpr int kMaxTaylorOrder = 8;

struct TaylorProbe {
  double epsilon = 0.0;
  std::vector<double> lambda_grid;
  std::vector<double> coeffs;                     // c_0..c_N
  std::vector<std::vector<double>> partial_sums;  // [lambda index][order]
  std::vector<double> direct;                     // Psi(lambda) recomputed from scratch
  std::vector<double> fd_coeffs;                  // c_1..c_min(N,3) by finite differences
  std::vector<double> tail_ratio;                 // per lambda
  std::vector<double> envelope_ratio;             // |c_k| r^k k! / final_bound(k), k = 1..N
  double radius_bound = 0.0;
  bool converged = false;

  /// Relative error of the order-k partial sum at grid point i.
  double relative_error(std::size_t i, int k) const {
    return std::abs(partial_sums[i][k] - direct[i]) / std::max(1.0, std::abs(direct[i]));
  }
};

/// Taylor coefficients c_0..c_N of Psi along V.
inline std::vector<double> psi_taylor_coefficients(const GibbsState& s, const HermitianOperator& v,
                                                   int order) {
  if (order < 0 || order > kMaxTaylorOrder)
    throw InputError("psi_taylor_coefficients: order must lie in [0, 8]");
  if (v.dim() != s.dim()) throw InputError("psi_taylor_coefficients: dimension mismatch");
  std::vector<double> c(order + 1, 0.0);
  c[0] = s.psi();
  if (order == 0) return c;
  // Psi is linear in the identity component of V, so expand along the centered
  // direction and put the mean back into c_1.
  const double mean = reg_mean_at(s, v, 0.5);
  const HermitianOperator vc = v.shifted(-mean);
  std::vector<double> a(order + 1, 0.0), l(order + 1, 0.0);
  for (int k = 1; k <= order; ++k) {
    const double kk = kubo_n_point(s, vc, k).value;
    a[k] = ((k % 2) ? -kk : kk) / k;
  }
  for (int k = 1; k <= order; ++k) {
    double acc = a[k];
    for (int j = 1; j < k; ++j) acc -= static_cast<double>(j) / k * l[j] * a[k - j];
    l[k] = acc;
  }
  for (int k = 1; k <= order; ++k) c[k] = l[k];
  c[1] -= mean;
  return c;
}

/// Evaluate the series through order N on the lambda grid and compare with
/// Psi(lambda) recomputed directly. Every grid point must keep lambda V inside
/// the hood of s.
///
/// converged: on the grid points with |lambda| <= 0.8 min(1, radius_bound) the
/// relative error of the partial sums shrinks at least fourfold every two
/// orders in the upper half of the orders (two orders because odd or even
/// coefficients can vanish by symmetry), or is already at round-off.
///
/// tail_ratio: max over k in [ceil(N/2), N] of (|c_k| |lambda|^k)^{1/k}, the
/// root-test estimate of the geometric decay of the terms.
inline TaylorProbe taylor_probe(const GibbsState& s, const HermitianOperator& v,
                                const std::vector<double>& lambda_grid, int order, double eps) {
  require_eps_range(eps, "taylor_probe");
  if (order < 1 || order > kMaxTaylorOrder)
    throw InputError("taylor_probe: order must lie in [1, 8]");
  if (lambda_grid.empty()) throw InputError("taylor_probe: empty lambda grid");
  for (double lam : lambda_grid) {
    const HoodCheck hc = in_hood(s, lam * v, eps);
    if (!hc.ok) {
      std::ostringstream os;
      os << "in_hood: lambda = " << lam << " leaves the eps-hood (margin " << hc.margin << ")";
      throw OutOfHoodError(os.str(), hc.margin);
    }
  }

  TaylorProbe t;
  t.epsilon = eps;
  t.lambda_grid = lambda_grid;
  t.radius_bound = radius_bound(s, v, eps);
  t.coeffs = psi_taylor_coefficients(s, v, order);

  for (double lam : lambda_grid) {
    std::vector<double> ps(order + 1);
    double acc = 0.0, pw = 1.0;
    for (int k = 0; k <= order; ++k) {
      acc += t.coeffs[k] * pw;
      ps[k] = acc;
      pw *= lam;
    }
    t.partial_sums.push_back(std::move(ps));
    t.direct.push_back(lam == 0.0 ? s.psi() : raw_free_energy(s, v, lam, eps));

    double ratio = 0.0;
    for (int k = (order + 1) / 2; k <= order; ++k) {
      if (k == 0) continue;
      const double term = std::abs(t.coeffs[k]) * std::pow(std::abs(lam), k);
      ratio = std::max(ratio, std::pow(term, 1.0 / k));
    }
    t.tail_ratio.push_back(ratio);
  }

  // finite-difference cross-check of the low orders
  if (std::isfinite(t.radius_bound)) {
    const double mean = reg_mean_at(s, v, 0.5);
    const HermitianOperator vc = v.shifted(-mean);
    for (int k = 1; k <= std::min(order, 3); ++k) {
      const FrechetCheck f = frechet_check(s, k == 1 ? v : vc, k, eps);
      t.fd_coeffs.push_back(f.fd / detail::factorial(k));
    }
  } else {
    for (int k = 1; k <= std::min(order, 3); ++k) t.fd_coeffs.push_back(0.0);
  }

  // envelope from the closed-form bound
  const RealVector& p = s.rho_eigenvalues();
  double rho_beta_trace = 0.0;
  for (Index i = 0; i < p.size(); ++i) rho_beta_trace += std::pow(p(i), s.beta());
  const double nv = eps_norm(v, s.h_decomposition(), eps);
  for (int k = 1; k <= order; ++k) {
    if (nv == 0.0) {
      t.envelope_ratio.push_back(0.0);
      continue;
    }
    const std::vector<double> norms(k, nv);
    const double fb =
        closed_form_bound(rho_beta_trace, s.partition_function(), s.beta(), eps, k, norms);
    t.envelope_ratio.push_back(std::abs(t.coeffs[k]) * std::pow(t.radius_bound, k) *
                               detail::factorial(k) / fb);
  }

  constexpr double kRoundoff = 1e-13;
  const double lam_max = 0.8 * std::min(1.0, t.radius_bound);
  t.converged = true;
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (std::abs(lambda_grid[i]) > lam_max) continue;
    for (int k = order / 2; k + 2 <= order; ++k) {
      const double e0 = t.relative_error(i, k);
      const double e2 = t.relative_error(i, k + 2);
      if (e2 > kRoundoff && e2 > 0.25 * e0) t.converged = false;
    }
  }
  return t;
}

inline nlohmann::ordered_json to_json(const TaylorProbe& t) {
  nlohmann::ordered_json j;
  j["epsilon"] = t.epsilon;
  j["lambda_grid"] = t.lambda_grid;
  j["coeffs"] = t.coeffs;
  j["partial_sums"] = t.partial_sums;
  j["direct"] = t.direct;
  j["fd_coeffs"] = t.fd_coeffs;
  j["tail_ratio"] = t.tail_ratio;
  j["envelope_ratio"] = t.envelope_ratio;
  j["radius_bound"] = std::isfinite(t.radius_bound) ? nlohmann::ordered_json(t.radius_bound)
                                                    : nlohmann::ordered_json(nullptr);
  j["converged"] = t.converged;
  return j;
}

/// CSV rows: lambda, order, coefficient, partial_sum, direct.
inline void write_csv(std::ostream& os, const TaylorProbe& t) {
  os << "lambda,order,coefficient,partial_sum,direct\n";
  os.precision(17);
  for (std::size_t i = 0; i < t.lambda_grid.size(); ++i)
    for (std::size_t k = 0; k < t.coeffs.size(); ++k)
      os << t.lambda_grid[i] << ',' << k << ',' << t.coeffs[k] << ',' << t.partial_sums[i][k]
         << ',' << t.direct[i] << '\n';
}

}  // namespace qim
