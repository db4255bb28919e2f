#pragma once

// Kubo n-point functions of a Gibbs state,
//
//   K(V_1, ..., V_n) = Tr int_simplex rho^{a_1} V_1 rho^{a_2} V_2 ... rho^{a_n} V_n da,
//
// in closed form through divided differences of exp at the log-eigenvalues of
// rho, a Monte-Carlo estimate over the simplex, and finite-difference checks
// against derivatives of the free energy.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "qim/divdiff.hpp"
#include "qim/epsnorms.hpp"
#include "qim/errors.hpp"
#include "qim/gibbs.hpp"
#include "qim/speccalc.hpp"

namespace qim {

inline constexpr double kDefaultEnumerationCap = 1e7;

struct KuboResult {
  int n = 0;
  double value = 0.0;  // real part of the closed form
  double imag = 0.0;   // imaginary part; zero when the direction list is reversal-symmetric
  std::optional<double> oracle_value;
  std::optional<double> oracle_stderr;
  std::vector<HermitianOperator> directions;
};

namespace detail {

inline void check_directions(const GibbsState& s, std::span<const HermitianOperator> dirs,
                             const char* who) {
  if (dirs.empty()) throw InputError(std::string(who) + ": at least one direction is required");
  for (const auto& v : dirs)
    if (v.dim() != s.dim()) throw InputError(std::string(who) + ": dimension mismatch");
}

// Directions expressed in the eigenbasis of rho.
inline std::vector<Matrix> to_eigenbasis(const GibbsState& s,
                                         std::span<const HermitianOperator> dirs) {
  std::vector<Matrix> w;
  w.reserve(dirs.size());
  const Matrix& u = s.eigenvectors();
  for (const auto& v : dirs) w.push_back(u.adjoint() * v.matrix() * u);
  return w;
}

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace detail

/// Sum over index cycles (i_1, ..., i_n) of
///   (V_1)_{i_1 i_2} (V_2)_{i_2 i_3} ... (V_n)_{i_n i_1} exp[log p_{i_1}, ..., log p_{i_n}]
/// in the eigenbasis of rho. Cost is O(d^n); above `cap` tuples a ResourceError
/// is raised instead of truncating.
inline Complex kubo_closed_form(const GibbsState& s, std::span<const HermitianOperator> dirs,
                                double cap = kDefaultEnumerationCap) {
  detail::check_directions(s, dirs, "kubo_n_point");
  const int n = static_cast<int>(dirs.size());
  const Index d = s.dim();
  if (std::pow(static_cast<double>(d), n) > cap) {
    std::ostringstream os;
    os << "kubo_n_point: d^n = " << d << "^" << n << " exceeds the enumeration cap " << cap
       << "; use kubo_oracle for this size";
    throw ResourceError(os.str());
  }
  const std::vector<Matrix> w = detail::to_eigenbasis(s, dirs);
  std::vector<double> logp(d);
  for (Index i = 0; i < d; ++i) logp[i] = -(s.h_decomposition().eigenvalues(i) + s.psi());

  // Terms whose matrix-element product cannot exceed kPrune times the largest
  // possible product are skipped.
  constexpr double kPrune = 1e-16;
  std::vector<double> maxabs(n);
  for (int j = 0; j < n; ++j) maxabs[j] = w[j].cwiseAbs().maxCoeff();
  std::vector<double> suffix(n + 1, 1.0);  // suffix[k] = prod_{j >= k} maxabs[j]
  for (int j = n - 1; j >= 0; --j) suffix[j] = suffix[j + 1] * maxabs[j];
  const double threshold = kPrune * suffix[0];
  if (suffix[0] == 0.0) return Complex(0.0, 0.0);

  std::unordered_map<std::uint64_t, double> cache;
  std::vector<int> idx(n), sorted(n);
  std::vector<double> nodes(n);
  Complex total(0.0, 0.0);

  auto leaf = [&](Complex prod) {
    std::copy(idx.begin(), idx.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.end());
    std::uint64_t key = 0;
    for (int v : sorted) key = key * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(v);
    auto it = cache.find(key);
    double dd;
    if (it == cache.end()) {
      for (int j = 0; j < n; ++j) nodes[j] = logp[sorted[j]];
      dd = divdiff_exp(nodes);
      cache.emplace(key, dd);
    } else {
      dd = it->second;
    }
    total += prod * dd;
  };

  // depth k: idx[0..k] chosen, prod = W_0(i0,i1) ... W_{k-1}(i_{k-1}, i_k)
  auto recurse = [&](auto&& self, int k, Complex prod) -> void {
    if (k == n - 1) {
      const Complex closed = prod * w[n - 1](idx[n - 1], idx[0]);
      if (std::abs(closed) > threshold) leaf(closed);
      return;
    }
    for (Index i = 0; i < d; ++i) {
      const Complex next = prod * w[k](idx[k], i);
      if (std::abs(next) * suffix[k + 1] <= threshold) continue;
      idx[k + 1] = static_cast<int>(i);
      self(self, k + 1, next);
    }
  };
  for (Index i0 = 0; i0 < d; ++i0) {
    idx[0] = static_cast<int>(i0);
    recurse(recurse, 0, Complex(1.0, 0.0));
  }
  return total;
}

inline KuboResult kubo_n_point(const GibbsState& s, std::span<const HermitianOperator> dirs,
                               double cap = kDefaultEnumerationCap) {
  const Complex v = kubo_closed_form(s, dirs, cap);
  KuboResult r;
  r.n = static_cast<int>(dirs.size());
  r.value = v.real();
  r.imag = v.imag();
  r.directions.assign(dirs.begin(), dirs.end());
  return r;
}

inline KuboResult kubo_n_point(const GibbsState& s, std::initializer_list<HermitianOperator> dirs,
                               double cap = kDefaultEnumerationCap) {
  return kubo_n_point(s, std::span<const HermitianOperator>(dirs.begin(), dirs.size()), cap);
}

/// n copies of the same direction.
inline KuboResult kubo_n_point(const GibbsState& s, const HermitianOperator& v, int n,
                               double cap = kDefaultEnumerationCap) {
  if (n < 1) throw InputError("kubo_n_point: order must be >= 1");
  std::vector<HermitianOperator> dirs(static_cast<std::size_t>(n), v);
  return kubo_n_point(s, dirs, cap);
}

struct OracleEstimate {
  double value = 0.0;
  double imag = 0.0;
  double stderr_value = 0.0;
  double stderr_imag = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

/// Monte-Carlo estimate of the simplex integral: alpha is drawn uniformly on the
/// (n-1)-simplex by normalizing i.i.d. exponentials, and the integrand is
/// evaluated with powers of rho taken in its eigenbasis.
inline OracleEstimate kubo_oracle(const GibbsState& s, std::span<const HermitianOperator> dirs,
                                  std::size_t samples, std::uint64_t seed) {
  detail::check_directions(s, dirs, "kubo_oracle");
  const int n = static_cast<int>(dirs.size());
  if (n < 2) throw InputError("kubo_oracle: order must be >= 2");
  if (samples < 2) throw InputError("kubo_oracle: at least two samples are required");
  const Index d = s.dim();
  const std::vector<Matrix> w = detail::to_eigenbasis(s, dirs);
  RealVector logp(d);
  for (Index i = 0; i < d; ++i) logp(i) = -(s.h_decomposition().eigenvalues(i) + s.psi());

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> alpha(n);
  Matrix acc(d, d), scaled(d, d), tmp(d, d);
  RealVector scale(d);
  double sum_re = 0.0, sum_im = 0.0, sq_re = 0.0, sq_im = 0.0;

  for (std::size_t t = 0; t < samples; ++t) {
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      alpha[j] = expo(rng);
      total += alpha[j];
    }
    for (int j = 0; j < n; ++j) alpha[j] /= total;

    scale = (alpha[0] * logp).array().exp();
    acc = scale.cast<Complex>().asDiagonal() * w[0];
    for (int j = 1; j < n - 1; ++j) {
      scale = (alpha[j] * logp).array().exp();
      scaled = scale.cast<Complex>().asDiagonal() * w[j];
      tmp.noalias() = acc * scaled;
      acc.swap(tmp);
    }
    scale = (alpha[n - 1] * logp).array().exp();
    scaled = scale.cast<Complex>().asDiagonal() * w[n - 1];
    const Complex tr = acc.cwiseProduct(scaled.transpose()).sum();
    sum_re += tr.real();
    sum_im += tr.imag();
    sq_re += tr.real() * tr.real();
    sq_im += tr.imag() * tr.imag();
  }
  const double ns = static_cast<double>(samples);
  // uniform density on the simplex is (n-1)!
  const double vol = 1.0 / detail::factorial(n - 1);
  auto stderr_of = [ns](double sum, double sq) {
    const double mean = sum / ns;
    const double var = std::max(0.0, (sq - ns * mean * mean) / (ns - 1.0));
    return std::sqrt(var / ns);
  };
  OracleEstimate e;
  e.value = vol * sum_re / ns;
  e.imag = vol * sum_im / ns;
  e.stderr_value = vol * stderr_of(sum_re, sq_re);
  e.stderr_imag = vol * stderr_of(sum_im, sq_im);
  e.samples = samples;
  e.seed = seed;
  return e;
}

/// Attach an oracle estimate to a closed-form result.
inline KuboResult with_oracle(KuboResult r, const OracleEstimate& e) {
  r.oracle_value = e.value;
  r.oracle_stderr = e.stderr_value;
  return r;
}

/// |value - oracle| <= max(5 stderr, 1e-6 (1 + |value|)).
inline bool oracle_agrees(const KuboResult& r) {
  if (!r.oracle_value || !r.oracle_stderr) return false;
  const double tol = std::max(5.0 * *r.oracle_stderr, 1e-6 * (1.0 + std::abs(r.value)));
  return std::abs(r.value - *r.oracle_value) <= tol;
}

/// 2 eps (1 - beta) / ||V||_eps with respect to the state's Hamiltonian.
inline double radius_bound(const GibbsState& s, const HermitianOperator& v, double eps) {
  const double nv = eps_norm(v, s.h_decomposition(), eps);
  if (nv == 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * eps * (1.0 - s.beta()) / nv;
}

/// log Tr exp(-(H + lambda V)) for the state's Hamiltonian H, through perturb
/// (hood-checked). The reshift of perturb is added back so the result is a
/// smooth function of lambda.
inline double raw_free_energy(const GibbsState& s, const HermitianOperator& v, double lambda,
                              double eps) {
  const GibbsState p = perturb(s, lambda * v, eps);
  return p.psi() + p.shift_applied();
}

namespace detail {

// Fornberg weights for the order-th derivative at 0 on the nodes x.
inline std::vector<double> fd_weights(const std::vector<double>& x, int order) {
  const int npts = static_cast<int>(x.size());
  std::vector<std::vector<double>> c(npts, std::vector<double>(order + 1, 0.0));
  double c1 = 1.0, c4 = x[0];
  c[0][0] = 1.0;
  for (int i = 1; i < npts; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i];
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(npts);
  for (int i = 0; i < npts; ++i) w[i] = c[i][order];
  return w;
}

}  // namespace detail

/// n-th derivative at 0 of f by central differences on the symmetric stencil
/// {-m h, ..., m h}, m = ceil(n/2), with two levels of Richardson extrapolation
/// over the steps h, h/2, h/4.
template <class F>
double central_derivative(F&& f, int n, double h) {
  if (n < 1) throw InputError("central_derivative: order must be >= 1");
  const int m = (n + 1) / 2;
  std::vector<double> unit;
  for (int i = -m; i <= m; ++i) unit.push_back(static_cast<double>(i));
  const std::vector<double> w = detail::fd_weights(unit, n);
  auto diff = [&](double step) {
    double s = 0.0;
    for (int i = -m; i <= m; ++i)
      if (w[i + m] != 0.0) s += w[i + m] * f(i * step);
    return s / std::pow(step, n);
  };
  const double d0 = diff(h), d1 = diff(h / 2), d2 = diff(h / 4);
  const double r0 = (4.0 * d1 - d0) / 3.0;
  const double r1 = (4.0 * d2 - d1) / 3.0;
  return (16.0 * r1 - r0) / 15.0;
}

struct FrechetCheck {
  int n = 0;
  double kubo = 0.0;            // kubo_n_point with n copies of V
  double fd = 0.0;              // n-th derivative of lambda -> Psi(perturb(state, lambda V))
  int sign = 1;                 // (-1)^n
  double residual = 0.0;        // |fd - sign * kubo|
  double normalization = 1.0;   // (n-1)!
  double normalized_residual = 0.0;  // |fd - sign * (n-1)! * kubo|
  double step = 0.0;
};

inline constexpr double kCenteredTol = 1e-10;
// Default finite-difference base step as a fraction of radius_bound.
inline constexpr double kDefaultStepFraction = 0.05;

/// Finite-difference derivative of the free energy along V against the Kubo
/// n-point function. The exact relation for a centered direction and n <= 3 is
///   d^n/dlambda^n Psi = (-1)^n (n-1)! K_n(V, ..., V),
/// which coincides with (-1)^n K_n for n <= 2; both residuals are reported.
inline FrechetCheck frechet_check(const GibbsState& s, const HermitianOperator& v, int n,
                                  double eps, std::optional<double> step = std::nullopt) {
  if (n < 1) throw InputError("frechet_check: order must be >= 1");
  if (v.dim() != s.dim()) throw InputError("frechet_check: dimension mismatch");
  if (n >= 2) {
    const double mean = reg_mean_at(s, v, 0.5);
    if (std::abs(mean) > kCenteredTol * (1.0 + operator_norm(v)))
      throw PreconditionError("frechet_check: direction must be centered for n >= 2");
  }
  const double radius = radius_bound(s, v, eps);
  const double h = step.value_or(std::isfinite(radius) ? kDefaultStepFraction * radius : kDefaultStepFraction);
  if (!(h > 0.0) || (std::isfinite(radius) && h >= radius / 10.0))
    throw PreconditionError("frechet_check: step must lie in (0, radius_bound / 10)");

  FrechetCheck r;
  r.n = n;
  r.step = h;
  r.fd = central_derivative([&](double l) { return raw_free_energy(s, v, l, eps); }, n, h);
  r.kubo = kubo_n_point(s, v, n).value;
  r.sign = (n % 2 == 0) ? 1 : -1;
  r.residual = std::abs(r.fd - r.sign * r.kubo);
  r.normalization = detail::factorial(n - 1);
  r.normalized_residual = std::abs(r.fd - r.sign * r.normalization * r.kubo);
  return r;
}

inline nlohmann::ordered_json to_json(const KuboResult& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["value"] = r.value;
  j["imag"] = r.imag;
  j["oracle_value"] = r.oracle_value ? nlohmann::ordered_json(*r.oracle_value) : nullptr;
  j["oracle_stderr"] = r.oracle_stderr ? nlohmann::ordered_json(*r.oracle_stderr) : nullptr;
  nlohmann::ordered_json dirs = nlohmann::ordered_json::array();
  for (const auto& v : r.directions) dirs.push_back(to_json(v));
  j["directions"] = std::move(dirs);
  return j;
}

}  // namespace qim
