#pragma once

// Gibbs states rho = exp(-(H + psi)) with H >= I, their perturbations inside a
// chart neighbourhood ("hood"), regularized means and centered scores.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "qim/epsnorms.hpp"
#include "qim/errors.hpp"
#include "qim/matrix_io.hpp"
#include "qim/speccalc.hpp"

namespace qim {

inline constexpr double kDefaultBeta = 0.5;

/// Immutable Gibbs state. H is stored already shifted so that H >= I; the
/// shift applied by the constructing call is kept for bookkeeping.
///
/// psi = log Tr exp(-H) is the free energy of the shifted Hamiltonian. The
/// free energy of the unshifted operator is psi + shift_applied.
class GibbsState {
 public:
  GibbsState(HermitianOperator h, SpectralDecomposition hdec, double beta, double shift)
      : h_(std::move(h)), hdec_(std::move(hdec)), beta_(beta), shift_(shift) {
    // log-sum-exp of -h; the smallest eigenvalue dominates
    const double h0 = hdec_.min_eigenvalue();
    double s = 0.0;
    for (Index i = 0; i < hdec_.dim(); ++i) s += std::exp(-(hdec_.eigenvalues(i) - h0));
    psi_ = -h0 + std::log(s);
    p_.resize(hdec_.dim());
    for (Index i = 0; i < hdec_.dim(); ++i) p_(i) = std::exp(-(hdec_.eigenvalues(i) + psi_));
  }

  Index dim() const noexcept { return h_.dim(); }
  const HermitianOperator& hamiltonian() const noexcept { return h_; }
  const SpectralDecomposition& h_decomposition() const noexcept { return hdec_; }
  double psi() const noexcept { return psi_; }
  double beta() const noexcept { return beta_; }
  double shift_applied() const noexcept { return shift_; }
  double partition_function() const { return std::exp(psi_); }

  /// Eigenvalues of rho aligned with the eigenvectors of H (so descending).
  const RealVector& rho_eigenvalues() const noexcept { return p_; }
  const Matrix& eigenvectors() const noexcept { return hdec_.eigenvectors; }

  /// Decomposition of rho with eigenvalues ascending.
  SpectralDecomposition rho_decomposition() const {
    const Index d = dim();
    SpectralDecomposition out{RealVector(d), Matrix(d, d)};
    for (Index i = 0; i < d; ++i) {
      out.eigenvalues(i) = p_(d - 1 - i);
      out.eigenvectors.col(i) = hdec_.eigenvectors.col(d - 1 - i);
    }
    return out;
  }

  HermitianOperator density_matrix() const { return rho_power(1.0); }

  /// rho^t as a matrix in the original basis.
  HermitianOperator rho_power(double t) const {
    RealVector v(dim());
    for (Index i = 0; i < dim(); ++i) v(i) = std::exp(-t * (hdec_.eigenvalues(i) + psi_));
    return HermitianOperator(hdec_.eigenvectors * v.cast<Complex>().asDiagonal() *
                             hdec_.eigenvectors.adjoint());
  }

 private:
  HermitianOperator h_;
  SpectralDecomposition hdec_;
  double beta_;
  double shift_;
  double psi_ = 0.0;
  RealVector p_;
};

inline void require_beta_range(double beta, const char* who) {
  if (!(beta > 0.0 && beta < 1.0)) {
    std::ostringstream os;
    os << who << ": beta must lie in (0, 1), got " << beta;
    throw InputError(os.str());
  }
}

/// Shift H_raw by the minimal c >= 0 that makes it >= I and build its Gibbs state.
inline GibbsState make_state(const HermitianOperator& h_raw, double beta = kDefaultBeta) {
  require_beta_range(beta, "make_state");
  const SpectralDecomposition d = decompose(h_raw);
  for (Index i = 0; i < d.dim(); ++i)
    if (!std::isfinite(d.eigenvalues(i))) throw InputError("make_state: non-finite spectrum");
  const double c = std::max(0.0, 1.0 - d.min_eigenvalue());
  return GibbsState(h_raw.shifted(c), d.shifted(c), beta, c);
}

/// beta0 / (1 - a), which must stay below 1.
inline double beta_update(double beta0, double a) {
  require_beta_range(beta0, "beta_update");
  if (!(a >= 0.0 && a < 1.0)) throw InputError("beta_update: relative bound must lie in [0, 1)");
  if (a >= 1.0 - beta0) {
    std::ostringstream os;
    os << "beta_update: relative bound " << a << " >= 1 - beta0 = " << 1.0 - beta0;
    throw BetaOverflowError(os.str());
  }
  return beta0 / (1.0 - a);
}

struct HoodCheck {
  bool ok = false;
  double margin = 0.0;  // (1 - beta) - ||X||_eps
};

inline HoodCheck in_hood(const GibbsState& s, const HermitianOperator& x, double eps) {
  const double n = eps_norm(x, s.h_decomposition(), eps);
  HoodCheck h;
  h.margin = (1.0 - s.beta()) - n;
  h.ok = h.margin > 0.0;
  return h;
}

/// State of the matrix sum H + X, reshifted to >= I, with no hood check and
/// the beta tag carried over unchanged.
inline GibbsState form_sum(const GibbsState& s, const HermitianOperator& x) {
  return make_state(s.hamiltonian() + x, s.beta());
}

/// rho_X = exp(-(H + X)) / Z_X for X in the eps-hood of s; beta is updated with
/// the form-bound surrogate of X.
inline GibbsState perturb(const GibbsState& s, const HermitianOperator& x, double eps) {
  if (x.dim() != s.dim()) throw InputError("perturb: dimension mismatch");
  const HoodCheck hood = in_hood(s, x, eps);
  if (!hood.ok) {
    std::ostringstream os;
    os << "in_hood: perturbation outside the eps-hood (margin " << hood.margin << ")";
    throw OutOfHoodError(os.str(), hood.margin);
  }
  const double a = form_bound_surrogate(x, s.h_decomposition());
  const double beta = beta_update(s.beta(), a);
  return make_state(s.hamiltonian() + x, beta);
}

inline double free_energy(const GibbsState& s) { return s.psi(); }

inline std::vector<double> default_lambda_grid() { return {0.1, 0.25, 0.5, 0.75, 0.9}; }

struct RegMean {
  double mean = 0.0;    // value at lambda = 1/2
  double spread = 0.0;  // max - min over the grid
};

/// Tr(rho^lambda X rho^{1-lambda}) evaluated with full matrix products in the
/// original basis.
inline double reg_mean_at(const GibbsState& s, const HermitianOperator& x, double lambda) {
  const Matrix left = s.rho_power(lambda).matrix();
  const Matrix right = s.rho_power(1.0 - lambda).matrix();
  const Matrix lx = left * x.matrix();
  // Tr(A B) = sum_ij A_ij B_ji
  return (lx.cwiseProduct(right.transpose())).sum().real();
}

inline RegMean reg_mean(const GibbsState& s, const HermitianOperator& x,
                        const std::vector<double>& lambda_grid = default_lambda_grid()) {
  if (lambda_grid.empty()) throw InputError("reg_mean: empty lambda grid");
  if (x.dim() != s.dim()) throw InputError("reg_mean: dimension mismatch");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double l : lambda_grid) {
    if (!(l > 0.0 && l < 1.0)) throw InputError("reg_mean: lambda must lie in (0, 1)");
    const double v = reg_mean_at(s, x, l);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return RegMean{reg_mean_at(s, x, 0.5), hi - lo};
}

/// The score X - (rho . X) I.
inline HermitianOperator center(const GibbsState& s, const HermitianOperator& x) {
  return x.shifted(-reg_mean_at(s, x, 0.5));
}

inline nlohmann::ordered_json to_json(const GibbsState& s) {
  nlohmann::ordered_json j;
  j["H"] = to_json(s.hamiltonian());
  j["psi"] = s.psi();
  j["beta"] = s.beta();
  j["shift_applied"] = s.shift_applied();
  std::vector<double> ev(s.rho_eigenvalues().data(),
                         s.rho_eigenvalues().data() + s.rho_eigenvalues().size());
  j["rho_eigenvalues"] = ev;
  return j;
}

}  // namespace qim
