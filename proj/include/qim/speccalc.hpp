#pragma once

// Hermitian spectral calculus: eigendecomposition, lifting of scalar functions
// (fractional powers, exp, log) and operator / trace / Schatten norms.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <type_traits>
#include <utility>
#include <variant>

#include "qim/errors.hpp"

namespace qim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace detail {

inline bool all_finite(const Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
  return true;
}

// Largest eigenvalue magnitude of a Hermitian matrix.
inline double hermitian_spectral_radius(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  const RealVector& ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

}  // namespace detail

/// A d x d complex matrix that is Hermitian by construction.
///
/// The constructor replaces the input A by (A + A^dagger)/2 and records
/// ||A - A^dagger||_op / 2 as the symmetrization residual, so matrices loaded
/// from files with round-off are accepted.
class HermitianOperator {
 public:
  explicit HermitianOperator(const Matrix& m) {
    if (m.rows() < 1 || m.rows() != m.cols())
      throw InputError("HermitianOperator: matrix must be square with dim >= 1");
    if (!detail::all_finite(m)) throw InputError("HermitianOperator: non-finite entry");
    const Matrix adj = m.adjoint();
    m_ = (m + adj) * 0.5;
    const Matrix skew = (m - adj) * Complex(0.0, 0.5);  // Hermitian
    residual_ = detail::hermitian_spectral_radius(skew);
  }

  static HermitianOperator identity(Index dim) {
    return HermitianOperator(Matrix::Identity(dim, dim));
  }
  static HermitianOperator zero(Index dim) { return HermitianOperator(Matrix::Zero(dim, dim)); }
  static HermitianOperator diagonal(const RealVector& d) {
    return HermitianOperator(Matrix(d.cast<Complex>().asDiagonal()));
  }

  Index dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  double symmetrization_residual() const noexcept { return residual_; }

  Complex operator()(Index i, Index j) const { return m_(i, j); }

  HermitianOperator& operator+=(const HermitianOperator& o) {
    check_dim(o);
    m_ += o.m_;
    return *this;
  }
  HermitianOperator& operator-=(const HermitianOperator& o) {
    check_dim(o);
    m_ -= o.m_;
    return *this;
  }
  HermitianOperator& operator*=(double c) {
    m_ *= c;
    return *this;
  }

  friend HermitianOperator operator+(HermitianOperator a, const HermitianOperator& b) {
    return a += b;
  }
  friend HermitianOperator operator-(HermitianOperator a, const HermitianOperator& b) {
    return a -= b;
  }
  friend HermitianOperator operator*(double c, HermitianOperator a) { return a *= c; }
  friend HermitianOperator operator*(HermitianOperator a, double c) { return a *= c; }
  friend HermitianOperator operator-(HermitianOperator a) { return a *= -1.0; }

  // A + c I
  HermitianOperator shifted(double c) const {
    HermitianOperator out(*this);
    out.m_.diagonal().array() += c;
    return out;
  }

 private:
  void check_dim(const HermitianOperator& o) const {
    if (o.dim() != dim()) throw InputError("HermitianOperator: dimension mismatch");
  }

  Matrix m_;
  double residual_ = 0.0;
};

/// Eigenvalues in ascending order together with a unitary matrix whose
/// columns are the matching eigenvectors.
struct SpectralDecomposition {
  RealVector eigenvalues;
  Matrix eigenvectors;

  Index dim() const noexcept { return eigenvalues.size(); }
  double min_eigenvalue() const { return eigenvalues(0); }
  double max_eigenvalue() const { return eigenvalues(eigenvalues.size() - 1); }

  Matrix reconstruct() const {
    return eigenvectors * eigenvalues.cast<Complex>().asDiagonal() * eigenvectors.adjoint();
  }

  // Same eigenvectors, eigenvalues shifted by c.
  SpectralDecomposition shifted(double c) const {
    SpectralDecomposition out{eigenvalues, eigenvectors};
    out.eigenvalues.array() += c;
    return out;
  }
};

inline SpectralDecomposition decompose(const HermitianOperator& a) {
  if (!detail::all_finite(a.matrix())) throw InputError("decompose: non-finite entry");
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix());
  if (es.info() != Eigen::Success) throw InputError("decompose: eigensolver did not converge");
  return SpectralDecomposition{es.eigenvalues(), es.eigenvectors()};
}

/// U diag(f(lambda)) U^dagger. Throws DomainError if f is not finite on an eigenvalue.
template <class F>
HermitianOperator apply_function(const SpectralDecomposition& d, F&& f) {
  RealVector fv(d.dim());
  for (Index i = 0; i < d.dim(); ++i) {
    const double lambda = d.eigenvalues(i);
    const double v = f(lambda);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os.precision(17);
      os << "apply_function: function undefined at eigenvalue " << lambda;
      throw DomainError(os.str());
    }
    fv(i) = v;
  }
  return HermitianOperator(d.eigenvectors * fv.cast<Complex>().asDiagonal() *
                           d.eigenvectors.adjoint());
}

inline HermitianOperator power(const SpectralDecomposition& d, double t) {
  if (t == 0.0) return HermitianOperator::identity(d.dim());
  return apply_function(d, [t](double x) {
    if (x < 0.0 || (x == 0.0 && t < 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::pow(x, t);
  });
}

inline HermitianOperator exp(const SpectralDecomposition& d) {
  return apply_function(d, [](double x) { return std::exp(x); });
}

inline HermitianOperator log(const SpectralDecomposition& d) {
  return apply_function(d, [](double x) {
    return x > 0.0 ? std::log(x) : std::numeric_limits<double>::quiet_NaN();
  });
}

/// D^a X D^b for a positive spectrum, computed in the eigenbasis of D.
/// The result is expressed in the eigenbasis (unitarily equivalent to the
/// product in the original basis), which is all the norm code needs.
inline Matrix sandwich_in_eigenbasis(const SpectralDecomposition& d, double a, const Matrix& x,
                                     double b) {
  const Index n = d.dim();
  Matrix y = d.eigenvectors.adjoint() * x * d.eigenvectors;
  for (Index j = 0; j < n; ++j) {
    const double right = std::pow(d.eigenvalues(j), b);
    for (Index i = 0; i < n; ++i) y(i, j) *= std::pow(d.eigenvalues(i), a) * right;
  }
  return y;
}

/// Largest singular value of an arbitrary square matrix, via the Hermitian
/// decomposition of its Gram matrix B^dagger B.
inline double largest_singular_value(const Matrix& b) {
  if (b.size() == 0) return 0.0;
  const Matrix gram = b.adjoint() * b;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

struct OperatorNorm {};
struct TraceNorm {};
/// Sum of lambda_i^p for a positive semidefinite operator, p in (0, 1].
struct SchattenNorm {
  double p;
};
using NormKind = std::variant<OperatorNorm, TraceNorm, SchattenNorm>;

namespace detail {

inline double schatten_sum(const RealVector& ev, double p, double scale) {
  if (!(p > 0.0 && p <= 1.0)) throw InputError("schatten norm: p must lie in (0, 1]");
  const double tol = 1e-12 * std::max(1.0, scale);
  double s = 0.0;
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol) {
      std::ostringstream os;
      os.precision(17);
      os << "schatten norm: operator is not positive semidefinite (eigenvalue " << ev(i) << ")";
      throw DomainError(os.str());
    }
    s += std::pow(std::max(0.0, ev(i)), p);
  }
  return s;
}

}  // namespace detail

inline double norm(const SpectralDecomposition& d, const NormKind& kind) {
  const RealVector& ev = d.eigenvalues;
  const double op = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, OperatorNorm>) {
          return op;
        } else if constexpr (std::is_same_v<K, TraceNorm>) {
          return ev.cwiseAbs().sum();
        } else {
          return detail::schatten_sum(ev, k.p, op);
        }
      },
      kind);
}

inline double norm(const HermitianOperator& a, const NormKind& kind) {
  return norm(decompose(a), kind);
}

inline double operator_norm(const HermitianOperator& a) { return norm(a, OperatorNorm{}); }

}  // namespace qim
