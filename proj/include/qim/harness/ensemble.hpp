#pragma once

// Seeded random instances {H0, X, V_1..V_n}.

#include <cmath>
#include <random>
#include <vector>

#include "qim/epsnorms.hpp"
#include "qim/harness/config.hpp"
#include "qim/speccalc.hpp"

namespace qim::harness {

struct Instance {
  std::uint64_t seed;
  int index;
  HermitianOperator h0;
  HermitianOperator x;  // ||X||_eps(H0) = target
  std::vector<HermitianOperator> v;  // max_order directions, same normalization
};

/// Diagonal H0 with h_k = 1 + c k^s, k = 0..dim-1 (s = 1 for the linear kind).
inline HermitianOperator make_h0(const RunConfig& c) {
  RealVector h(c.dim);
  const double s = c.spectrum.kind == "linear" ? 1.0 : c.spectrum.s;
  for (int k = 0; k < c.dim; ++k) h(k) = 1.0 + c.spectrum.c * std::pow(static_cast<double>(k), s);
  return HermitianOperator::diagonal(h);
}

/// Gaussian Hermitian matrix of the given kind: complex standard normal entries
/// symmetrized, with the off-diagonal (diagonal kind) or diagonal (offdiag kind)
/// part removed.
inline HermitianOperator gaussian_hermitian(int dim, const std::string& kind,
                                            std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      a(i, j) = Complex(re, im);
    }
  if (kind == "diagonal") {
    const Matrix diag = a.diagonal().real().cast<Complex>().asDiagonal();
    a = diag;
  } else if (kind == "offdiag") {
    a.diagonal().setZero();
  }
  return HermitianOperator(a);
}

/// Rescale x so that its eps-norm with respect to h equals target.
inline HermitianOperator scale_to_eps_norm(const HermitianOperator& x,
                                           const SpectralDecomposition& h, double eps,
                                           double target) {
  const double n = eps_norm(x, h, eps);
  if (n == 0.0) throw InputError("scale_to_eps_norm: zero operator cannot be rescaled");
  return (target / n) * x;
}

/// Instance k of seed s uses its own generator seeded from (s, k), so
/// instances can be generated and evaluated in any order.
inline Instance make_instance(const RunConfig& c, std::uint64_t seed, int k) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k)};
  std::mt19937_64 rng(seq);
  const HermitianOperator h0 = make_h0(c);
  const SpectralDecomposition hd = decompose(h0);
  const double eps = c.epsilon;
  const double target = c.perturbation.target_eps_norm;
  Instance inst{seed, k, h0,
                scale_to_eps_norm(gaussian_hermitian(c.dim, c.perturbation.kind, rng), hd, eps,
                                  target),
                {}};
  for (int j = 0; j < c.max_order; ++j)
    inst.v.push_back(
        scale_to_eps_norm(gaussian_hermitian(c.dim, c.perturbation.kind, rng), hd, eps, target));
  return inst;
}

inline std::vector<Instance> gen_ensemble(const RunConfig& c, std::uint64_t seed) {
  validate(c);
  std::vector<Instance> out;
  out.reserve(static_cast<std::size_t>(c.instances));
  for (int k = 0; k < c.instances; ++k) out.push_back(make_instance(c, seed, k));
  return out;
}

}  // namespace qim::harness
