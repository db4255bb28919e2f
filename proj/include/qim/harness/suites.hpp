#pragma once

// The verification suites and the orchestrator that runs them over an ensemble.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "qim/bounds.hpp"
#include "qim/epsnorms.hpp"
#include "qim/gibbs.hpp"
#include "qim/harness/config.hpp"
#include "qim/harness/ensemble.hpp"
#include "qim/harness/report.hpp"
#include "qim/kubo.hpp"
#include "qim/manifold.hpp"
#include "qim/taylor.hpp"

namespace qim::harness {

/// Shared state of one instance: the base state and its perturbation by X.
struct SuiteContext {
  const RunConfig& config;
  const Instance& instance;
  std::string prefix;  // suite/s<seed>/i<index>

  GibbsState base() const { return make_state(instance.h0, config.beta0); }

  /// Generator private to (seed, instance, salt).
  std::mt19937_64 rng(std::uint32_t salt) const {
    std::seed_seq seq{static_cast<std::uint32_t>(instance.seed),
                      static_cast<std::uint32_t>(instance.seed >> 32),
                      static_cast<std::uint32_t>(instance.index), salt};
    return std::mt19937_64(seq);
  }

  Record record(const std::string& tag, const std::string& anchor, double margin,
                double tolerance, bool gating = true) const {
    Record r;
    r.name = tag.empty() ? prefix : prefix + "/" + tag;
    r.anchor = anchor;
    r.margin = margin;
    r.tolerance = tolerance;
    r.pass = passes(margin, tolerance);
    r.gating = gating;
    return r;
  }
};

using SuiteFn = std::function<std::vector<Record>(const SuiteContext&)>;

namespace suites {

inline std::vector<Record> lemma2_monotonicity(const SuiteContext& c) {
  const SpectralDecomposition hd = decompose(c.instance.h0);
  const EpsNormReport r = monotonicity_scan(c.instance.x, hd, default_eps_grid());
  return {c.record("monotone", "eps-norm nondecreasing in eps", -r.max_relative_drop,
                   kMonotoneRelSlack),
          c.record("omega", "eps-norm below ||X R||", -r.max_excess_over_omega,
                   kMonotoneRelSlack)};
}

inline std::vector<Record> lemma1_formbound(const SuiteContext& c) {
  // |<psi, X psi>| <= a <psi, H psi> with a = ||R^{1/2} X R^{1/2}||, attained on
  // the extremal generalized eigenvector.
  const SpectralDecomposition hd = decompose(c.instance.h0);
  const double a = form_bound_surrogate(c.instance.x, hd);
  const Matrix b = sandwich_in_eigenbasis(hd, -0.5, c.instance.x.matrix(), -0.5);
  Eigen::SelfAdjointEigenSolver<Matrix> es(b);
  RealVector rsqrt(hd.dim());
  for (Index i = 0; i < hd.dim(); ++i) rsqrt(i) = 1.0 / std::sqrt(hd.eigenvalues(i));
  const Matrix to_orig = hd.eigenvectors * rsqrt.cast<Complex>().asDiagonal();
  const Matrix& h = c.instance.h0.matrix();
  const Matrix& x = c.instance.x.matrix();

  auto ratio = [&](const Eigen::VectorXcd& psi) {
    const double num = std::abs(psi.dot(x * psi));
    const double den = psi.dot(h * psi).real();
    return num / den;
  };
  double worst = 0.0;
  auto rng = c.rng(1);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 64; ++t) {
    Eigen::VectorXcd psi(hd.dim());
    for (Index i = 0; i < hd.dim(); ++i) psi(i) = Complex(normal(rng), normal(rng));
    worst = std::max(worst, ratio(psi));
  }
  const Index top = std::abs(es.eigenvalues()(0)) > std::abs(es.eigenvalues()(hd.dim() - 1))
                        ? 0
                        : hd.dim() - 1;
  const double attained = ratio(to_orig * es.eigenvectors().col(top));
  worst = std::max(worst, attained);
  return {c.record("bound", "form bound by ||R^1/2 X R^1/2||", (a - worst) / std::max(1.0, a),
                   1e-10),
          c.record("sharp", "form bound attained", -std::abs(attained - a) / std::max(1.0, a),
                   1e-10)};
}

inline std::vector<Record> norm_equivalence(const SuiteContext& c) {
  const double eps = c.config.epsilon;
  const GibbsState s0 = c.base();
  const GibbsState sx = perturb(s0, c.instance.x, eps);
  const EquivalenceConstants k = equivalence_constants(s0.h_decomposition(), sx.h_decomposition(),
                                                       eps);
  auto rng = c.rng(2);
  double worst = std::numeric_limits<double>::infinity();
  for (int t = 0; t < c.config.norm_samples; ++t) {
    const HermitianOperator y = gaussian_hermitian(c.config.dim, "dense", rng);
    const double ratio =
        eps_norm(y, sx.h_decomposition(), eps) / eps_norm(y, s0.h_decomposition(), eps);
    worst = std::min({worst, ratio / k.m - 1.0, 1.0 - ratio / k.M});
  }
  return {c.record("bracket", "m <= ||Y||_eps(X) / ||Y||_eps(0) <= M", worst, 1e-9)};
}

inline std::vector<Record> comparability(const SuiteContext& c) {
  const double eps = c.config.epsilon;
  const GibbsState s0 = c.base();
  const GibbsState sx = perturb(s0, c.instance.x, eps);
  const ComparabilityReport r =
      comparability_check(s0.h_decomposition(), sx.h_decomposition(), eps);
  return {c.record("inverse", "factor products reproduce the identity", -r.max_identity_residual,
                   kIdentityTol),
          c.record("difference", "||H_X - H_0||_eps < 1", 1.0 - r.difference_eps_norm, 0.0)};
}

inline std::vector<Record> mean_lambda(const SuiteContext& c) {
  const GibbsState s0 = c.base();
  std::vector<Record> out;
  const RegMean rx = reg_mean(s0, c.instance.x);
  out.push_back(c.record("X", "regularized mean independent of lambda", -rx.spread,
                         1e-10 * (1.0 + std::abs(rx.mean))));
  for (std::size_t j = 0; j < c.instance.v.size(); ++j) {
    const RegMean rv = reg_mean(s0, c.instance.v[j]);
    out.push_back(c.record("V" + std::to_string(j + 1), "regularized mean independent of lambda",
                           -rv.spread, 1e-10 * (1.0 + std::abs(rv.mean))));
  }
  return out;
}

inline std::vector<Record> kubo_oracle(const SuiteContext& c) {
  const GibbsState s0 = c.base();
  std::vector<Record> out;
  for (int n = 2; n <= c.config.max_order; ++n) {
    std::span<const HermitianOperator> dirs(c.instance.v.data(), static_cast<std::size_t>(n));
    const KuboResult k = kubo_n_point(s0, dirs);
    const std::uint64_t seed = (c.instance.seed << 20) ^ (static_cast<std::uint64_t>(c.instance.index) << 4) ^
                               static_cast<std::uint64_t>(n);
    const OracleEstimate e = kubo_oracle(s0, dirs, c.config.oracle_samples, seed);
    const double tol = std::max(5.0 * e.stderr_value, 1e-6 * (1.0 + std::abs(k.value)));
    out.push_back(c.record("n" + std::to_string(n), "closed form within 5 standard errors of MC",
                           -std::abs(k.value - e.value), tol));
  }
  return out;
}

inline std::vector<Record> frechet(const SuiteContext& c) {
  const double eps = c.config.epsilon;
  const GibbsState s0 = c.base();
  const HermitianOperator v = center(s0, c.instance.v.front());
  std::vector<Record> out;
  for (int n = 1; n <= 4; ++n) {
    const FrechetCheck f = frechet_check(s0, v, n, eps);
    const double tol = 1e-6 * (1.0 + std::abs(f.kubo));
    const std::string tag = "n" + std::to_string(n);
    out.push_back(c.record(tag, "derivative = (-1)^n Kubo_n", -f.residual, tol, n <= 3));
    if (n >= 3)
      out.push_back(c.record(tag + "/normalized", "derivative = (-1)^n (n-1)! Kubo_n",
                             -f.normalized_residual, tol, false));
  }
  return out;
}

inline std::vector<Record> estimate_chain(const SuiteContext& c) {
  const double eps = c.config.epsilon;
  const GibbsState s0 = c.base();
  const double target = 0.5 * 2.0 * eps * (1.0 - s0.beta());
  std::vector<HermitianOperator> dirs;
  for (const auto& v : c.instance.v)
    dirs.push_back(scale_to_eps_norm(v, s0.h_decomposition(), eps, target));
  std::vector<Record> out;
  for (int n = 1; n <= c.config.max_order; ++n) {
    const BoundLedger L = qim::estimate_chain(
        s0, std::span<const HermitianOperator>(dirs.data(), static_cast<std::size_t>(n)), eps);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& f : L.factor_margins)
      if (f.gating) worst = std::min(worst, f.margin / std::max(1.0, std::abs(f.rhs)));
    const std::string tag = "n" + std::to_string(n);
    out.push_back(c.record(tag + "/factors", "every factor bound holds", worst, kFactorRelSlack));
    out.push_back(c.record(tag + "/dominated", "|Kubo_n| below the product of factor bounds",
                           (L.product_bound - L.kubo_abs) / std::max(1.0, L.product_bound),
                           0.0));
    out.push_back(c.record(tag + "/closed-form", "|Kubo_n| below the closed-form bound",
                           (L.final_bound - L.kubo_abs) / std::max(1.0, L.final_bound), 0.0,
                           false));
  }
  return out;
}

inline std::vector<Record> taylor_radius(const SuiteContext& c) {
  const double eps = c.config.epsilon;
  const GibbsState s0 = c.base();
  const GibbsState sx = perturb(s0, c.instance.x, eps);
  const HermitianOperator w = scale_to_eps_norm(c.instance.v.front(), sx.h_decomposition(), eps,
                                                0.5 * 2.0 * eps * (1.0 - sx.beta()));
  const double r = radius_bound(sx, w, eps);
  const std::vector<double> grid = {-0.5 * r, -0.25 * r, 0.25 * r, 0.5 * r};
  const TaylorProbe t = taylor_probe(sx, w, grid, c.config.taylor_order, eps);
  double err = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    err = std::max(err, t.relative_error(i, c.config.taylor_order));
    tail = std::max(tail, t.tail_ratio[i]);
  }
  double fd = 0.0;
  for (std::size_t k = 0; k < t.fd_coeffs.size(); ++k)
    fd = std::max(fd, std::abs(t.fd_coeffs[k] - t.coeffs[k + 1]) /
                          (1.0 + std::abs(t.coeffs[k + 1])));
  return {c.record("partial-sum", "partial sums match Psi at half the radius", -err, 1e-6),
          c.record("tail", "geometric decay of terms (ratio < 0.9)", 0.9 - tail, 0.0),
          c.record("fd", "low-order coefficients match finite differences", -fd, 1e-6),
          c.record("converged", "partial-sum errors shrink in the tail", t.converged ? 0.0 : -1.0,
                   0.0)};
}

inline std::vector<Record> transport_suite(const SuiteContext& c) {
  const double eps = c.config.epsilon;
  const GibbsState s0 = c.base();
  const GibbsState sa = perturb(s0, c.instance.x, eps);
  const GibbsState sb = perturb(s0, c.instance.v.front(), eps);
  auto rng = c.rng(3);
  const HermitianOperator z1 = gaussian_hermitian(c.config.dim, "dense", rng);
  const HermitianOperator z2 = gaussian_hermitian(c.config.dim, "dense", rng);
  const double lam = 0.3;
  const double scale = 1.0 + operator_norm(z1) + operator_norm(z2);

  const HermitianOperator via =
      transport(transport(z1, s0, sa), sa, sb);
  const double flat = operator_norm(via - transport(z1, s0, sb)) / scale;
  const HermitianOperator mix = lam * z1 + (1.0 - lam) * z2;
  const double affine = operator_norm(transport(mix, s0, sa) - (lam * transport(z1, s0, sa) +
                                                               (1.0 - lam) * transport(z2, s0, sa))) /
                        scale;
  const double zero = operator_norm(transport(HermitianOperator::zero(c.config.dim), s0, sa));

  const HermitianOperator y = scale_to_eps_norm(
      gaussian_hermitian(c.config.dim, "dense", rng), sa.h_decomposition(), eps,
      0.5 * (1.0 - sa.beta()));
  const ChartTransition ct = chart_transition(s0, c.instance.x, y, eps);
  const double bracket =
      std::min(ct.norm_ratio / ct.constants.m - 1.0, 1.0 - ct.norm_ratio / ct.constants.M);
  return {c.record("flat", "transport is path independent", -flat, 1e-13),
          c.record("affine", "transport preserves mixtures", -affine, 1e-13),
          c.record("zero", "transport maps 0 to 0", -zero, 0.0),
          c.record("transition", "chart transition ratio within [m, M]", bracket, kBracketTol),
          c.record("transition-state", "both charts give the same state", -ct.direct_deviation,
                   1e-11)};
}

inline std::vector<Record> route_independence(const SuiteContext& c) {
  const double eps = c.config.epsilon;
  const GibbsState s0 = c.base();
  auto rng = c.rng(4);
  const SpectralDecomposition& hd = s0.h_decomposition();
  const double small = 0.1 * (1.0 - s0.beta() - c.config.perturbation.target_eps_norm) + 0.02;
  const HermitianOperator a =
      scale_to_eps_norm(gaussian_hermitian(c.config.dim, "dense", rng), hd, eps, small);
  const HermitianOperator b =
      scale_to_eps_norm(gaussian_hermitian(c.config.dim, "dense", rng), hd, eps, small);
  const HermitianOperator third = (1.0 / 3.0) * c.instance.x;
  const std::vector<HermitianOperator> parts = {third + a, third + b, third - a - b};
  const RouteReport r = qim::route_independence(s0, parts, eps);
  return {c.record("split3", "stepwise and single-shot states agree", -r.max_rho_deviation,
                   1e-11)};
}

}  // namespace suites

inline const std::map<std::string, std::pair<SuiteFn, std::string>>& suite_table() {
  static const std::map<std::string, std::pair<SuiteFn, std::string>> t = {
      {"lemma2-monotonicity", {suites::lemma2_monotonicity, "eps-norm monotone in eps"}},
      {"lemma1-formbound", {suites::lemma1_formbound, "relative form bound"}},
      {"norm-equivalence", {suites::norm_equivalence, "equivalence of eps-norms"}},
      {"comparability", {suites::comparability, "comparison factors"}},
      {"mean-lambda", {suites::mean_lambda, "regularized mean"}},
      {"kubo-oracle", {suites::kubo_oracle, "Kubo closed form vs Monte Carlo"}},
      {"frechet", {suites::frechet, "free-energy derivatives"}},
      {"estimate-chain", {suites::estimate_chain, "factor bounds for Kubo_n"}},
      {"taylor-radius", {suites::taylor_radius, "Taylor convergence"}},
      {"transport", {suites::transport_suite, "(+1)-transport and chart transitions"}},
      {"route-independence", {suites::route_independence, "route independence"}},
  };
  return t;
}

/// Run one suite on one instance; module errors become a failed record.
inline std::vector<Record> run_one(const RunConfig& cfg, const Instance& inst,
                                   const std::string& suite) {
  const auto& [fn, anchor] = suite_table().at(suite);
  SuiteContext ctx{cfg, inst,
                   suite + "/s" + std::to_string(inst.seed) + "/i" + std::to_string(inst.index)};
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Record> out;
  try {
    out = fn(ctx);
  } catch (const OutOfHoodError& e) {
    Record r = ctx.record("error", anchor, e.margin(), 0.0);
    r.pass = false;
    r.error = e.what();
    out = {r};
  } catch (const std::exception& e) {
    Record r = ctx.record("error", anchor, std::numeric_limits<double>::quiet_NaN(), 0.0);
    r.pass = false;
    r.error = e.what();
    out = {r};
  }
  const double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (auto& r : out) {
    r.suite = suite;
    r.runtime = dt / static_cast<double>(out.size());
  }
  return out;
}

/// Worker count from QIM_THREADS, else the hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv("QIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("QIM_THREADS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Run the configured suites over every seed's ensemble. Records are ordered
/// by seed, then suite (config order), then instance, independent of threads.
inline Report run_suite(const RunConfig& cfg, unsigned threads = thread_count()) {
  validate(cfg);
  Report rep;
  rep.environment.seeds = cfg.seeds;
  rep.environment.config_hash = config_hash(cfg);
  rep.environment.timestamp = utc_timestamp();
  rep.environment.threads = threads;

  struct Task {
    const Instance* inst;
    const std::string* suite;
  };
  std::vector<std::vector<Instance>> ensembles;
  for (std::uint64_t seed : cfg.seeds) ensembles.push_back(gen_ensemble(cfg, seed));
  std::vector<Task> tasks;
  for (const auto& ens : ensembles)
    for (const auto& suite : cfg.suites)
      for (const auto& inst : ens) tasks.push_back({&inst, &suite});

  rep.empty_ensemble_warning = cfg.instances == 0;
  std::vector<std::vector<Record>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++)
      results[i] = run_one(cfg, *tasks[i].inst, *tasks[i].suite);
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(tasks.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (auto& r : results)
    for (auto& rec : r) rep.records.push_back(std::move(rec));
  return rep;
}

}  // namespace qim::harness
