#pragma once

// Charts, mixtures, (+1)-parallel transport and route independence on the
// manifold of perturbed Gibbs states.

#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "qim/epsnorms.hpp"
#include "qim/gibbs.hpp"
#include "qim/speccalc.hpp"

namespace qim {

struct ChartPoint {
  GibbsState base;
  HermitianOperator score;           // centered coordinate
  HermitianOperator representative;  // the X it was built from
  double epsilon = 0.0;

  /// State at this point of the chart.
  GibbsState state() const { return perturb(base, score, epsilon); }
};

inline ChartPoint to_chart(const GibbsState& base, const HermitianOperator& x, double eps) {
  const HoodCheck hc = in_hood(base, x, eps);
  if (!hc.ok) {
    std::ostringstream os;
    os << "in_hood: to_chart representative outside the eps-hood (margin " << hc.margin << ")";
    throw OutOfHoodError(os.str(), hc.margin);
  }
  return ChartPoint{base, center(base, x), x, eps};
}

/// rho_{lam X + (1 - lam) Y}.
inline GibbsState plus_mixture(const GibbsState& base, const HermitianOperator& x,
                               const HermitianOperator& y, double lam, double eps) {
  if (!(lam >= 0.0 && lam <= 1.0)) throw InputError("plus_mixture: lambda must lie in [0, 1]");
  for (const HermitianOperator* z : {&x, &y}) {
    const HoodCheck hc = in_hood(base, *z, eps);
    if (!hc.ok) {
      std::ostringstream os;
      os << "in_hood: plus_mixture endpoint outside the eps-hood (margin " << hc.margin << ")";
      throw OutOfHoodError(os.str(), hc.margin);
    }
  }
  return perturb(base, lam * x + (1.0 - lam) * y, eps);
}

inline constexpr double kDensityTol = 1e-10;

inline void require_density(const HermitianOperator& rho, const char* who) {
  const double tr = rho.matrix().trace().real();
  const SpectralDecomposition d = decompose(rho);
  std::ostringstream os;
  if (std::abs(tr - 1.0) > kDensityTol) {
    os << who << ": trace " << tr << " is not 1";
    throw InputError(os.str());
  }
  if (d.min_eigenvalue() < -kDensityTol) {
    os << who << ": negative eigenvalue " << d.min_eigenvalue();
    throw InputError(os.str());
  }
}

/// lam rho1 + (1 - lam) rho2.
inline HermitianOperator minus_mixture(const HermitianOperator& rho1, const HermitianOperator& rho2,
                                       double lam) {
  if (!(lam >= 0.0 && lam <= 1.0)) throw InputError("minus_mixture: lambda must lie in [0, 1]");
  if (rho1.dim() != rho2.dim()) throw InputError("minus_mixture: dimension mismatch");
  require_density(rho1, "minus_mixture");
  require_density(rho2, "minus_mixture");
  return lam * rho1 + (1.0 - lam) * rho2;
}

/// Recenter Z on the score hyperplane of dst. The source only fixes the
/// representative line {Z + a I}, which recentering ignores.
inline HermitianOperator transport(const HermitianOperator& z, const GibbsState& /*src*/,
                                   const GibbsState& dst) {
  return center(dst, z);
}

struct ChartTransition {
  std::optional<ChartPoint> coord_in_0;  // present when X + Y is in the hood of base0
  ChartPoint coord_in_x;
  double norm_ratio = 1.0;  // ||Y||_eps(X) / ||Y||_eps(0)
  EquivalenceConstants constants;
  bool in_bracket = true;
  // operator-norm distances between rho_{X+Y} computed in the two charts and
  // directly from H0 + X + Y
  double chart_deviation = 0.0;
  double direct_deviation = 0.0;
};

inline constexpr double kBracketTol = 1e-9;

/// Express rho_{X+Y} in the chart at base0 and in the chart at rho_X, and
/// compare the eps-norms of the connecting coordinate Y in both.
inline ChartTransition chart_transition(const GibbsState& base0, const HermitianOperator& x,
                                        const HermitianOperator& y, double eps) {
  const GibbsState sx = perturb(base0, x, eps);
  ChartTransition t{std::nullopt, to_chart(sx, y, eps)};

  const SpectralDecomposition& h0 = base0.h_decomposition();
  const SpectralDecomposition& hx = sx.h_decomposition();
  t.constants = equivalence_constants(h0, hx, eps);
  const double n0 = eps_norm(y, h0, eps);
  const double nx = eps_norm(y, hx, eps);
  t.norm_ratio = n0 == 0.0 ? 1.0 : nx / n0;
  t.in_bracket = n0 == 0.0 || (t.norm_ratio >= t.constants.m * (1.0 - kBracketTol) &&
                               t.norm_ratio <= t.constants.M * (1.0 + kBracketTol));

  const Matrix rho_x = t.coord_in_x.state().density_matrix().matrix();
  const HermitianOperator total = x + y;
  if (in_hood(base0, total, eps).ok) {
    t.coord_in_0 = to_chart(base0, total, eps);
    const Matrix rho_0 = t.coord_in_0->state().density_matrix().matrix();
    t.chart_deviation = largest_singular_value(rho_x - rho_0);
  }
  const Matrix rho_direct = form_sum(base0, total).density_matrix().matrix();
  t.direct_deviation = largest_singular_value(rho_x - rho_direct);
  return t;
}

inline nlohmann::ordered_json to_json(const ChartTransition& t) {
  nlohmann::ordered_json j;
  j["m"] = t.constants.m;
  j["M"] = t.constants.M;
  j["norm_ratio"] = t.norm_ratio;
  j["in_bracket"] = t.in_bracket;
  j["deviations"] = {{"chart", t.coord_in_0 ? nlohmann::ordered_json(t.chart_deviation)
                                            : nlohmann::ordered_json(nullptr)},
                     {"direct", t.direct_deviation}};
  return j;
}

struct RouteReport {
  double max_rho_deviation = 0.0;
  std::vector<double> step_margins;  // hood margin of each step in its chart
};

/// Apply the parts one at a time, each in the chart of the previous state, and
/// compare with the state of H0 + sum(parts) in operator norm.
inline RouteReport route_independence(const GibbsState& base,
                                      std::span<const HermitianOperator> parts, double eps) {
  if (parts.empty()) throw InputError("route_independence: at least one part is required");
  RouteReport r;
  GibbsState cur = base;
  HermitianOperator total = HermitianOperator::zero(base.dim());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (parts[k].dim() != base.dim()) throw InputError("route_independence: dimension mismatch");
    const HoodCheck hc = in_hood(cur, parts[k], eps);
    r.step_margins.push_back(hc.margin);
    if (!hc.ok) {
      std::ostringstream os;
      os << "in_hood: route step " << k + 1 << " leaves the eps-hood (margin " << hc.margin << ")";
      throw OutOfHoodError(os.str(), hc.margin);
    }
    cur = perturb(cur, parts[k], eps);
    total += parts[k];
  }
  const GibbsState single = form_sum(base, total);
  r.max_rho_deviation =
      largest_singular_value(cur.density_matrix().matrix() - single.density_matrix().matrix());
  return r;
}

inline RouteReport route_independence(const GibbsState& base,
                                      std::initializer_list<HermitianOperator> parts, double eps) {
  return route_independence(base, std::span<const HermitianOperator>(parts.begin(), parts.size()),
                            eps);
}

}  // namespace qim
