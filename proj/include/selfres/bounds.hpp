#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "selfres/belief.hpp"
#include "selfres/errors.hpp"
#include "selfres/expectation.hpp"
#include "selfres/scoring.hpp"

namespace selfres {

/// Which payment the bound is for: plain cross-entropy or the market rule.
enum class rule { ce, cemsr };

enum class branch { positive, negative, both };

/// How negative adjustments are bounded when solving for eps'.
///  literal: the bound formula evaluated at the signed Delta on both branches.
///  sign_symmetric: a negative Delta is bounded by the formula at -Delta with
///    the outcome labels swapped; eps' is the smaller positive root of the two.
enum class bound_convention { literal, sign_symmetric };

inline std::string_view to_string(rule r) { return r == rule::ce ? "CE" : "CEMSR"; }

inline std::string_view to_string(branch b) {
  switch (b) {
  case branch::positive: return "positive";
  case branch::negative: return "negative";
  default: return "both";
  }
}

inline rule parse_rule(std::string_view s) {
  if (s == "CE" || s == "ce") return rule::ce;
  if (s == "CEMSR" || s == "cemsr") return rule::cemsr;
  throw config_error("unknown rule '" + std::string(s) + "'");
}

struct delta_range {
  double lo{0.0};
  double hi{0.0};
  bool contains(double d) const { return d > lo && d < hi; }
};

namespace detail {

inline void check_interior(belief y) {
  if (!y.interior()) throw domain_error("prior " + std::to_string(y.p1()) + " is not interior");
}

inline void check_eta(double eta_min) {
  if (!(eta_min > 0.0 && eta_min <= 0.5)) throw domain_error("eta " + std::to_string(eta_min) + " outside (0, 0.5]");
}

// Delta ln(num / den) with the extended-real conventions at the bracket
inline double bound_log(double delta, double num, double den) {
  if (delta == 0.0) return 0.0;
  if (num < 0.0 || den < 0.0 || (num == 0.0 && den == 0.0)) {
    throw out_of_range_error("Delta " + std::to_string(delta) + " outside the valid range");
  }
  if (den == 0.0 || num == 0.0) return inf;
  return delta * std::log(num / den);
}

} // namespace detail

/// Bound on the expected gain from deviating under the cross-entropy rule.
inline double d_eta(double delta, belief y, double eta_min) {
  detail::check_interior(y);
  detail::check_eta(eta_min);
  const double c = eta_min * y.p0() + (1.0 - eta_min) * y.p1();
  const double num = (1.0 - eta_min) * y.p1() + delta * c;
  const double den = eta_min * y.p0() - delta * c;
  return detail::bound_log(delta, num, den);
}

/// Bound on the expected gain from deviating under the market rule, given the
/// market prior before agent t's report.
inline double d_hat_eta(double delta, belief y, double eta_min) {
  detail::check_interior(y);
  detail::check_eta(eta_min);
  const double num = (1.0 - eta_min) + delta * (eta_min * y.p0() / y.p1() + (1.0 - eta_min));
  const double den = eta_min - delta * (eta_min + (1.0 - eta_min) * y.p1() / y.p0());
  return detail::bound_log(delta, num, den);
}

inline double bound_value(rule r, double delta, belief y, double eta_min) {
  return r == rule::ce ? d_eta(delta, y, eta_min) : d_hat_eta(delta, y, eta_min);
}

/// Open interval of Delta on which the bound's log argument is positive and finite.
inline delta_range valid_delta_range(belief y, double eta_min, rule r) {
  detail::check_interior(y);
  detail::check_eta(eta_min);
  const double e = eta_min;
  if (r == rule::ce) {
    const double c = e * y.p0() + (1.0 - e) * y.p1();
    return {-(1.0 - e) * y.p1() / c, e * y.p0() / c};
  }
  return {-(1.0 - e) / (e * y.p0() / y.p1() + (1.0 - e)), e / (e + (1.0 - e) * y.p1() / y.p0())};
}

/// Bound used when auditing a deviation with adjustment `delta`. For Delta >= 0
/// this is the formula itself; a negative Delta is the mirror image of a positive
/// one with the labels swapped, so it is bounded by the formula at (-Delta,
/// swapped y). Outside the valid range the bound is vacuous (+inf).
inline double deviation_gain_bound(rule r, double delta, belief y, double eta_min) {
  const belief yy = delta < 0.0 ? y.permuted() : y;
  const double d = std::abs(delta);
  if (d >= valid_delta_range(yy, eta_min, r).hi) return inf;
  return bound_value(r, d, yy, eta_min);
}

struct bounds_query {
  double epsilon{0.01};
  double delta_gap{0.1};
  double eta{0.1};
  belief prior{0.5};
  rule kind{rule::cemsr};

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw domain_error("epsilon must be positive and finite");
    if (!(delta_gap > 0.0 && delta_gap < 1.0)) throw domain_error("delta gap outside (0, 1)");
    if (!(eta > 0.0 && eta < 0.5)) throw domain_error("eta outside (0, 0.5)");
    detail::check_interior(prior);
  }
};

struct bounds_result {
  double eps_prime{0.0};
  std::size_t k_min{0};
  branch chosen{branch::positive};
  delta_range bracket;
  double delta_star{0.0}; // signed root that attains eps'
  double bracket_gap{0.0}; // distance from delta_star to the end of its branch
  double residual{0.0};   // |D - epsilon| at the root
  bool saturated{false};  // root nearer the branch end than any double gap; delta_star is the end
};

/// The bound on one branch written through the distance `gap` from Delta to the
/// far end of that branch, so that roots right next to the bracket keep full
/// relative precision. sign > 0: Delta = hi - gap; sign < 0: Delta = lo + gap.
inline double bound_at_gap(rule r, belief y, double eta_min, int sign, double gap) {
  const delta_range b = valid_delta_range(y, eta_min, r);
  const double delta = sign > 0 ? b.hi - gap : b.lo + gap;
  if (delta == 0.0) return 0.0;
  if (!(gap > 0.0)) return inf;
  // numerator and denominator of the log argument up to the factors a and c
  double a = 1.0, c = 1.0;
  if (r == rule::cemsr) {
    a = eta_min * y.p0() / y.p1() + (1.0 - eta_min);
    c = eta_min + (1.0 - eta_min) * y.p1() / y.p0();
  }
  const double num = sign > 0 ? delta - b.lo : gap;
  const double den = sign > 0 ? gap : b.hi - delta;
  return delta * (std::log(a / c) + std::log(num) - std::log(den));
}

namespace detail {

struct branch_root {
  double magnitude{0.0};
  double gap{0.0};
  double residual{0.0};
  bool saturated{false};
};

// Smallest |Delta| on one branch where the bound reaches eps. The bound must
// be nondecreasing in |Delta| wherever it is positive; this is checked on a
// grid of 1000 points before solving. The bisection runs on the distance to
// the branch end, geometrically while the bracket spans more than a factor 2.
inline branch_root solve_branch(rule r, belief y, double eta_min, int sign, double eps) {
  const delta_range b = valid_delta_range(y, eta_min, r);
  const double limit = sign > 0 ? b.hi : -b.lo;
  auto f = [&](double gap) { return bound_at_gap(r, y, eta_min, sign, gap); };
  constexpr int samples = 1000;
  double prev_f = 0.0;
  double gap_hi = limit; // f(gap_hi) < eps
  double gap_lo = -1.0;  // f(gap_lo) >= eps
  for (int i = 1; i < samples; ++i) {
    const double gap = limit * (samples - i) / samples;
    const double v = f(gap);
    if (std::isnan(v)) throw no_solution("bound is NaN at |Delta| = " + std::to_string(limit - gap));
    if (prev_f > 0.0 && v < prev_f) {
      throw no_solution("bound is not monotone on the branch near |Delta| = " + std::to_string(limit - gap));
    }
    if (v >= eps) {
      gap_lo = gap;
      break;
    }
    gap_hi = gap;
    prev_f = v;
  }
  if (gap_lo < 0.0) {
    gap_lo = gap_hi;
    for (int i = 0; i < 2200 && gap_lo > 0.0 && f(gap_lo) < eps; ++i) gap_lo *= 0.5;
    if (!(gap_lo > 0.0) || f(gap_lo) < eps) {
      // D only grows like ln(1/gap): the root can sit below the smallest
      // denormal gap, so it is the branch end to double precision
      const double closest = f(std::numeric_limits<double>::denorm_min());
      if (!(closest < eps)) throw no_solution("bound never reaches epsilon on the branch");
      return {limit, 0.0, eps - closest, true};
    }
  }
  for (int it = 0; it < 4000; ++it) {
    const double mid = gap_hi > 2.0 * gap_lo ? std::sqrt(gap_lo) * std::sqrt(gap_hi) : gap_lo + 0.5 * (gap_hi - gap_lo);
    if (!(mid > gap_lo && mid < gap_hi)) break;
    if (f(mid) >= eps) gap_lo = mid;
    else gap_hi = mid;
  }
  const double rl = std::abs(f(gap_lo) - eps);
  const double rh = std::abs(f(gap_hi) - eps);
  if (!std::isfinite(std::min(rl, rh))) throw no_solution("solver did not converge");
  const double gap = rl < rh ? gap_lo : gap_hi;
  return {limit - gap, gap, std::min(rl, rh), false};
}

} // namespace detail

/// eps': the smallest |Delta| at which the bound reaches epsilon, found by
/// bisection on each branch. k_min is then the substitute count giving
/// |Delta| <= eps'.
inline bounds_result k_min(const bounds_query& q, bound_convention conv = bound_convention::literal) {
  q.validate();
  bounds_result out;
  out.bracket = valid_delta_range(q.prior, q.eta, q.kind);
  const detail::branch_root pos = detail::solve_branch(q.kind, q.prior, q.eta, 1, q.epsilon);
  const detail::branch_root neg = conv == bound_convention::literal
                                      ? detail::solve_branch(q.kind, q.prior, q.eta, -1, q.epsilon)
                                      : detail::solve_branch(q.kind, q.prior.permuted(), q.eta, 1, q.epsilon);
  if (pos.magnitude == neg.magnitude) {
    out.chosen = branch::both;
    out.eps_prime = pos.magnitude;
    out.delta_star = pos.magnitude;
    out.bracket_gap = pos.gap;
    out.residual = std::max(pos.residual, neg.residual);
    out.saturated = pos.saturated || neg.saturated;
  } else if (pos.magnitude < neg.magnitude) {
    out.chosen = branch::positive;
    out.eps_prime = pos.magnitude;
    out.delta_star = pos.magnitude;
    out.bracket_gap = pos.gap;
    out.residual = pos.residual;
    out.saturated = pos.saturated;
  } else {
    out.chosen = branch::negative;
    out.eps_prime = neg.magnitude;
    out.delta_star = -neg.magnitude;
    out.bracket_gap = neg.gap;
    out.residual = neg.residual;
    out.saturated = neg.saturated;
  }
  out.k_min = k_from_epsilon_prime(q.delta_gap, q.eta, out.eps_prime);
  return out;
}

/// eps' alone.
inline double epsilon_prime(const bounds_query& q, bound_convention conv = bound_convention::literal) {
  return k_min(q, conv).eps_prime;
}

/// Largest k_min over `grid_points` evenly spaced priors in [y_min, y_max].
inline std::size_t k_market(bounds_query q, double y_min, double y_max, std::size_t grid_points,
                            bound_convention conv = bound_convention::literal) {
  if (!(y_min > 0.0 && y_max < 1.0 && y_min <= y_max)) throw domain_error("k_market: bad prior range");
  if (grid_points == 0) throw domain_error("k_market: no grid points");
  std::size_t k = 0;
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double y1 = grid_points == 1 ? y_min : y_min + (y_max - y_min) * static_cast<double>(i) / (grid_points - 1);
    q.prior = belief{y1};
    k = std::max(k, k_min(q, conv).k_min);
  }
  return k;
}

/// Evenly spaced grid including both endpoints.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return v;
}

} // namespace selfres
