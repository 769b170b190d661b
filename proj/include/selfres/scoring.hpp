#pragma once

#include <cmath>
#include <limits>

#include "selfres/belief.hpp"
#include "selfres/errors.hpp"
#include "selfres/floor.hpp"

namespace selfres {

/// Extended real in nats; may be +inf or -inf under floor_policy::none().
using score = double;

inline constexpr double inf = std::numeric_limits<double>::infinity();

namespace detail {

// r * ln(q) with 0 ln 0 = 0
inline double weighted_log(double r, double q) {
  if (r == 0.0) return 0.0;
  return r * std::log(q);
}

// r * ln(a / b); a term with r = 0, or a = b = 0, contributes nothing
inline double weighted_log_ratio(double r, double a, double b) {
  if (r == 0.0 || (a == 0.0 && b == 0.0)) return 0.0;
  if (a == 0.0) return -inf;
  if (b == 0.0) return inf;
  return r * (std::log(a) - std::log(b));
}

inline double checked_sum(double x, double y) {
  if (std::isinf(x) && std::isinf(y) && x != y) {
    throw domain_error("score: opposite infinities in one sum");
  }
  return x + y;
}

} // namespace detail

/// ln q_y.
inline score log_score(outcome y, belief q) { return std::log(q[y]); }

/// Negative cross-entropy sum_i r_i ln q_i, after the floor is applied to q.
inline score cross_entropy_score(belief r, belief q, floor_policy floor = floor_policy::none()) {
  q = floor.apply(q);
  return detail::checked_sum(detail::weighted_log(r.p1(), q.p1()), detail::weighted_log(r.p0(), q.p0()));
}

/// Market scoring rule: sum_i r_i ln(q_t,i / q_prev,i).
/// Throws domain_error if the two terms are infinite with opposite signs.
inline score ce_msr(belief r, belief q_t, belief q_prev, floor_policy floor = floor_policy::none()) {
  q_t = floor.apply(q_t);
  q_prev = floor.apply(q_prev);
  return detail::checked_sum(detail::weighted_log_ratio(r.p1(), q_t.p1(), q_prev.p1()),
                             detail::weighted_log_ratio(r.p0(), q_t.p0(), q_prev.p0()));
}

/// Shannon entropy H(p) in nats.
inline double entropy(belief p) { return -(detail::weighted_log(p.p1(), p.p1()) + detail::weighted_log(p.p0(), p.p0())); }

/// Cross-entropy H(r, q) = -cross_entropy_score(r, q).
inline double cross_entropy(belief r, belief q) { return -cross_entropy_score(r, q); }

/// KL(p || q) in nats.
inline double kl(belief p, belief q) {
  return detail::checked_sum(detail::weighted_log_ratio(p.p1(), p.p1(), q.p1()),
                             detail::weighted_log_ratio(p.p0(), p.p0(), q.p0()));
}

/// Scores in nats to bits.
inline double to_bits(double nats) { return nats / std::log(2.0); }

} // namespace selfres
