#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "selfres/errors.hpp"

namespace selfres {

/// Index of an outcome of the binary event Y (0 or 1).
using outcome = std::size_t;

/// A point on the binary probability simplex. Both coordinates are stored so
/// that swapping the labels is exact.
class belief {
public:
  constexpr belief() = default;

  /// Throws domain_error unless 0 <= p1 <= 1.
  explicit belief(double p1) : p1_(p1), p0_(1.0 - p1) {
    if (!(p1 >= 0.0 && p1 <= 1.0)) {
      throw domain_error("belief: probability " + std::to_string(p1) + " outside [0, 1]");
    }
  }

  /// Normalizes nonnegative weights (w1, w0), not both zero.
  static belief from_weights(double w1, double w0) {
    if (!(w1 >= 0.0 && w0 >= 0.0 && w1 + w0 > 0.0)) throw domain_error("belief: bad weights");
    belief b;
    const double s = w1 + w0;
    b.p1_ = w1 / s;
    b.p0_ = w0 / s;
    return b;
  }

  constexpr double p1() const noexcept { return p1_; }
  constexpr double p0() const noexcept { return p0_; }

  /// Probability of outcome `y`.
  constexpr double operator[](outcome y) const noexcept { return y == 1 ? p1_ : p0_; }

  constexpr bool interior() const noexcept { return p1_ > 0.0 && p0_ > 0.0; }

  /// The same belief with the outcome labels swapped.
  constexpr belief permuted() const noexcept {
    belief b;
    b.p1_ = p0_;
    b.p0_ = p1_;
    return b;
  }

  friend constexpr bool operator==(const belief&, const belief&) = default;

private:
  double p1_{0.5};
  double p0_{0.5};
};

/// Arithmetic mean of a nonempty range of beliefs.
template <class Range>
belief mean_belief(const Range& beliefs) {
  double s1 = 0.0, s0 = 0.0;
  std::size_t n = 0;
  for (const belief& b : beliefs) {
    s1 += b.p1();
    s0 += b.p0();
    ++n;
  }
  if (n == 0) throw domain_error("mean_belief: empty range");
  return belief::from_weights(s1, s0);
}

} // namespace selfres
