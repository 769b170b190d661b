#pragma once

#include <algorithm>
#include <string>

#include "selfres/belief.hpp"
#include "selfres/errors.hpp"

namespace selfres {

/// How reports are kept away from the simplex boundary before logs are taken.
/// With mode none, scores are extended reals and may be infinite.
class floor_policy {
public:
  enum class mode { none, clamp };

  static constexpr floor_policy none() noexcept { return floor_policy{}; }

  /// Throws domain_error unless p_min is in (0, 0.5).
  static floor_policy clamp(double p_min) {
    if (!(p_min > 0.0 && p_min < 0.5)) {
      throw domain_error("floor_policy: p_min " + std::to_string(p_min) + " outside (0, 0.5)");
    }
    floor_policy f;
    f.mode_ = mode::clamp;
    f.p_min_ = p_min;
    return f;
  }

  constexpr mode kind() const noexcept { return mode_; }
  constexpr double p_min() const noexcept { return p_min_; }
  constexpr bool clamps() const noexcept { return mode_ == mode::clamp; }

  belief apply(belief q) const {
    if (mode_ == mode::none) return q;
    if (q.p1() < p_min_) return belief{p_min_};
    if (q.p0() < p_min_) return belief{p_min_}.permuted();
    return q;
  }

  friend constexpr bool operator==(const floor_policy&, const floor_policy&) = default;

private:
  mode mode_{mode::none};
  double p_min_{0.0};
};

} // namespace selfres
