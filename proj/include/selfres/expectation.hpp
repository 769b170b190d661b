#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "selfres/belief.hpp"
#include "selfres/errors.hpp"
#include "selfres/prob_core.hpp"

namespace selfres {

/// A signal someone observed, together with the model it came from.
struct observation {
  signal_model model;
  std::size_t signal{0};
};

/// What agent t knows when choosing a report, and what the reference will see.
struct deviation_context {
  belief prior{0.5};
  std::vector<observation> shared;           // x^(s), seen by both
  signal_model own_model;                    // agent t
  std::size_t true_signal{0};                // x^(t)
  std::optional<std::size_t> reported_signal; // x~^(t); nullopt = hidden from the reference
  std::vector<signal_model> reference_models; // the k private substitutes of the reference

  void validate() const {
    if (true_signal >= own_model.size()) throw domain_error("deviation_context: true signal out of range");
    if (reported_signal && *reported_signal >= own_model.size()) {
      throw domain_error("deviation_context: reported signal out of range");
    }
    for (const auto& o : shared) {
      if (o.signal >= o.model.size()) throw domain_error("deviation_context: shared signal out of range");
    }
  }
};

/// Cap on the reference signal space enumerated by this module.
inline constexpr std::uint64_t reference_space_cap = 10'000'000;

namespace detail {

inline belief posterior_with(const deviation_context& ctx, std::optional<std::size_t> own_signal) {
  std::vector<signal_model> models;
  std::vector<std::size_t> signals;
  for (const auto& o : ctx.shared) {
    models.push_back(o.model);
    signals.push_back(o.signal);
  }
  if (own_signal) {
    models.push_back(ctx.own_model);
    signals.push_back(*own_signal);
  }
  return aggregate_posterior(ctx.prior, models, signals);
}

inline void check_reference_space(const deviation_context& ctx) {
  if (profile_count(ctx.reference_models, reference_space_cap) > reference_space_cap) {
    throw space_too_large("reference signal space exceeds " + std::to_string(reference_space_cap));
  }
}

inline std::size_t reported_or_throw(const deviation_context& ctx) {
  if (!ctx.reported_signal) throw domain_error("deviation_context: report is hidden");
  return *ctx.reported_signal;
}

} // namespace detail

/// P(Y | x^(t), x^(s)): agent t's own posterior.
inline belief own_posterior(const deviation_context& ctx) {
  ctx.validate();
  return detail::posterior_with(ctx, ctx.true_signal);
}

/// P(Y | x~^(t), x^(s)): the posterior the reference attributes to agent t.
inline belief reported_posterior(const deviation_context& ctx) {
  ctx.validate();
  return detail::posterior_with(ctx, detail::reported_or_throw(ctx));
}

/// Sum over reference signal profiles of the half harmonic mean of
/// P(x^(r), Y=1 | x~, x^(s)) and P(x^(r), Y=0 | x~, x^(s)).
inline double mu(const deviation_context& ctx) {
  const belief y = reported_posterior(ctx);
  detail::check_reference_space(ctx);
  double sum = 0.0;
  for_each_profile(std::span<const signal_model>(ctx.reference_models),
                   [&](const std::vector<std::size_t>&, double l1, double l0) {
                     const double a = y.p1() * l1;
                     const double b = y.p0() * l0;
                     if (a > 0.0 && b > 0.0) sum += a * b / (a + b);
                   });
  return sum;
}

/// [P(Y=1|x~,x^(s)) - P(Y=1|x,x^(s))] / [P(Y=0|x~,x^(s)) P(Y=1|x~,x^(s))].
inline double rho(const deviation_context& ctx) {
  const belief reported = reported_posterior(ctx);
  const belief own = own_posterior(ctx);
  if (!reported.interior()) throw degenerate_belief("rho: reported posterior is 0 or 1");
  return (reported.p1() - own.p1()) / (reported.p0() * reported.p1());
}

struct reference_expectation {
  double expectation{0.0}; // agent t's expectation of the reference's P(Y=1)
  double delta{0.0};       // expectation - own posterior
};

/// Agent t's expectation of the reference posterior. With a visible report this
/// is own posterior + mu * rho; with a hidden report the reference conditions on
/// x^(r), x^(s) only and the expectation is summed directly.
inline reference_expectation expected_reference_posterior(const deviation_context& ctx) {
  const belief own = own_posterior(ctx);
  if (ctx.reported_signal) {
    const double d = mu(ctx) * rho(ctx);
    return {own.p1() + d, d};
  }
  detail::check_reference_space(ctx);
  const belief s = detail::posterior_with(ctx, std::nullopt);
  double e = 0.0;
  for_each_profile(std::span<const signal_model>(ctx.reference_models),
                   [&](const std::vector<std::size_t>&, double l1, double l0) {
                     const double weight = own.p1() * l1 + own.p0() * l0;
                     const double a = s.p1() * l1;
                     const double b = s.p0() * l0;
                     e += weight * (a / (a + b));
                   });
  return {e, e - own.p1()};
}

namespace detail {

inline void check_delta_eta(double delta_gap, double eta_min) {
  if (!(delta_gap > 0.0 && delta_gap < 1.0)) {
    throw domain_error("delta gap " + std::to_string(delta_gap) + " outside (0, 1)");
  }
  if (!(eta_min > 0.0 && eta_min < 0.5)) {
    throw domain_error("eta " + std::to_string(eta_min) + " outside (0, 0.5)");
  }
}

inline double eta_spread(double eta_min) { return (1.0 - eta_min) / eta_min - eta_min / (1.0 - eta_min); }

} // namespace detail

/// 1/4 ((1-eta)/eta - eta/(1-eta)) (1-delta)^k, an upper bound on |Delta|.
inline double delta_bound(double delta_gap, double eta_min, std::size_t k) {
  detail::check_delta_eta(delta_gap, eta_min);
  return 0.25 * detail::eta_spread(eta_min) * std::pow(1.0 - delta_gap, static_cast<double>(k));
}

/// Smallest k with delta_bound(delta_gap, eta_min, k) <= eps_prime.
inline std::size_t k_from_epsilon_prime(double delta_gap, double eta_min, double eps_prime) {
  detail::check_delta_eta(delta_gap, eta_min);
  if (!(eps_prime > 0.0)) throw domain_error("eps_prime must be positive");
  const double ratio = detail::eta_spread(eta_min) / (4.0 * eps_prime);
  if (ratio <= 1.0) return 0;
  const double k = std::ceil(std::log(ratio) / -std::log1p(-delta_gap));
  return static_cast<std::size_t>(k);
}

} // namespace selfres
