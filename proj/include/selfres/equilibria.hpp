#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "selfres/belief.hpp"
#include "selfres/bounds.hpp"
#include "selfres/errors.hpp"
#include "selfres/market.hpp"
#include "selfres/prob_core.hpp"
#include "selfres/rng.hpp"
#include "selfres/scoring.hpp"
#include "selfres/strategy.hpp"

namespace selfres {

/// A chain of `length` agents with no random stopping, scored against the
/// last agent. Agents 1..length-k are scored; the last k are in the fee zone.
struct audit_config {
  std::size_t length{2};
  std::size_t k{1};
  double epsilon{0.01};
  std::uint64_t outcome_cap{1'000'000}; // exact enumeration up to this many downstream profiles
  std::size_t mc_samples{200'000};
  std::uint64_t seed{0};
  bool grid_deviations{true}; // also audit the reports 0.01, ..., 0.99
  double invert_tolerance{default_invert_tolerance};

  void validate() const {
    if (length < 2) throw config_error("audit: chain length must be at least 2");
    if (k < 1 || k >= length) throw config_error("audit: need 1 <= k < length");
    if (!(epsilon > 0.0)) throw config_error("audit: epsilon must be positive");
  }
};

/// What agent t knows: the signals of agents 1..t (own signal last).
using history = std::vector<std::size_t>;

struct deviation_gain {
  belief report{0.5};           // q~^(t)
  std::optional<std::size_t> as_signal; // signal downstream agents decode, if any
  belief own{0.5};              // p^(t)
  belief market_prior{0.5};     // q^(t-1)
  double expected_reference{0}; // E[r | agent t's information] after the deviation
  double truthful_reference{0}; // the same under truthful reporting
  double delta{0};              // expected_reference - own
  double gain_cemsr{0};         // E[S_CEM(q~)] - E[S_CEM(p)]
  double gain_ce{0};            // E[S_CE(q~)] - E[S_CE(p)]
  double payoff_ce{0};          // E[S_CE(q~)]
  double truthful_payoff_ce{0}; // E[S_CE(p)]
  bool estimated{false};
  double std_error{0};
};

namespace detail {

inline std::vector<signal_model> chain_models(const scenario& sc, std::size_t from, std::size_t to) {
  std::vector<signal_model> out;
  for (std::size_t j = from; j <= to; ++j) out.push_back(sc.model_for(j - 1));
  return out;
}

// E[posterior of the last agent | agent t's info], where downstream agents
// start from `decoded` (the public belief after reading agent t's report) and
// the expectation is under agent t's posterior `own`.
inline double reference_mean_exact(const std::vector<signal_model>& downstream, belief own, belief decoded) {
  double e = 0.0;
  for_each_profile(std::span<const signal_model>(downstream),
                   [&](const std::vector<std::size_t>&, double l1, double l0) {
                     const double w = own.p1() * l1 + own.p0() * l0;
                     const double a = decoded.p1() * l1, b = decoded.p0() * l0;
                     e += w * (a / (a + b));
                   });
  return e;
}

struct mc_mean {
  double mean;
  double se;
};

inline mc_mean reference_mean_mc(const std::vector<signal_model>& downstream, belief own, belief decoded,
                                 std::size_t samples, std::uint64_t seed) {
  rng gen(seed);
  double sum = 0.0, sq = 0.0;
  std::vector<double> column;
  for (std::size_t i = 0; i < samples; ++i) {
    const outcome y = gen.bernoulli(own.p1()) ? 1 : 0;
    double a = decoded.p1(), b = decoded.p0();
    for (const auto& m : downstream) {
      column.resize(m.size());
      for (std::size_t x = 0; x < m.size(); ++x) column[x] = m.likelihood(x, y);
      const std::size_t x = gen.categorical(column);
      a *= m.likelihood(x, 1);
      b *= m.likelihood(x, 0);
      if (a + b < 1e-200) {
        a *= 1e200;
        b *= 1e200;
      }
    }
    const double r = a / (a + b);
    sum += r;
    sq += r * r;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  return {mean, std::sqrt(std::max(0.0, sq / n - mean * mean) / n)};
}

} // namespace detail

/// Exact expected gain for agent t (1-based) of reporting `report` instead of
/// the truthful posterior, given history h (signals of agents 1..t). Everyone
/// else is truthful and reads reports by inverting them; an unexplained report
/// is ignored. Falls back to seeded Monte Carlo when the downstream space
/// exceeds cfg.outcome_cap.
inline deviation_gain exact_deviation_gain(const scenario& sc, const audit_config& cfg, std::size_t t,
                                           const history& h, belief report) {
  cfg.validate();
  if (t < 1 || t >= cfg.length) throw domain_error("exact_deviation_gain: agent out of range");
  if (h.size() != t) throw domain_error("exact_deviation_gain: history must hold t signals");
  deviation_gain g;
  const auto upstream = detail::chain_models(sc, 1, t - 1);
  const signal_model& own_model = sc.model_for(t - 1);
  const history shared(h.begin(), h.end() - 1);
  g.market_prior = aggregate_posterior(sc.prior, upstream, shared);
  g.own = posterior(g.market_prior, own_model, h.back());
  g.report = report;
  g.as_signal = invert_report(own_model, g.market_prior, report, cfg.invert_tolerance);
  const belief decoded = g.as_signal ? posterior(g.market_prior, own_model, *g.as_signal) : g.market_prior;
  const belief truthful_decoded = g.own;

  const auto downstream = detail::chain_models(sc, t + 1, cfg.length);
  if (profile_count(downstream, cfg.outcome_cap) <= cfg.outcome_cap) {
    g.expected_reference = detail::reference_mean_exact(downstream, g.own, decoded);
    g.truthful_reference = detail::reference_mean_exact(downstream, g.own, truthful_decoded);
  } else {
    const auto dev = detail::reference_mean_mc(downstream, g.own, decoded, cfg.mc_samples, cfg.seed);
    const auto tru = detail::reference_mean_mc(downstream, g.own, truthful_decoded, cfg.mc_samples, cfg.seed + 1);
    g.expected_reference = dev.mean;
    g.truthful_reference = tru.mean;
    g.estimated = true;
    const double slope_dev = std::abs(std::log(report.p1() / g.market_prior.p1()) - std::log(report.p0() / g.market_prior.p0()));
    const double slope_tru = std::abs(std::log(g.own.p1() / g.market_prior.p1()) - std::log(g.own.p0() / g.market_prior.p0()));
    g.std_error = std::hypot(slope_dev * dev.se, slope_tru * tru.se);
  }
  g.expected_reference = std::clamp(g.expected_reference, 0.0, 1.0);
  g.truthful_reference = std::clamp(g.truthful_reference, 0.0, 1.0);
  g.delta = g.expected_reference - g.own.p1();
  const belief e_dev{g.expected_reference}, e_tru{g.truthful_reference};
  g.gain_cemsr = ce_msr(e_dev, report, g.market_prior) - ce_msr(e_tru, g.own, g.market_prior);
  g.payoff_ce = cross_entropy_score(e_dev, report);
  g.truthful_payoff_ce = cross_entropy_score(e_tru, g.own);
  g.gain_ce = g.payoff_ce - g.truthful_payoff_ce;
  return g;
}

/// Deviation to the report of another signal.
inline deviation_gain exact_deviation_gain(const scenario& sc, const audit_config& cfg, std::size_t t,
                                           const history& h, strategy deviation) {
  if (h.size() != t || t < 1) throw domain_error("exact_deviation_gain: history must hold t signals");
  const auto upstream = detail::chain_models(sc, 1, t - 1);
  const belief y = aggregate_posterior(sc.prior, upstream, history(h.begin(), h.end() - 1));
  const signal_model& model = sc.model_for(t - 1);
  belief report;
  switch (deviation.what) {
  case strategy::kind::truthful: report = posterior(y, model, h.back()); break;
  case strategy::kind::report_as_signal: report = posterior(y, model, deviation.signal); break;
  case strategy::kind::uninformative:
  case strategy::kind::fixed: report = deviation.q; break;
  case strategy::kind::permutation: report = posterior(y, model, h.back()).permuted(); break;
  case strategy::kind::switching: report = y.permuted(); break;
  }
  return exact_deviation_gain(sc, cfg, t, h, report);
}

struct deviation_record {
  history h;
  deviation_gain gain;
  bool signal_consistent{false};
  double bound{0.0};         // sign-aware market-rule bound at this Delta
  double literal_bound{0.0}; // formula at the signed Delta, +inf outside its range
};

struct deviation_audit {
  std::size_t agent{0};
  double epsilon{0.0};
  double eta_pool{0.0};
  std::vector<deviation_record> deviations;
  double max_gain{0.0};            // over every audited deviation
  double max_signal_gain{0.0};     // over signal-consistent deviations
  double max_bound_excess{-inf};   // max of gain - bound over signal-consistent deviations
  std::size_t literal_violations{0}; // gain > literal formula + 1e-9
  bool estimated{false};

  bool within_epsilon() const { return max_gain <= epsilon; }
  bool within_bound() const { return max_bound_excess <= 1e-9; }
};

namespace detail {

inline std::vector<history> histories(const scenario& sc, std::size_t t, std::uint64_t cap) {
  if (sc.realized_signals && sc.realized_signals->size() >= t) {
    return {history(sc.realized_signals->begin(), sc.realized_signals->begin() + t)};
  }
  const auto models = chain_models(sc, 1, t);
  if (profile_count(models, cap) > cap) throw space_too_large("audit: too many histories");
  std::vector<history> out;
  for_each_profile(std::span<const signal_model>(models),
                   [&](const std::vector<std::size_t>& p, double, double) { out.push_back(p); });
  return out;
}

} // namespace detail

/// Audits every scored agent of the chain: each signal-consistent misreport,
/// plus the 99 grid reports if enabled, for the realized history or, when the
/// scenario has none, for every possible history.
inline std::vector<deviation_audit> audit_epsilon_pbe(const scenario& sc, const audit_config& cfg) {
  cfg.validate();
  sc.validate();
  std::vector<signal_model> pool;
  for (std::size_t j = 1; j <= cfg.length; ++j) pool.push_back(sc.model_for(j - 1));
  const double eta_min = pool_eta(pool);
  std::vector<deviation_audit> out;
  for (std::size_t t = 1; t + cfg.k <= cfg.length; ++t) {
    deviation_audit a;
    a.agent = t;
    a.epsilon = cfg.epsilon;
    a.eta_pool = eta_min;
    const signal_model& model = sc.model_for(t - 1);
    for (const history& h : detail::histories(sc, t, cfg.outcome_cap)) {
      auto add = [&](const deviation_gain& g, bool consistent) {
        deviation_record rec{h, g, consistent, 0.0, 0.0};
        if (consistent) {
          rec.bound = deviation_gain_bound(rule::cemsr, g.delta, g.market_prior, eta_min);
          const delta_range r = valid_delta_range(g.market_prior, eta_min, rule::cemsr);
          rec.literal_bound = r.contains(g.delta) ? d_hat_eta(g.delta, g.market_prior, eta_min) : inf;
          a.max_signal_gain = std::max(a.max_signal_gain, g.gain_cemsr);
          a.max_bound_excess = std::max(a.max_bound_excess, g.gain_cemsr - rec.bound);
          if (g.gain_cemsr > rec.literal_bound + 1e-9) ++a.literal_violations;
        }
        a.max_gain = std::max(a.max_gain, g.gain_cemsr);
        a.estimated = a.estimated || g.estimated;
        a.deviations.push_back(std::move(rec));
      };
      for (std::size_t s = 0; s < model.size(); ++s) {
        if (s == h.back()) continue;
        add(exact_deviation_gain(sc, cfg, t, h, strategy::as_signal(s)), true);
      }
      if (cfg.grid_deviations) {
        for (int i = 1; i <= 99; ++i) add(exact_deviation_gain(sc, cfg, t, h, belief{i / 100.0}), false);
      }
    }
    if (a.deviations.empty()) a.max_bound_excess = 0.0;
    out.push_back(std::move(a));
  }
  return out;
}

/// Everyone reports q_bar: only the first scored agent is paid, KL(q_bar || q0).
inline std::vector<score> uninformative_payoffs(belief q_bar, std::size_t scored, belief q0) {
  std::vector<score> out(scored, 0.0);
  if (scored > 0) out[0] = kl(q_bar, q0);
  return out;
}

/// Each agent reports 1 minus the previous report, starting from q0, and is
/// scored against the report `distance` steps later. Without a floor, q0 in
/// {0, 1} gives +inf at even distances and -inf at odd ones.
inline std::vector<score> switching_payoffs(std::size_t scored, std::size_t distance, belief q0,
                                            floor_policy floor = floor_policy::none()) {
  if (distance < 1) throw domain_error("switching_payoffs: distance must be positive");
  std::vector<belief> q{floor.apply(q0)};
  for (std::size_t t = 1; t <= scored + distance; ++t) q.push_back(floor.apply(q.back().permuted()));
  std::vector<score> out(scored);
  for (std::size_t t = 1; t <= scored; ++t) out[t - 1] = ce_msr(q[t + distance], q[t], q[t - 1]);
  return out;
}

/// The same market with the outcome labels swapped throughout.
inline market_transcript permuted(const market_transcript& tr) {
  market_transcript p = tr;
  p.y = 1 - tr.y;
  p.initial = tr.initial.permuted();
  for (auto& r : p.reports) {
    r.report = r.report.permuted();
    r.public_before = r.public_before.permuted();
  }
  return p;
}

struct permutation_result {
  double max_payout_difference{0.0}; // relabeled transcript, settled again
  bool involution{true};             // permuting twice restores every report
};

/// Relabels a settled transcript, settles it again and compares payouts.
inline permutation_result permutation_invariance(const market_transcript& tr, const market_config& cfg) {
  permutation_result res;
  market_transcript p = permuted(tr);
  settle(p, cfg);
  for (std::size_t i = 0; i < tr.payouts.size(); ++i) {
    const double a = tr.payouts[i], b = p.payouts[i];
    const double d = (a == b) ? 0.0 : std::abs(a - b);
    res.max_payout_difference = std::max(res.max_payout_difference, std::isnan(d) ? inf : d);
  }
  const market_transcript back = permuted(p);
  for (std::size_t i = 0; i < tr.reports.size(); ++i) {
    res.involution = res.involution && back.reports[i].report == tr.reports[i].report;
  }
  res.involution = res.involution && back.y == tr.y && back.initial == tr.initial;
  return res;
}

} // namespace selfres
