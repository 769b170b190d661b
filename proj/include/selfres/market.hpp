#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selfres/belief.hpp"
#include "selfres/bounds.hpp"
#include "selfres/errors.hpp"
#include "selfres/expectation.hpp"
#include "selfres/floor.hpp"
#include "selfres/prob_core.hpp"
#include "selfres/rng.hpp"
#include "selfres/scoring.hpp"
#include "selfres/strategy.hpp"

namespace selfres {

/// Who an agent is scored against.
struct reference_strategy {
  enum class kind {
    terminal, // the last agent before termination
    rolling,  // agent t + k
    batch,    // last agent of the next batch of `size`
    parallel  // terminal agent of the next of `markets` walled-off markets
  };
  kind what{kind::terminal};
  std::size_t size{0};
  std::size_t markets{2};

  static reference_strategy terminal() { return {}; }
  static reference_strategy rolling() { return {kind::rolling, 0, 2}; }
  static reference_strategy batch(std::size_t size) { return {kind::batch, size, 2}; }
  static reference_strategy parallel(std::size_t n) { return {kind::parallel, 0, n}; }
};

inline std::string_view to_string(reference_strategy::kind k) {
  switch (k) {
  case reference_strategy::kind::terminal: return "terminal";
  case reference_strategy::kind::rolling: return "rolling";
  case reference_strategy::kind::batch: return "batch";
  case reference_strategy::kind::parallel: return "parallel";
  }
  return "?";
}

/// What agents do with a report no signal explains.
enum class invalid_report_rule { ignore, nearest_signal };

/// How agents read the reports of others: at face value, or with the labels swapped.
enum class belief_profile { truthful, permuted };

struct market_config {
  double alpha{0.01};
  double flat_fee{0.0};
  std::size_t k{1};
  reference_strategy reference{};
  floor_policy floor{floor_policy::clamp(1e-6)};
  std::optional<belief> initial_report; // q^(0); the scenario prior when unset
  std::uint64_t seed{0};
  std::size_t reference_average{1}; // mean of this many consecutive reference reports
  invalid_report_rule invalid_reports{invalid_report_rule::ignore};
  belief_profile beliefs{belief_profile::truthful};
  double invert_tolerance{default_invert_tolerance};
  std::size_t max_agents{1'000'000};

  /// Throws config_error on inconsistent settings.
  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("alpha must be in (0, 1)");
    if (k < 1 && reference.what != reference_strategy::kind::parallel) throw config_error("k must be at least 1");
    if (reference_average < 1) throw config_error("reference_average must be at least 1");
    if (!std::isfinite(flat_fee)) throw config_error("flat_fee must be finite");
    if (max_agents < 1) throw config_error("max_agents must be at least 1");
    if (initial_report && floor.clamps() && !initial_report->interior()) {
      throw config_error("initial_report must be interior");
    }
    if (reference.what == reference_strategy::kind::batch && reference.size < k + reference_average - 1) {
      throw config_error("batch size " + std::to_string(reference.size) + " is smaller than k = " +
                         std::to_string(k) + (reference_average > 1 ? " plus the averaging window" : ""));
    }
    if (reference.what == reference_strategy::kind::parallel && reference.markets < 2) {
      throw config_error("parallel markets need at least 2 markets");
    }
  }
};

/// 1 / (T + k): on average T agents are scored and k are paid the fee.
inline double alpha_from_T(double T, std::size_t k) {
  if (!(T >= 1.0) || k < 1) throw domain_error("alpha_from_T: need T >= 1 and k >= 1");
  return 1.0 / (T + static_cast<double>(k));
}

struct report_record {
  std::size_t agent{0};   // 1-based
  std::size_t signal{0};  // realized signal
  belief report{0.5};     // q^(t), after the floor
  belief public_before{}; // posterior from decoded earlier reports
  std::optional<std::size_t> decoded; // signal others inferred from the report
};

/// A reference report: agent (1-based) in market.
struct reference_ref {
  std::size_t market{0};
  std::size_t agent{0};
  friend bool operator==(const reference_ref&, const reference_ref&) = default;
};

struct market_transcript {
  std::size_t market{0};
  outcome y{0};
  belief initial{0.5};
  std::vector<report_record> reports;
  std::size_t terminal_step{0};
  std::vector<std::vector<reference_ref>> references; // per agent; empty = flat fee
  std::vector<score> payouts;
  score mechanism_cost{0.0};

  bool fee_paid(std::size_t agent) const { return references.at(agent - 1).empty(); }

  /// q^(t); q^(0) is the initial report.
  belief report(std::size_t t) const { return t == 0 ? initial : reports.at(t - 1).report; }
};

namespace detail {

inline belief choose_report(const strategy& s, const signal_model& model, belief public_belief, std::size_t signal,
                            belief previous) {
  switch (s.what) {
  case strategy::kind::truthful: return posterior(public_belief, model, signal);
  case strategy::kind::report_as_signal:
    if (s.signal >= model.size()) throw config_error("report_as_signal index out of range");
    return posterior(public_belief, model, s.signal);
  case strategy::kind::uninformative:
  case strategy::kind::fixed: return s.q;
  case strategy::kind::switching: return previous.permuted();
  case strategy::kind::permutation: return posterior(public_belief, model, signal).permuted();
  }
  return posterior(public_belief, model, signal);
}

// Updates the public belief with what a report reveals.
inline std::optional<std::size_t> decode_report(const market_config& cfg, const signal_model& model,
                                                belief& public_belief, belief report) {
  const belief read = cfg.beliefs == belief_profile::permuted ? report.permuted() : report;
  std::optional<std::size_t> s = invert_report(model, public_belief, read, cfg.invert_tolerance, cfg.floor);
  if (!s && cfg.invalid_reports == invalid_report_rule::nearest_signal) s = nearest_signal(model, public_belief, read);
  if (s) public_belief = posterior(public_belief, model, *s);
  return s;
}

// Sequential reports until termination; signals from `use_realized` or fresh draws.
inline market_transcript simulate_reports(const market_config& cfg, const scenario& sc, const strategy_profile& profile,
                                          rng& gen, outcome y, bool use_realized) {
  market_transcript tr;
  tr.y = y;
  tr.initial = cfg.floor.apply(cfg.initial_report.value_or(sc.prior));
  belief public_belief = sc.prior;
  belief previous = tr.initial;
  for (std::size_t t = 1;; ++t) {
    const signal_model& model = sc.model_for(t - 1);
    std::size_t signal;
    if (use_realized && sc.realized_signals && t <= sc.realized_signals->size()) {
      signal = (*sc.realized_signals)[t - 1];
    } else {
      std::vector<double> column(model.size());
      for (std::size_t i = 0; i < model.size(); ++i) column[i] = model.likelihood(i, y);
      signal = gen.categorical(column);
    }
    report_record rec;
    rec.agent = t;
    rec.signal = signal;
    rec.public_before = public_belief;
    rec.report = cfg.floor.apply(choose_report(profile(t), model, public_belief, signal, previous));
    rec.decoded = decode_report(cfg, model, public_belief, rec.report);
    previous = rec.report;
    tr.reports.push_back(rec);
    if (gen.bernoulli(cfg.alpha) || t >= cfg.max_agents) break;
  }
  tr.terminal_step = tr.reports.size();
  return tr;
}

inline belief reference_belief(const std::vector<const market_transcript*>& markets,
                               const std::vector<reference_ref>& refs) {
  std::vector<belief> beliefs;
  for (const auto& r : refs) beliefs.push_back(markets.at(r.market)->report(r.agent));
  return mean_belief(beliefs);
}

} // namespace detail

/// Assigns references and pays every agent of a single market.
inline void settle(market_transcript& tr, const market_config& cfg) {
  if (cfg.reference.what == reference_strategy::kind::parallel) {
    throw config_error("settle: parallel markets are settled by parallel_markets");
  }
  const std::size_t T = tr.terminal_step;
  const std::size_t m = cfg.reference_average;
  tr.references.assign(T, {});
  tr.payouts.assign(T, 0.0);
  for (std::size_t t = 1; t <= T; ++t) {
    std::size_t last = 0; // last agent of the averaging window, 0 = none
    switch (cfg.reference.what) {
    case reference_strategy::kind::terminal:
      if (T >= cfg.k + m - 1 && t + cfg.k + m - 1 <= T) last = T;
      break;
    case reference_strategy::kind::rolling: last = t + cfg.k + m - 1; break;
    case reference_strategy::kind::batch: last = ((t - 1) / cfg.reference.size + 2) * cfg.reference.size; break;
    case reference_strategy::kind::parallel: break;
    }
    if (last == 0 || last > T) continue;
    for (std::size_t j = last + 1 - m; j <= last; ++j) tr.references[t - 1].push_back({tr.market, j});
  }
  const std::vector<const market_transcript*> self{&tr};
  tr.mechanism_cost = 0.0;
  for (std::size_t t = 1; t <= T; ++t) {
    if (tr.references[t - 1].empty()) {
      tr.payouts[t - 1] = cfg.flat_fee;
    } else {
      const belief r = detail::reference_belief(self, tr.references[t - 1]);
      tr.payouts[t - 1] = ce_msr(r, tr.report(t), tr.report(t - 1), cfg.floor);
    }
    tr.mechanism_cost += tr.payouts[t - 1];
  }
}

/// One market: draws Y and signals, collects reports, terminates with
/// probability alpha after each report, then settles. Deterministic in cfg.seed.
inline market_transcript run_market(const market_config& cfg, const scenario& sc,
                                    const strategy_profile& profile = {}) {
  cfg.validate();
  sc.validate();
  if (cfg.reference.what == reference_strategy::kind::parallel) {
    throw config_error("run_market: use parallel_markets for the parallel reference strategy");
  }
  rng gen(cfg.seed);
  const outcome y = sc.realized_outcome.value_or(gen.bernoulli(sc.prior.p1()) ? 1 : 0);
  market_transcript tr = detail::simulate_reports(cfg, sc, profile, gen, y, true);
  settle(tr, cfg);
  return tr;
}

/// Walled-off markets sharing one outcome. Agents of market A see only market
/// A and are scored against the terminal report of market (A + 1) mod n. No
/// flat fees are needed since no reference ever saw the scored report.
inline std::vector<market_transcript> parallel_markets(const market_config& cfg, const scenario& sc,
                                                       const strategy_profile& profile = {}) {
  cfg.validate();
  sc.validate();
  const std::size_t n = cfg.reference.markets;
  if (n < 2) throw config_error("parallel_markets: need at least 2 markets");
  rng master(cfg.seed);
  const outcome y = sc.realized_outcome.value_or(master.bernoulli(sc.prior.p1()) ? 1 : 0);
  std::vector<market_transcript> out;
  for (std::size_t a = 0; a < n; ++a) {
    rng gen(stream_seed(cfg.seed, a + 1));
    out.push_back(detail::simulate_reports(cfg, sc, profile, gen, y, false));
    out.back().market = a;
  }
  std::vector<const market_transcript*> all;
  for (const auto& tr : out) all.push_back(&tr);
  for (std::size_t a = 0; a < n; ++a) {
    market_transcript& tr = out[a];
    const std::size_t b = (a + 1) % n;
    const std::size_t tb = out[b].terminal_step;
    const std::size_t m = std::min(cfg.reference_average, tb);
    tr.references.assign(tr.terminal_step, {});
    tr.payouts.assign(tr.terminal_step, 0.0);
    tr.mechanism_cost = 0.0;
    for (std::size_t t = 1; t <= tr.terminal_step; ++t) {
      for (std::size_t j = tb + 1 - m; j <= tb; ++j) tr.references[t - 1].push_back({b, j});
      const belief r = detail::reference_belief(all, tr.references[t - 1]);
      tr.payouts[t - 1] = ce_msr(r, tr.report(t), tr.report(t - 1), cfg.floor);
      tr.mechanism_cost += tr.payouts[t - 1];
    }
  }
  return out;
}

/// Expected utility under random stopping: with probability 1 - (1-alpha)^k the
/// market ends inside the agent's fee zone and pays R.
struct random_stop_utility {
  double fee_probability{0.0};  // 1 - (1 - alpha)^k
  double score_probability{1.0}; // (1 - alpha)^k
  double gain_bound{0.0};       // (1 - alpha)^k eps
  double expected_utility{0.0}; // fee_probability R + score_probability E[S]
};

inline random_stop_utility expected_utility_random_stop(double alpha, std::size_t k, double eps,
                                                        double flat_fee = 0.0, double expected_score = 0.0) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw domain_error("alpha must be in (0, 1]");
  random_stop_utility u;
  u.score_probability = std::pow(1.0 - alpha, static_cast<double>(k));
  u.fee_probability = 1.0 - u.score_probability;
  u.gain_bound = u.score_probability * eps;
  u.expected_utility = u.fee_probability * flat_fee + u.score_probability * expected_score;
  return u;
}

/// Random stopping without flat fees: every agent is scored against the
/// terminal report, at a geometric distance d. The gain at distance d is capped
/// by ln(1/min prior) and by the sign-aware market-rule bound at
/// |Delta| <= delta_bound(delta_gap, eta, d), worst case over a prior grid.
struct no_fee_design {
  double alpha{0.0};
  double expected_gain_bound{0.0};
  std::vector<double> gain_by_distance; // G(d)
};

namespace detail {

inline std::vector<double> gain_by_distance(double eps, double delta_gap, double eta_min, double y_min, double y_max,
                                            std::size_t grid_points) {
  const std::vector<double> grid = linspace(y_min, y_max, grid_points);
  const double cap = std::log(1.0 / std::min(y_min, 1.0 - y_max));
  std::vector<double> g{cap};
  for (std::size_t d = 1; d < 100000; ++d) {
    const double b = delta_bound(delta_gap, eta_min, d);
    double worst = 0.0;
    for (double y1 : grid) {
      const belief y{y1};
      worst = std::max({worst, deviation_gain_bound(rule::cemsr, b, y, eta_min),
                        deviation_gain_bound(rule::cemsr, -b, y, eta_min)});
    }
    g.push_back(std::min(cap, worst));
    if (g.back() < 1e-16 * eps) break;
  }
  return g;
}

inline double expected_gain(const std::vector<double>& g, double alpha) {
  double e = 0.0, w = alpha;
  for (double gd : g) {
    e += w * gd;
    w *= 1.0 - alpha;
  }
  return e;
}

} // namespace detail

/// Largest alpha whose expected deviation-gain bound stays at or below eps.
inline no_fee_design alpha_without_flat_fees(double eps, double delta_gap, double eta_min, double y_min = 0.01,
                                             double y_max = 0.99, std::size_t grid_points = 99) {
  if (!(eps > 0.0)) throw domain_error("eps must be positive");
  if (!(y_min > 0.0 && y_max < 1.0 && y_min <= y_max)) throw domain_error("bad prior range");
  no_fee_design out;
  out.gain_by_distance = detail::gain_by_distance(eps, delta_gap, eta_min, y_min, y_max, grid_points);
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (detail::expected_gain(out.gain_by_distance, mid) <= eps) lo = mid;
    else hi = mid;
  }
  out.alpha = lo;
  out.expected_gain_bound = detail::expected_gain(out.gain_by_distance, lo);
  return out;
}

} // namespace selfres
