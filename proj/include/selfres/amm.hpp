#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "selfres/belief.hpp"
#include "selfres/errors.hpp"
#include "selfres/market.hpp"
#include "selfres/scoring.hpp"

namespace selfres {

/// Outstanding contracts (c0, c1) and liquidity b of a log-cost market maker.
struct amm_state {
  double c0{0.0};
  double c1{0.0};
  double b{1.0};

  void validate() const {
    if (!(b > 0.0) || !std::isfinite(b)) throw domain_error("amm: b must be positive");
    if (!std::isfinite(c0) || !std::isfinite(c1)) throw domain_error("amm: quantities must be finite");
  }
};

/// b ln(e^(c0/b) + e^(c1/b)), shifted by max(c) so large books do not overflow.
inline double cost(const amm_state& s) {
  s.validate();
  const double m = std::max(s.c0, s.c1);
  return m + s.b * std::log(std::exp((s.c0 - m) / s.b) + std::exp((s.c1 - m) / s.b));
}

/// Softmax of c / b.
inline belief price(const amm_state& s) {
  s.validate();
  const double m = std::max(s.c0, s.c1);
  return belief::from_weights(std::exp((s.c1 - m) / s.b), std::exp((s.c0 - m) / s.b));
}

struct trade {
  amm_state after;
  double cash{0.0}; // paid in by the trader; negative means received
};

/// Moves the price to `target`. The quantity change is spread evenly:
/// dc_i = b (ln target_i - ln price_i) minus their mean, so dc0 = -dc1.
inline trade trade_to_belief(const amm_state& s, belief target) {
  s.validate();
  if (!target.interior()) throw domain_error("amm: target must be interior");
  const belief p = price(s);
  const double d1 = s.b * (std::log(target.p1()) - std::log(p.p1()));
  const double d0 = s.b * (std::log(target.p0()) - std::log(p.p0()));
  const double shift = 0.5 * (d0 + d1);
  trade t{{s.c0 + d0 - shift, s.c1 + d1 - shift, s.b}, 0.0};
  t.cash = cost(t.after) - cost(s);
  return t;
}

struct amm_settlement {
  double payout{0.0};     // c . r paid to contract holders
  double maker_loss{0.0}; // payout - cost(state)
};

/// Contracts pay r_i per unit.
inline amm_settlement settle_amm(const amm_state& s, belief reference) {
  amm_settlement out;
  out.payout = s.c0 * reference.p0() + s.c1 * reference.p1();
  out.maker_loss = out.payout - cost(s);
  return out;
}

/// Max residual of b S_CE(r, price(c)) = c.r - C(c) over a path of states,
/// and of b S_CEM(r, q_t, q_t-1) = (c_t - c_t-1).r - (C(c_t) - C(c_t-1)) over its steps.
struct equivalence_residuals {
  double score{0.0};
  double market_score{0.0};
};

inline equivalence_residuals equivalence_check(const std::vector<amm_state>& path, belief reference) {
  equivalence_residuals res;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const amm_state& s = path[i];
    const double lhs = s.b * cross_entropy_score(reference, price(s));
    const double rhs = settle_amm(s, reference).maker_loss;
    res.score = std::max(res.score, std::abs(lhs - rhs));
    if (i == 0) continue;
    const amm_state& p = path[i - 1];
    const double msr = s.b * ce_msr(reference, price(s), price(p));
    const double profit = (s.c0 - p.c0) * reference.p0() + (s.c1 - p.c1) * reference.p1() - (cost(s) - cost(p));
    res.market_score = std::max(res.market_score, std::abs(msr - profit));
  }
  return res;
}

/// Replays a transcript through a market maker with liquidity b, starting at
/// c = b ln q^(0). Returns each agent's trading profit against their reference;
/// fee-zone agents get 0 here.
struct replay_result {
  std::vector<double> profits;
  double max_residual{0.0}; // |profit - b payout| over scored agents
};

inline replay_result replay_transcript(const market_transcript& tr, double b) {
  if (!tr.initial.interior()) throw domain_error("replay: initial report must be interior");
  std::vector<amm_state> states{{b * std::log(tr.initial.p0()), b * std::log(tr.initial.p1()), b}};
  for (std::size_t t = 1; t <= tr.terminal_step; ++t) states.push_back(trade_to_belief(states.back(), tr.report(t)).after);
  replay_result out;
  out.profits.assign(tr.terminal_step, 0.0);
  for (std::size_t t = 1; t <= tr.terminal_step; ++t) {
    if (tr.references.at(t - 1).empty()) continue;
    std::vector<belief> refs;
    for (const auto& r : tr.references[t - 1]) refs.push_back(tr.report(r.agent));
    const belief r = mean_belief(refs);
    const amm_state& now = states[t];
    const amm_state& before = states[t - 1];
    out.profits[t - 1] = (now.c0 - before.c0) * r.p0() + (now.c1 - before.c1) * r.p1() - (cost(now) - cost(before));
    out.max_residual = std::max(out.max_residual, std::abs(out.profits[t - 1] - b * tr.payouts[t - 1]));
  }
  return out;
}

} // namespace selfres
