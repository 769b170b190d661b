// Size a market for one signal technology, run it once, print the ledger.
#include <cstdio>

#include "selfres/bounds.hpp"
#include "selfres/market.hpp"

using namespace selfres;

int main() {
  scenario sc;
  sc.prior = belief{0.5};
  sc.models = {signal_model::symmetric(0.9)};

  const double eps = 0.01;
  bounds_query q;
  q.epsilon = eps;
  q.delta_gap = delta_gap(sc.models[0]);
  q.eta = eta(sc.models[0]);
  q.kind = rule::cemsr;

  const std::size_t k = k_market(q, 0.1, 0.9, 17);
  std::printf("delta %.4g  eta %.4g  k %zu\n", q.delta_gap, q.eta, k);

  market_config cfg;
  cfg.k = k;
  cfg.alpha = alpha_from_T(20, k);
  cfg.flat_fee = 0.05;
  cfg.seed = 7;
  const market_transcript tr = run_market(cfg, sc);

  std::printf("y = %d, %zu agents\n", static_cast<int>(tr.y), tr.terminal_step);
  for (std::size_t t = 1; t <= tr.terminal_step; ++t) {
    std::printf("%3zu  signal %zu  q %.4f  %s %+.4f\n", t, tr.reports[t - 1].signal, tr.report(t).p1(),
                tr.fee_paid(t) ? "fee " : "score", tr.payouts[t - 1]);
  }
  std::printf("mechanism cost %.4f\n", tr.mechanism_cost);
}
