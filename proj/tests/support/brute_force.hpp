#pragma once

// Random deviation contexts and a joint-table enumeration of what the
// expectation module computes in closed form.

#include <algorithm>
#include <random>
#include <vector>

#include "oracle.hpp"
#include "selfres/expectation.hpp"

namespace oracle {

using namespace selfres;

inline selfres::deviation_context random_context(std::mt19937_64& rng, std::size_t k, bool hidden = false) {
  deviation_context ctx;
  ctx.prior = belief{std::uniform_real_distribution<double>(0.05, 0.95)(rng)};
  const std::size_t shared = rng() % 3;
  for (std::size_t i = 0; i < shared; ++i) {
    signal_model m = oracle::random_model(rng, 2 + rng() % 3);
    const std::size_t s = rng() % m.size();
    ctx.shared.push_back({m, s});
  }
  ctx.own_model = oracle::random_model(rng, 2 + rng() % 3);
  ctx.true_signal = rng() % ctx.own_model.size();
  if (!hidden) ctx.reported_signal = rng() % ctx.own_model.size();
  for (std::size_t i = 0; i < k; ++i) ctx.reference_models.push_back(oracle::random_model(rng, 2 + rng() % 3));
  return ctx;
}

struct brute {
  double expectation;
  double own;
  double mu;
};

// Everything from one joint table over (Y, shared, own, reference signals).
inline brute enumerate(const deviation_context& ctx) {
  std::vector<signal_model> models;
  for (const auto& o : ctx.shared) models.push_back(o.model);
  models.push_back(ctx.own_model);
  for (const auto& m : ctx.reference_models) models.push_back(m);
  const auto table = oracle::joint_table(ctx.prior.p1(), models);
  const std::size_t ns = ctx.shared.size();
  const std::size_t own = ns;

  std::vector<std::size_t> known, truth, claimed;
  for (std::size_t i = 0; i < ns; ++i) {
    known.push_back(i);
    truth.push_back(ctx.shared[i].signal);
  }
  known.push_back(own);
  truth.push_back(ctx.true_signal);
  claimed = truth;
  if (ctx.reported_signal) claimed.back() = *ctx.reported_signal;

  brute out{0.0, oracle::conditional(table, known, truth), 0.0};

  // P(x_r | truth) and the reference's posterior per reference profile
  double norm_true = 0.0, norm_claim = 0.0;
  std::vector<std::vector<std::size_t>> profiles;
  std::vector<double> w_true, p1_claim, p0_claim;
  for (const auto& e : table) {
    bool t = true, c = true;
    for (std::size_t i = 0; i < known.size(); ++i) {
      t = t && e.signals[known[i]] == truth[i];
      c = c && e.signals[known[i]] == claimed[i];
    }
    const std::vector<std::size_t> ref(e.signals.begin() + ns + 1, e.signals.end());
    auto it = std::find(profiles.begin(), profiles.end(), ref);
    std::size_t idx = it - profiles.begin();
    if (it == profiles.end()) {
      profiles.push_back(ref);
      w_true.push_back(0.0);
      p1_claim.push_back(0.0);
      p0_claim.push_back(0.0);
    }
    if (t) {
      w_true[idx] += e.p[0] + e.p[1];
      norm_true += e.p[0] + e.p[1];
    }
    if (c) {
      p1_claim[idx] += e.p[1];
      p0_claim[idx] += e.p[0];
      norm_claim += e.p[0] + e.p[1];
    }
  }
  std::vector<std::size_t> ref_agents, shared_agents;
  for (std::size_t i = 0; i < ctx.reference_models.size(); ++i) ref_agents.push_back(ns + 1 + i);
  for (std::size_t i = 0; i < ns; ++i) shared_agents.push_back(i);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    double ref_post;
    if (ctx.reported_signal) {
      ref_post = p1_claim[i] / (p1_claim[i] + p0_claim[i]);
      const double a = p1_claim[i] / norm_claim, b = p0_claim[i] / norm_claim;
      out.mu += 1.0 / (1.0 / a + 1.0 / b);
    } else {
      std::vector<std::size_t> agents = shared_agents, values = truth;
      values.pop_back();
      agents.insert(agents.end(), ref_agents.begin(), ref_agents.end());
      values.insert(values.end(), profiles[i].begin(), profiles[i].end());
      ref_post = oracle::conditional(table, agents, values);
    }
    out.expectation += w_true[i] / norm_true * ref_post;
  }
  return out;
}


} // namespace oracle
