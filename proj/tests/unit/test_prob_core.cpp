#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracle.hpp"
#include "selfres/prob_core.hpp"
#include "worked_example.hpp"

using namespace selfres;
using Catch::Approx;

TEST_CASE("bhattacharyya coefficient", "[prob_core]") {
  CHECK(bhattacharyya(signal_model{{0.3, 0.3}, {0.7, 0.7}}) == Approx(1.0).margin(1e-15));
  CHECK(bhattacharyya(signal_model::symmetric(0.9)) == Approx(0.6).margin(1e-15));
  const signal_model three{{0.2, 0.5}, {0.3, 0.3}, {0.5, 0.2}};
  CHECK(bhattacharyya(three) == Approx(2.0 * std::sqrt(0.1) + 0.3).margin(1e-15));
  CHECK(bhattacharyya(three) == Approx(0.9325).margin(1e-4));
  CHECK(bhattacharyya_distance(signal_model::symmetric(0.9)) == Approx(-std::log(0.6)));
  CHECK(delta_gap(signal_model::symmetric(0.9)) == Approx(0.4));
}

TEST_CASE("eta and pool eta", "[prob_core]") {
  CHECK(eta(signal_model::symmetric(0.9)) == Approx(0.1));
  CHECK(eta(signal_model{{0.5, 0.5}, {0.5, 0.5}}) == 0.5);
  const std::vector<signal_model> pool{signal_model::symmetric(0.9), signal_model::symmetric(0.7),
                                       signal_model{{0.05, 0.5}, {0.95, 0.5}}};
  CHECK(pool_eta(pool) == Approx(0.05));
  CHECK(pool_delta_gap(pool) == Approx(1.0 - bhattacharyya(pool[1])));
}

TEST_CASE("signal model validation", "[prob_core]") {
  CHECK_THROWS_AS(signal_model({{0.5, 0.5}, {0.6, 0.5}}), domain_error);
  CHECK_THROWS_AS(signal_model({{0.0, 0.5}, {1.0, 0.5}}), domain_error);
  CHECK_THROWS_AS(signal_model(std::vector<signal_model::row>{}), domain_error);
  CHECK(signal_model::symmetric(0.8).stochastically_relevant());
  CHECK_FALSE(signal_model({{0.5, 0.5}, {0.5, 0.5}}).stochastically_relevant());
  CHECK(signal_model::symmetric(0.8).permuted().permuted() == signal_model::symmetric(0.8));
}

TEST_CASE("belief domain", "[prob_core]") {
  CHECK_THROWS_AS(belief{1.5}, domain_error);
  CHECK_THROWS_AS(belief{-0.1}, domain_error);
  CHECK(belief{0.3}.p0() == Approx(0.7));
  CHECK(belief{0.3}.permuted().p1() == Approx(0.7));
}

TEST_CASE("posterior", "[prob_core]") {
  const signal_model flat{{0.3, 0.3}, {0.7, 0.7}};
  for (double p : {0.0, 0.1, 0.5, 0.93, 1.0}) {
    CHECK(posterior(belief{p}, flat, 0).p1() == Approx(p).margin(1e-15));
    CHECK(posterior(belief{p}, flat, 1).p1() == Approx(p).margin(1e-15));
  }
  const signal_model first = worked::first_agent();
  CHECK(posterior(belief{0.5}, first, 0).p1() == Approx(0.49).margin(1e-12));
  CHECK(posterior(belief{0.5}, first, 1).p1() == Approx(0.99).margin(1e-12));
  const belief after = posterior(belief{0.49}, worked::second_agent(), 0);
  CHECK(after.p1() == Approx(0.49 * 0.99 / (0.49 * 0.99 + 0.51)).margin(1e-12));
  CHECK(after.p1() == Approx(0.4875).margin(1e-3));
  CHECK(posterior(belief{0.49}, worked::second_agent(), 1).p1() == Approx(0.492).margin(1e-3));
  CHECK_THROWS_AS(posterior(belief{0.5}, first, 2), domain_error);
}

TEST_CASE("aggregate posterior against the joint table", "[prob_core]") {
  CHECK(aggregate_posterior(belief{0.3}, {}, {}).p1() == 0.3);
  const signal_model m = signal_model::symmetric(0.8);
  const std::vector<signal_model> one{m};
  const std::vector<std::size_t> s1{1};
  CHECK(aggregate_posterior(belief{0.3}, one, s1) == posterior(belief{0.3}, m, 1));
  CHECK_THROWS_AS(aggregate_posterior(belief{0.3}, one, std::vector<std::size_t>{}), domain_error);
  CHECK_THROWS_AS(aggregate_posterior(belief{0.3}, one, std::vector<std::size_t>{5}), domain_error);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  double worst = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t agents = 1 + rng() % 4;
    std::vector<signal_model> models;
    for (std::size_t j = 0; j < agents; ++j) models.push_back(oracle::random_model(rng, 2 + rng() % 3));
    const double p = u(rng);
    const auto table = oracle::joint_table(p, models);
    std::vector<std::size_t> idx(agents), signals(agents);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t j = 0; j < agents; ++j) signals[j] = rng() % models[j].size();
    const double brute = oracle::conditional(table, idx, signals);
    worst = std::max(worst, std::abs(aggregate_posterior(belief{p}, models, signals).p1() - brute));

    // order does not matter
    std::vector<std::size_t> perm = idx;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<signal_model> pm;
    std::vector<std::size_t> ps;
    for (std::size_t j : perm) {
      pm.push_back(models[j]);
      ps.push_back(signals[j]);
    }
    worst = std::max(worst, std::abs(aggregate_posterior(belief{p}, pm, ps).p1() - brute));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("long signal sequences stay finite", "[prob_core]") {
  std::vector<signal_model> models(2000, signal_model::symmetric(0.6));
  std::vector<std::size_t> signals(2000, 0);
  signals[0] = 1;
  const belief b = aggregate_posterior(belief{0.5}, models, signals);
  CHECK(b.p1() >= 0.0);
  CHECK(b.p1() < 1e-100);
}

TEST_CASE("report inversion", "[prob_core]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const signal_model m = oracle::random_model(rng, 2 + rng() % 3);
    const belief ctx{std::uniform_real_distribution<double>(0.05, 0.95)(rng)};
    for (std::size_t s = 0; s < m.size(); ++s) {
      CHECK(invert_report(m, ctx, posterior(ctx, m, s)) == s);
      const belief nudged{posterior(ctx, m, s).p1() + 0.4 * default_invert_tolerance};
      CHECK(invert_report(m, ctx, nudged) == s);
    }
  }
  CHECK_FALSE(invert_report(signal_model::symmetric(0.8), belief{0.5}, belief{0.5}).has_value());
  const belief p = posterior(belief{0.5}, signal_model::symmetric(0.8), 1);
  CHECK_FALSE(invert_report(signal_model::symmetric(0.8), belief{0.5}, belief{p.p1() + 1e-6}).has_value());
  CHECK(nearest_signal(signal_model::symmetric(0.8), belief{0.5}, belief{0.7}) == 1);
  // reports under a floor are matched after clamping
  const floor_policy f = floor_policy::clamp(0.05);
  const signal_model sharp = signal_model::symmetric(0.99);
  CHECK(invert_report(sharp, belief{0.5}, belief{0.95}, default_invert_tolerance, f) == 1);
}

TEST_CASE("posterior sorted by likelihood ratio", "[prob_core]") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const signal_model m = oracle::random_model(rng, 4);
    std::vector<std::size_t> order(4);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](auto a, auto b) { return m.likelihood_ratio(a) < m.likelihood_ratio(b); });
    for (std::size_t i = 1; i < 4; ++i) {
      CHECK(posterior(belief{0.4}, m, order[i - 1]).p1() <= posterior(belief{0.4}, m, order[i]).p1());
    }
    CHECK(bhattacharyya(m) < 1.0);
  }
}

TEST_CASE("profile enumeration", "[prob_core]") {
  const std::vector<signal_model> models{signal_model::symmetric(0.7), signal_model{{0.2, 0.5}, {0.3, 0.3}, {0.5, 0.2}}};
  std::size_t n = 0;
  double total1 = 0.0, total0 = 0.0;
  for_each_profile(std::span<const signal_model>(models), [&](const std::vector<std::size_t>& p, double l1, double l0) {
    CHECK(l1 == Approx(models[0].likelihood(p[0], 1) * models[1].likelihood(p[1], 1)));
    CHECK(l0 == Approx(models[0].likelihood(p[0], 0) * models[1].likelihood(p[1], 0)));
    total1 += l1;
    total0 += l0;
    ++n;
  });
  CHECK(n == 6);
  CHECK(total1 == Approx(1.0));
  CHECK(total0 == Approx(1.0));
  std::size_t empty = 0;
  for_each_profile(std::span<const signal_model>(), [&](const auto& p, double l1, double) {
    CHECK(p.empty());
    CHECK(l1 == 1.0);
    ++empty;
  });
  CHECK(empty == 1);
  CHECK(profile_count(models, 100) == 6);
  CHECK(profile_count(models, 3) == 4);
}

TEST_CASE("scenario validation and relabeling", "[prob_core]") {
  scenario s = worked::make();
  s.realized_outcome = 1;
  s.realized_signals = std::vector<std::size_t>{1, 0, 1};
  CHECK_NOTHROW(s.validate());
  CHECK(&s.model_for(2) == &s.models[0]);
  const scenario p = s.permuted();
  CHECK(*p.realized_outcome == 0);
  CHECK(p.models[0].likelihood(0, 1) == s.models[0].likelihood(0, 0));
  s.realized_signals = std::vector<std::size_t>{2};
  CHECK_THROWS_AS(s.validate(), domain_error);
}
