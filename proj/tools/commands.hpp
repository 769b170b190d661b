#pragma once

// Subcommands of the selfres tool. Each returns an exit code:
// 0 all checks passed, 2 a check failed, 1 configuration or IO error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfres/amm.hpp"
#include "selfres/bounds.hpp"
#include "selfres/equilibria.hpp"
#include "selfres/io.hpp"
#include "selfres/market.hpp"
#include "selfres/parallel.hpp"
#include "svg.hpp"

namespace selfres::cli {

using io::json;
namespace fs = std::filesystem;

inline constexpr int exit_ok = 0;
inline constexpr int exit_error = 1;
inline constexpr int exit_check = 2;

inline constexpr int schema_version = 1;

struct options {
  fs::path config;
  fs::path out{"out"};
  std::optional<std::uint64_t> seed;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> seeds;
  std::string format{"csv"};
  bool bits{false};
};

/// "a..b", inclusive.
inline std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      const std::uint64_t v = std::stoull(s);
      return {v, v};
    }
    std::size_t used = 0;
    const std::uint64_t a = std::stoull(s.substr(0, dots), &used);
    if (used != dots) throw config_error("");
    const std::string rest = s.substr(dots + 2);
    const std::uint64_t b = std::stoull(rest, &used);
    if (used != rest.size()) throw config_error("");
    if (b < a) throw config_error("seed range " + s + " is empty");
    return {a, b};
  } catch (const config_error&) {
    throw config_error("bad seed range '" + s + "', expected a..b");
  } catch (const std::exception&) {
    throw config_error("bad seed range '" + s + "', expected a..b");
  }
}

namespace detail {

inline json load_config(const options& opt) {
  if (opt.config.empty()) return json::object();
  json cfg = io::read_json_file(opt.config);
  if (!cfg.is_object()) throw config_error("config must be a JSON object");
  const int v = cfg.value("version", schema_version);
  if (v != schema_version) throw config_error("unsupported config version " + std::to_string(v));
  return cfg;
}

// A scenario inline, or a path relative to the config file.
inline scenario load_scenario(const json& node, const options& opt) {
  if (node.is_string()) {
    fs::path p = node.get<std::string>();
    if (p.is_relative() && !opt.config.empty()) p = opt.config.parent_path() / p;
    return io::scenario_from_json(io::read_json_file(p));
  }
  return io::scenario_from_json(node);
}

// A list of numbers, or {"min", "max", "points"}.
inline std::vector<double> grid(const json& cfg, const std::string& key, std::vector<double> fallback) {
  if (!cfg.contains(key)) return fallback;
  const json& g = cfg[key];
  try {
    if (g.is_number()) return {g.get<double>()};
    if (g.is_array()) return g.get<std::vector<double>>();
    return linspace(g.at("min").get<double>(), g.at("max").get<double>(), g.at("points").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw config_error(key + ": " + e.what());
  }
}

inline std::vector<rule> rules(const json& cfg) {
  std::vector<rule> out;
  for (const auto& r : cfg.value("rules", std::vector<std::string>{"CE", "CEMSR"})) {
    try {
      out.push_back(parse_rule(r));
    } catch (const domain_error& e) {
      throw config_error(e.what());
    }
  }
  return out;
}

inline bound_convention convention(const json& cfg) {
  const std::string c = cfg.value("convention", "literal");
  if (c == "literal") return bound_convention::literal;
  if (c == "sign_symmetric") return bound_convention::sign_symmetric;
  throw config_error("unknown convention '" + c + "'");
}

inline std::vector<std::uint64_t> seed_list(const options& opt, const json& cfg, std::uint64_t fallback) {
  std::pair<std::uint64_t, std::uint64_t> r{fallback, fallback};
  if (opt.seeds) r = *opt.seeds;
  else if (opt.seed) r = {*opt.seed, *opt.seed};
  else if (cfg.contains("seeds")) r = parse_seed_range(cfg["seeds"].get<std::string>());
  else if (cfg.contains("seed")) r = {cfg["seed"].get<std::uint64_t>(), cfg["seed"].get<std::uint64_t>()};
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = r.first;; ++s) {
    out.push_back(s);
    if (s == r.second) break;
  }
  return out;
}

inline double unit(const options& opt) { return opt.bits ? 1.0 / std::log(2.0) : 1.0; }

inline std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return io::fmt17(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Rows share the key order of the first row.
inline std::string to_csv(const json& rows) {
  std::vector<std::string> header;
  if (!rows.empty()) {
    for (auto it = rows.front().begin(); it != rows.front().end(); ++it) header.push_back(it.key());
  }
  io::csv t(header);
  for (const auto& r : rows) {
    t.row();
    for (const auto& h : header) t.add(csv_cell(r.contains(h) ? r[h] : json()));
  }
  return t.str();
}

// One table, as <name>.csv or <name>.json depending on --format.
inline void write_table(const options& opt, const std::string& name, const json& rows) {
  if (opt.format == "json") io::atomic_write(opt.out / (name + ".json"), io::dump(rows) + "\n");
  else io::atomic_write(opt.out / (name + ".csv"), to_csv(rows));
}

inline std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

} // namespace detail

// ---- bounds -----------------------------------------------------------------

/// (rule, eps, delta, eta, y1) -> (eps', k_min), plus the prior-grid maximum.
inline int cmd_bounds(const options& opt, std::ostream& log) {
  const json cfg = detail::load_config(opt);
  const auto rules = detail::rules(cfg);
  const auto conv = detail::convention(cfg);
  const auto eps = detail::grid(cfg, "epsilon", {0.1, 0.01, 0.001});
  const auto deltas = detail::grid(cfg, "delta", {0.05, 0.1, 0.2});
  const auto etas = detail::grid(cfg, "eta", {0.05, 0.1, 0.2});
  const auto ys = detail::grid(cfg, "y1", linspace(0.01, 0.99, 99));

  // eps' does not depend on delta, so solve once per (rule, eps, eta, y1)
  struct cell {
    rule r;
    double e, eta, y;
    std::optional<bounds_result> res;
    std::string error;
  };
  std::vector<cell> cells;
  for (rule r : rules)
    for (double e : eps)
      for (double et : etas)
        for (double y : ys) cells.push_back({r, e, et, y, std::nullopt, ""});
  parallel_for(cells.size(), [&](std::size_t i) {
    cell& c = cells[i];
    try {
      bounds_query q{c.e, deltas.empty() ? 0.1 : deltas.front(), c.eta, belief{c.y}, c.r};
      c.res = k_min(q, conv);
    } catch (const error& ex) {
      c.error = ex.what();
    }
  });

  json rows = json::array();
  json summary = json::array();
  std::size_t failures = 0;
  std::size_t idx = 0;
  for (std::size_t ri = 0; ri < rules.size(); ++ri) {
    for (std::size_t ei = 0; ei < eps.size(); ++ei) {
      std::vector<svg::series> lines;
      for (double et : etas) {
        const std::size_t base = idx;
        idx += ys.size();
        for (double d : deltas) {
          svg::series line{"delta=" + detail::fmt_short(d) + " eta=" + detail::fmt_short(et), {}, {}};
          std::size_t kmax = 0, kmin = SIZE_MAX;
          bool complete = true;
          for (std::size_t yi = 0; yi < ys.size(); ++yi) {
            const cell& c = cells[base + yi];
            json row;
            row["rule"] = std::string(to_string(c.r));
            row["epsilon"] = c.e;
            row["delta"] = d;
            row["eta"] = c.eta;
            row["y1"] = c.y;
            if (c.res) {
              const std::size_t k = k_from_epsilon_prime(d, c.eta, c.res->eps_prime);
              row["eps_prime"] = c.res->eps_prime;
              row["k_min"] = k;
              row["branch"] = std::string(to_string(c.res->chosen));
              row["bracket_lo"] = c.res->bracket.lo;
              row["bracket_hi"] = c.res->bracket.hi;
              row["delta_star"] = c.res->delta_star;
              row["bracket_gap"] = c.res->bracket_gap;
              row["residual"] = c.res->residual;
              row["saturated"] = c.res->saturated;
              row["error"] = "";
              kmax = std::max(kmax, k);
              kmin = std::min(kmin, k);
              line.x.push_back(c.y);
              line.y.push_back(static_cast<double>(k));
            } else {
              for (const char* key : {"eps_prime", "k_min", "branch", "bracket_lo", "bracket_hi", "delta_star",
                                      "bracket_gap", "residual", "saturated"})
                row[key] = nullptr;
              row["error"] = c.error;
              complete = false;
              ++failures;
            }
            rows.push_back(row);
          }
          json s;
          s["rule"] = std::string(to_string(rules[ri]));
          s["epsilon"] = eps[ei];
          s["delta"] = d;
          s["eta"] = et;
          s["y1_min"] = ys.empty() ? 0.0 : ys.front();
          s["y1_max"] = ys.empty() ? 0.0 : ys.back();
          s["k_market"] = kmax;
          s["k_min_lowest"] = kmin == SIZE_MAX ? 0 : kmin;
          s["complete"] = complete;
          summary.push_back(s);
          lines.push_back(std::move(line));
        }
      }
      if (opt.format == "svg") {
        const std::string name = "kmin_" + std::string(to_string(rules[ri])) + "_eps" + std::to_string(ei) + ".svg";
        io::atomic_write(opt.out / name, svg::line_plot("k_min vs y1, " + std::string(to_string(rules[ri])) +
                                                            ", eps=" + detail::fmt_short(eps[ei]),
                                                        "y1", "k_min", lines));
      }
    }
  }
  detail::write_table(opt, "bounds", rows);
  detail::write_table(opt, "k_market", summary);
  log << "bounds: " << rows.size() << " rows, " << failures << " solver failures\n";
  return exit_ok;
}

// ---- curves -----------------------------------------------------------------

/// D vs Delta inside the valid bracket, and eps' vs y1.
inline int cmd_curves(const options& opt, std::ostream& log) {
  const json cfg = detail::load_config(opt);
  const auto rules = detail::rules(cfg);
  const auto conv = detail::convention(cfg);
  const auto ys = detail::grid(cfg, "y1", {0.1, 0.3, 0.5, 0.7, 0.9});
  const auto etas = detail::grid(cfg, "eta", {0.05, 0.1, 0.2});
  const auto eps = detail::grid(cfg, "epsilon", {0.1, 0.01, 0.001});
  const auto eps_ys = detail::grid(cfg, "eps_prime_y1", linspace(0.01, 0.99, 99));
  const std::size_t n = cfg.value("points_per_side", std::size_t{100});
  if (n < 1) throw config_error("points_per_side must be positive");
  const double u = detail::unit(opt);

  json d_rows = json::array();
  for (rule r : rules) {
    std::vector<svg::series> lines;
    for (double et : etas) {
      for (double y1 : ys) {
        const belief y{y1};
        const delta_range br = valid_delta_range(y, et, r);
        svg::series line{"y1=" + detail::fmt_short(y1) + " eta=" + detail::fmt_short(et), {}, {}};
        // n points per side, strictly inside the bracket, and Delta = 0
        std::vector<double> deltas;
        for (std::size_t j = n - 1; j >= 1; --j) deltas.push_back(br.lo * static_cast<double>(j) / n);
        deltas.push_back(0.0);
        for (std::size_t j = 1; j < n; ++j) deltas.push_back(br.hi * static_cast<double>(j) / n);
        for (double d : deltas) {
          const double D = bound_value(r, d, y, et) * u;
          json row;
          row["rule"] = std::string(to_string(r));
          row["y1"] = y1;
          row["eta"] = et;
          row["delta"] = d;
          row["D"] = io::number(D);
          row["bracket_lo"] = br.lo;
          row["bracket_hi"] = br.hi;
          d_rows.push_back(row);
          line.x.push_back(d);
          line.y.push_back(D);
        }
        lines.push_back(std::move(line));
      }
    }
    if (opt.format == "svg") {
      io::atomic_write(opt.out / ("d_curves_" + std::string(to_string(r)) + ".svg"),
                       svg::line_plot("deviation-gain bound, " + std::string(to_string(r)), "Delta",
                                      opt.bits ? "D (bits)" : "D (nats)", lines));
    }
  }

  json e_rows = json::array();
  std::size_t failures = 0;
  for (rule r : rules) {
    for (double et : etas) {
      std::vector<svg::series> lines;
      for (double e : eps) {
        svg::series line{"eps=" + detail::fmt_short(e), {}, {}};
        for (double y1 : eps_ys) {
          json row;
          row["rule"] = std::string(to_string(r));
          row["eta"] = et;
          row["epsilon"] = e;
          row["y1"] = y1;
          try {
            const bounds_result res = k_min(bounds_query{e, 0.1, et, belief{y1}, r}, conv);
            row["eps_prime"] = res.eps_prime;
            row["branch"] = std::string(to_string(res.chosen));
            row["delta_star"] = res.delta_star;
            row["bracket_lo"] = res.bracket.lo;
            row["bracket_hi"] = res.bracket.hi;
            row["error"] = "";
            line.x.push_back(y1);
            line.y.push_back(res.eps_prime);
          } catch (const error& ex) {
            for (const char* key : {"eps_prime", "branch", "delta_star", "bracket_lo", "bracket_hi"}) row[key] = nullptr;
            row["error"] = ex.what();
            ++failures;
          }
          e_rows.push_back(row);
        }
        lines.push_back(std::move(line));
      }
      if (opt.format == "svg") {
        io::atomic_write(opt.out / ("eps_prime_" + std::string(to_string(r)) + "_eta" + detail::fmt_short(et) + ".svg"),
                         svg::line_plot("eps' vs y1, " + std::string(to_string(r)) + ", eta=" + detail::fmt_short(et),
                                        "y1", "eps'", lines, true));
      }
    }
  }
  detail::write_table(opt, "d_curves", d_rows);
  detail::write_table(opt, "eps_prime_curves", e_rows);
  log << "curves: " << d_rows.size() << " D rows, " << e_rows.size() << " eps' rows, " << failures
      << " solver failures\n";
  return exit_ok;
}

// ---- simulate ---------------------------------------------------------------

inline int cmd_simulate(const options& opt, std::ostream& log) {
  const json cfg = detail::load_config(opt);
  if (!cfg.contains("scenario")) throw config_error("simulate: config needs a scenario");
  const scenario sc = detail::load_scenario(cfg["scenario"], opt);
  const market_config base = io::market_from_json(cfg.value("market", json::object()));
  const strategy_profile profile = io::profile_from_json(cfg.value("strategies", json::object()));
  const auto seeds = detail::seed_list(opt, cfg, base.seed);
  const double u = detail::unit(opt);
  const bool parallel = base.reference.what == reference_strategy::kind::parallel;

  std::vector<json> rows(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    market_config c = base;
    c.seed = seeds[i];
    json row;
    row["seed"] = seeds[i];
    try {
      std::vector<market_transcript> trs;
      if (parallel) trs = parallel_markets(c, sc, profile);
      else trs.push_back(run_market(c, sc, profile));
      json doc;
      doc["version"] = schema_version;
      doc["seed"] = seeds[i];
      doc["config"] = io::to_json(c);
      doc["markets"] = json::array();
      std::size_t agents = 0, fee = 0;
      double cost = 0.0, worst = 0.0;
      bool finite = true;
      for (const auto& tr : trs) {
        doc["markets"].push_back(io::to_json(tr, u));
        agents += tr.terminal_step;
        for (std::size_t t = 1; t <= tr.terminal_step; ++t) {
          fee += tr.fee_paid(t) ? 1 : 0;
          finite = finite && std::isfinite(tr.payouts[t - 1]);
          worst = std::max(worst, std::abs(tr.payouts[t - 1]));
        }
        cost += tr.mechanism_cost;
      }
      io::atomic_write(opt.out / "transcripts" / ("seed_" + std::to_string(seeds[i]) + ".json"), io::dump(doc) + "\n");
      row["outcome"] = trs.front().y;
      row["agents"] = agents;
      row["fee_paid"] = fee;
      row["scored"] = agents - fee;
      row["mechanism_cost"] = io::number(cost * u);
      row["max_abs_payout"] = io::number(worst * u);
      row["finite"] = finite;
      row["error"] = "";
    } catch (const error& ex) {
      for (const char* key : {"outcome", "agents", "fee_paid", "scored", "mechanism_cost", "max_abs_payout", "finite"})
        row[key] = nullptr;
      row["error"] = ex.what();
    }
    rows[i] = row;
  });

  json table = json::array();
  std::size_t errors = 0, infinite = 0;
  for (const auto& r : rows) {
    table.push_back(r);
    if (!r["error"].get<std::string>().empty()) ++errors;
    else if (!r["finite"].get<bool>()) ++infinite;
  }
  detail::write_table(opt, "summary", table);
  log << "simulate: " << seeds.size() << " runs, " << errors << " errors, " << infinite
      << " with non-finite payouts\n";
  if (errors) return exit_error;
  // a clamped floor promises finite payouts
  if (infinite && base.floor.clamps()) return exit_check;
  return exit_ok;
}

// ---- audit ------------------------------------------------------------------

inline int cmd_audit(const options& opt, std::ostream& log) {
  const json cfg = detail::load_config(opt);
  if (!cfg.contains("scenario")) throw config_error("audit: config needs a scenario");
  const scenario sc = detail::load_scenario(cfg["scenario"], opt);
  audit_config ac;
  ac.length = cfg.value("length", std::size_t{2});
  ac.epsilon = cfg.value("epsilon", 0.01);
  ac.outcome_cap = cfg.value("outcome_cap", ac.outcome_cap);
  ac.mc_samples = cfg.value("mc_samples", ac.mc_samples);
  ac.seed = opt.seed.value_or(cfg.value("seed", ac.seed));
  ac.grid_deviations = cfg.value("grid_deviations", true);
  ac.invert_tolerance = cfg.value("invert_tolerance", default_invert_tolerance);
  if (ac.length < 1) throw config_error("audit: length must be positive");

  const auto pool = selfres::detail::chain_models(sc, 1, ac.length);
  const double pool_delta = pool_delta_gap(pool);
  const double pool_et = pool_eta(pool);
  const json kj = cfg.value("k", json("auto"));
  if (kj.is_string()) {
    if (kj.get<std::string>() != "auto") throw config_error("audit: k must be a count or \"auto\"");
    const auto yr = cfg.value("y_range", std::vector<double>{0.01, 0.99});
    if (yr.size() != 2) throw config_error("audit: y_range needs two entries");
    ac.k = k_market(bounds_query{ac.epsilon, pool_delta, pool_et, belief{0.5}, rule::cemsr}, yr[0], yr[1],
                    cfg.value("grid_points", std::size_t{99}), detail::convention(cfg));
  } else {
    ac.k = kj.get<std::size_t>();
  }
  if (ac.k < 1) ac.k = 1;
  if (ac.k >= ac.length) {
    throw config_error("audit: length " + std::to_string(ac.length) + " leaves nobody to audit at k = " +
                       std::to_string(ac.k));
  }

  const double u = detail::unit(opt);
  const auto audits = audit_epsilon_pbe(sc, ac);
  json rows = json::array();
  bool pass = true;
  for (const auto& a : audits) {
    rows.push_back(io::to_json(a, u));
    pass = pass && a.within_epsilon() && a.within_bound();
  }
  json doc;
  doc["version"] = schema_version;
  doc["length"] = ac.length;
  doc["k"] = ac.k;
  doc["epsilon"] = ac.epsilon * u;
  doc["pool_delta"] = pool_delta;
  doc["pool_eta"] = pool_et;
  doc["units"] = opt.bits ? "bits" : "nats";
  doc["pass"] = pass;
  doc["agents"] = rows;
  io::atomic_write(opt.out / "audit.json", io::dump(doc) + "\n");
  if (opt.format != "json") io::atomic_write(opt.out / "audit.csv", detail::to_csv(rows));
  log << "audit: k=" << ac.k << ", " << audits.size() << " agents, " << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? exit_ok : exit_check;
}

// ---- equilibria -------------------------------------------------------------

inline int cmd_equilibria(const options& opt, std::ostream& log) {
  const json cfg = detail::load_config(opt);
  const double u = detail::unit(opt);
  bool pass = true;

  const json un = cfg.value("uninformative", json::object());
  const belief q_bar{un.value("q_bar", 0.7)};
  const belief q0{un.value("q0", 0.5)};
  const std::size_t scored = un.value("scored", std::size_t{5});
  const auto pay = uninformative_payoffs(q_bar, scored, q0);
  json un_rows = json::array();
  for (std::size_t t = 0; t < pay.size(); ++t) {
    const double expected = t == 0 ? kl(q_bar, q0) : 0.0;
    const bool ok = t == 0 ? std::abs(pay[t] - expected) <= 1e-12 : pay[t] == 0.0;
    pass = pass && ok;
    un_rows.push_back(json{{"agent", t + 1}, {"payoff", io::number(pay[t] * u)}, {"expected", expected * u}, {"ok", ok}});
  }
  detail::write_table(opt, "uninformative", un_rows);

  const json sw = cfg.value("switching", json::object());
  const std::size_t distance = sw.value("distance", std::size_t{2});
  const floor_policy floor = sw.contains("floor") ? io::floor_from_json(sw["floor"]) : floor_policy::none();
  const auto spay = switching_payoffs(sw.value("scored", std::size_t{5}), distance, belief{sw.value("q0", 1.0)}, floor);
  json sw_rows = json::array();
  for (std::size_t t = 0; t < spay.size(); ++t) {
    sw_rows.push_back(json{{"agent", t + 1}, {"payoff", io::number(spay[t] * u)}});
  }
  // with no floor and a point-mass start, even distances pay +inf
  if (!floor.clamps() && distance % 2 == 0 && (sw.value("q0", 1.0) == 0.0 || sw.value("q0", 1.0) == 1.0)) {
    for (double p : spay) pass = pass && p == inf;
  }
  detail::write_table(opt, "switching", sw_rows);

  json perm_rows = json::array();
  if (cfg.contains("permutation")) {
    const json& pj = cfg["permutation"];
    const scenario sc = detail::load_scenario(pj.at("scenario"), opt);
    const market_config base = io::market_from_json(pj.value("market", json::object()));
    for (std::uint64_t seed : detail::seed_list(opt, pj, base.seed)) {
      market_config c = base;
      c.seed = seed;
      const market_transcript tr = run_market(c, sc);
      const permutation_result res = permutation_invariance(tr, c);
      const bool ok = res.max_payout_difference <= 1e-12 && res.involution;
      pass = pass && ok;
      perm_rows.push_back(json{{"seed", seed},
                               {"agents", tr.terminal_step},
                               {"max_payout_difference", io::number(res.max_payout_difference * u)},
                               {"involution", res.involution},
                               {"ok", ok}});
    }
    detail::write_table(opt, "permutation", perm_rows);
  }
  log << "equilibria: " << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? exit_ok : exit_check;
}

// ---- amm-check --------------------------------------------------------------

inline int cmd_amm_check(const options& opt, std::ostream& log) {
  const json cfg = detail::load_config(opt);
  const std::size_t samples = cfg.value("samples", std::size_t{10000});
  const double spread = cfg.value("quantity_range", 20.0);
  const double tol = cfg.value("tolerance", 1e-9);
  rng gen(opt.seed.value_or(cfg.value("seed", std::uint64_t{1})));

  // random books, liquidities and references; each sample is a two-state path
  double score_res = 0.0, msr_res = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double b = std::exp(std::log(0.1) + gen.uniform() * std::log(1000.0));
    const amm_state s0{spread * (2 * gen.uniform() - 1), spread * (2 * gen.uniform() - 1), b};
    const amm_state s1{spread * (2 * gen.uniform() - 1), spread * (2 * gen.uniform() - 1), b};
    const belief r{gen.uniform()};
    const auto res = equivalence_check({s0, s1}, r);
    // the identities hold in score units times b
    score_res = std::max(score_res, res.score / std::max(1.0, b));
    msr_res = std::max(msr_res, res.market_score / std::max(1.0, b));
  }

  json replay_rows = json::array();
  double replay_res = 0.0;
  if (cfg.contains("replay")) {
    const json& rj = cfg["replay"];
    const scenario sc = detail::load_scenario(rj.at("scenario"), opt);
    const market_config base = io::market_from_json(rj.value("market", json::object()));
    const auto bs = rj.value("b", std::vector<double>{0.5, 1.0, 10.0});
    std::string trades;
    for (std::uint64_t seed : detail::seed_list(opt, rj, base.seed)) {
      market_config c = base;
      c.seed = seed;
      const market_transcript tr = run_market(c, sc);
      for (double b : bs) {
        const replay_result rr = replay_transcript(tr, b);
        replay_res = std::max(replay_res, rr.max_residual / b);
        replay_rows.push_back(json{{"seed", seed}, {"b", b}, {"agents", tr.terminal_step},
                                   {"max_residual_over_b", rr.max_residual / b}});
      }
      // trade log at b = 1: pre-state, target, cash
      amm_state s{std::log(tr.initial.p0()), std::log(tr.initial.p1()), 1.0};
      for (std::size_t t = 1; t <= tr.terminal_step; ++t) {
        const trade x = trade_to_belief(s, tr.report(t));
        trades += io::dump(json{{"seed", seed},
                                {"agent", t},
                                {"c0", s.c0},
                                {"c1", s.c1},
                                {"b", s.b},
                                {"target", tr.report(t).p1()},
                                {"cash", x.cash}},
                           0) +
                  "\n";
        s = x.after;
      }
    }
    io::atomic_write(opt.out / "trades.jsonl", trades);
    detail::write_table(opt, "amm_replay", replay_rows);
  }
  const double worst = std::max({score_res, msr_res, replay_res});
  json summary = json::array();
  summary.push_back(json{{"samples", samples},
                         {"score_residual", score_res},
                         {"market_score_residual", msr_res},
                         {"replay_residual", replay_res},
                         {"max_residual", worst}});
  detail::write_table(opt, "amm_check", summary);
  log << "amm-check: max residual " << io::fmt17(worst) << "\n";
  return worst < tol ? exit_ok : exit_check;
}

/// Dispatch by subcommand name. Library errors become exit code 1.
inline int run(const std::string& command, const options& opt, std::ostream& log, std::ostream& err) {
  try {
    if (opt.format != "csv" && opt.format != "json" && opt.format != "svg") {
      throw config_error("format must be csv, json or svg");
    }
    if (command == "bounds") return cmd_bounds(opt, log);
    if (command == "curves") return cmd_curves(opt, log);
    if (command == "simulate") return cmd_simulate(opt, log);
    if (command == "audit") return cmd_audit(opt, log);
    if (command == "equilibria") return cmd_equilibria(opt, log);
    if (command == "amm-check") return cmd_amm_check(opt, log);
    throw config_error("unknown command '" + command + "'");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_error;
  }
}

} // namespace selfres::cli
