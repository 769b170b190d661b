#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfres/bounds.hpp"
#include "selfres/equilibria.hpp"
#include "selfres/errors.hpp"
#include "selfres/market.hpp"
#include "selfres/prob_core.hpp"

namespace selfres::io {

using json = nlohmann::ordered_json;

/// 17 significant digits; infinities as "Infinity" / "-Infinity".
inline std::string fmt17(double x) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "Infinity" : "-Infinity";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// A float as JSON: a number when finite, otherwise its string spelling.
inline json number(double x) { return std::isfinite(x) ? json(x) : json(fmt17(x)); }

/// Reads a float written by number().
inline double read_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "Infinity") return inf;
    if (s == "-Infinity") return -inf;
    if (s == "NaN") return std::nan("");
  }
  throw config_error("expected a number, got " + j.dump());
}

namespace detail {

inline std::string quote(const std::string& s) { return json(s).dump(); }

inline void dump_to(std::ostringstream& out, const json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
  case json::value_t::object: {
    if (j.empty()) {
      out << "{}";
      return;
    }
    out << '{' << nl;
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out << ',' << nl;
      first = false;
      out << pad << quote(it.key()) << (indent > 0 ? ": " : ":");
      dump_to(out, it.value(), indent, depth + 1);
    }
    out << nl << close << '}';
    return;
  }
  case json::value_t::array: {
    if (j.empty()) {
      out << "[]";
      return;
    }
    // arrays of scalars stay on one line
    bool flat = true;
    for (const auto& v : j) flat = flat && !v.is_structured();
    out << '[';
    bool first = true;
    for (const auto& v : j) {
      if (!first) out << (flat ? ", " : ",");
      if (!flat) out << nl << pad;
      first = false;
      dump_to(out, v, indent, depth + 1);
    }
    if (!flat) out << nl << close;
    out << ']';
    return;
  }
  case json::value_t::number_float: out << fmt17(j.get<double>()); return;
  default: out << j.dump(); return;
  }
}

} // namespace detail

/// Serializes with floats at 17 significant digits and stable key order.
inline std::string dump(const json& j, int indent = 2) {
  std::ostringstream out;
  detail::dump_to(out, j, indent, 0);
  return out.str();
}

/// Writes through a temporary file in the same directory, then renames.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw config_error("cannot write " + tmp.string());
    f << content;
    if (!f) throw config_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw config_error("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(path.string() + ": " + e.what());
  }
}

/// Minimal CSV table; numbers at 17 significant digits.
class csv {
public:
  explicit csv(std::vector<std::string> header) : header_(std::move(header)) {}

  csv& row() {
    rows_.emplace_back();
    return *this;
  }
  csv& add(double x) { return cell(fmt17(x)); }
  csv& add(std::size_t x) { return cell(std::to_string(x)); }
  csv& add(int x) { return cell(std::to_string(x)); }
  csv& add(const std::string& s) { return cell(escape(s)); }
  csv& add(const char* s) { return add(std::string(s)); }
  csv& add(std::string_view s) { return add(std::string(s)); }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  std::size_t size() const { return rows_.size(); }

private:
  csv& cell(std::string s) {
    if (rows_.empty()) rows_.emplace_back();
    rows_.back().push_back(std::move(s));
    return *this;
  }

  static std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// ---- scenario ---------------------------------------------------------------

inline json to_json(const signal_model& m) {
  json rows = json::array();
  for (const auto& r : m.rows()) rows.push_back(json::array({r[0], r[1]}));
  return rows;
}

/// Accepts nested rows [[P(x0|0), P(x0|1)], ...] or the flat row-major list.
inline signal_model model_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw config_error("model must be a nonempty array");
  std::vector<signal_model::row> rows;
  if (j.front().is_array()) {
    for (const auto& r : j) {
      if (r.size() != 2) throw config_error("model rows need two entries");
      rows.push_back({r[0].get<double>(), r[1].get<double>()});
    }
  } else {
    if (j.size() % 2 != 0) throw config_error("flat model needs an even number of entries");
    for (std::size_t i = 0; i < j.size(); i += 2) rows.push_back({j[i].get<double>(), j[i + 1].get<double>()});
  }
  try {
    return signal_model{rows};
  } catch (const domain_error& e) {
    throw config_error(e.what());
  }
}

inline json to_json(const scenario& s) {
  json j;
  j["prior"] = s.prior.p1();
  j["models"] = json::array();
  for (const auto& m : s.models) j["models"].push_back(to_json(m));
  if (s.realized_outcome) j["realized_outcome"] = *s.realized_outcome;
  if (s.realized_signals) j["realized_signals"] = *s.realized_signals;
  return j;
}

inline scenario scenario_from_json(const json& j) {
  try {
    scenario s;
    s.prior = belief{j.at("prior").get<double>()};
    for (const auto& m : j.at("models")) s.models.push_back(model_from_json(m));
    if (j.contains("realized_outcome")) s.realized_outcome = j["realized_outcome"].get<std::size_t>();
    if (j.contains("realized_signals")) s.realized_signals = j["realized_signals"].get<std::vector<std::size_t>>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("scenario: ") + e.what());
  } catch (const domain_error& e) {
    throw config_error(std::string("scenario: ") + e.what());
  }
}

// ---- market -----------------------------------------------------------------

inline json to_json(const strategy& s) {
  json j;
  j["kind"] = std::string(to_string(s.what));
  if (s.what == strategy::kind::report_as_signal) j["signal"] = s.signal;
  if (s.what == strategy::kind::uninformative || s.what == strategy::kind::fixed) j["q"] = s.q.p1();
  return j;
}

inline strategy strategy_from_json(const json& j) {
  strategy s;
  s.what = parse_strategy_kind(j.at("kind").get<std::string>());
  if (j.contains("signal")) s.signal = j["signal"].get<std::size_t>();
  if (j.contains("q")) s.q = belief{j["q"].get<double>()};
  return s;
}

inline strategy_profile profile_from_json(const json& j) {
  strategy_profile p;
  if (j.contains("default")) p.fallback = strategy_from_json(j["default"]);
  if (j.contains("overrides")) {
    for (auto it = j["overrides"].begin(); it != j["overrides"].end(); ++it) {
      p.overrides[std::stoul(it.key())] = strategy_from_json(it.value());
    }
  }
  return p;
}

inline floor_policy floor_from_json(const json& j) {
  if (j.is_string() && j.get<std::string>() == "none") return floor_policy::none();
  if (j.is_object()) {
    const std::string mode = j.value("mode", "clamp");
    if (mode == "none") return floor_policy::none();
    if (mode == "clamp") return floor_policy::clamp(j.value("p_min", 1e-6));
  }
  throw config_error("floor must be \"none\" or {\"mode\": \"clamp\", \"p_min\": ...}");
}

inline json to_json(const floor_policy& f) {
  if (!f.clamps()) return "none";
  return json{{"mode", "clamp"}, {"p_min", f.p_min()}};
}

inline market_config market_from_json(const json& j) {
  try {
    market_config c;
    c.k = j.value("k", std::size_t{1});
    if (j.contains("T")) c.alpha = alpha_from_T(j["T"].get<double>(), c.k);
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    c.flat_fee = j.value("flat_fee", 0.0);
    if (j.contains("reference")) {
      const json& r = j["reference"];
      const std::string kind = r.is_string() ? r.get<std::string>() : r.at("kind").get<std::string>();
      if (kind == "terminal") c.reference = reference_strategy::terminal();
      else if (kind == "rolling") c.reference = reference_strategy::rolling();
      else if (kind == "batch") c.reference = reference_strategy::batch(r.at("size").get<std::size_t>());
      else if (kind == "parallel") c.reference = reference_strategy::parallel(r.value("markets", std::size_t{2}));
      else throw config_error("unknown reference strategy '" + kind + "'");
    }
    if (j.contains("floor")) c.floor = floor_from_json(j["floor"]);
    if (j.contains("initial_report")) c.initial_report = belief{j["initial_report"].get<double>()};
    c.seed = j.value("seed", std::uint64_t{0});
    c.reference_average = j.value("reference_average", std::size_t{1});
    const std::string inv = j.value("invalid_reports", "ignore");
    if (inv == "ignore") c.invalid_reports = invalid_report_rule::ignore;
    else if (inv == "nearest_signal") c.invalid_reports = invalid_report_rule::nearest_signal;
    else throw config_error("unknown invalid_reports rule '" + inv + "'");
    const std::string bel = j.value("beliefs", "truthful");
    if (bel == "truthful") c.beliefs = belief_profile::truthful;
    else if (bel == "permuted") c.beliefs = belief_profile::permuted;
    else throw config_error("unknown beliefs '" + bel + "'");
    c.invert_tolerance = j.value("invert_tolerance", default_invert_tolerance);
    c.max_agents = j.value("max_agents", std::size_t{1'000'000});
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("market: ") + e.what());
  } catch (const domain_error& e) {
    throw config_error(std::string("market: ") + e.what());
  }
}

inline json to_json(const market_config& c) {
  json j;
  j["alpha"] = c.alpha;
  j["flat_fee"] = c.flat_fee;
  j["k"] = c.k;
  json r{{"kind", std::string(to_string(c.reference.what))}};
  if (c.reference.what == reference_strategy::kind::batch) r["size"] = c.reference.size;
  if (c.reference.what == reference_strategy::kind::parallel) r["markets"] = c.reference.markets;
  j["reference"] = r;
  j["floor"] = to_json(c.floor);
  if (c.initial_report) j["initial_report"] = c.initial_report->p1();
  j["seed"] = c.seed;
  j["reference_average"] = c.reference_average;
  j["invalid_reports"] = c.invalid_reports == invalid_report_rule::ignore ? "ignore" : "nearest_signal";
  j["beliefs"] = c.beliefs == belief_profile::truthful ? "truthful" : "permuted";
  j["invert_tolerance"] = c.invert_tolerance;
  j["max_agents"] = c.max_agents;
  return j;
}

inline json to_json(const market_transcript& tr, double scale = 1.0) {
  json j;
  j["market"] = tr.market;
  j["outcome"] = tr.y;
  j["initial_report"] = tr.initial.p1();
  j["terminal_step"] = tr.terminal_step;
  j["mechanism_cost"] = number(tr.mechanism_cost * scale);
  json reports = json::array();
  for (std::size_t i = 0; i < tr.reports.size(); ++i) {
    const auto& r = tr.reports[i];
    json e;
    e["agent"] = r.agent;
    e["signal"] = r.signal;
    e["report"] = r.report.p1();
    e["public_before"] = r.public_before.p1();
    e["decoded"] = r.decoded ? json(*r.decoded) : json(nullptr);
    if (i < tr.references.size()) {
      if (tr.references[i].empty()) {
        e["reference"] = "flat_fee";
      } else {
        json refs = json::array();
        for (const auto& ref : tr.references[i]) refs.push_back(json{{"market", ref.market}, {"agent", ref.agent}});
        e["reference"] = refs;
      }
    }
    if (i < tr.payouts.size()) e["payout"] = number(tr.payouts[i] * scale);
    reports.push_back(e);
  }
  j["reports"] = reports;
  return j;
}

// ---- bounds and audits --------------------------------------------------------

inline json to_json(const bounds_result& r) {
  return json{{"eps_prime", r.eps_prime},
              {"k_min", r.k_min},
              {"branch", std::string(to_string(r.chosen))},
              {"bracket", json::array({r.bracket.lo, r.bracket.hi})},
              {"delta_star", r.delta_star},
              {"bracket_gap", r.bracket_gap},
              {"residual", r.residual},
              {"saturated", r.saturated}};
}

inline json to_json(const deviation_audit& a, double scale = 1.0) {
  json j;
  j["agent"] = a.agent;
  j["epsilon"] = a.epsilon * scale;
  j["eta_pool"] = a.eta_pool;
  j["max_gain"] = number(a.max_gain * scale);
  j["max_signal_gain"] = number(a.max_signal_gain * scale);
  j["max_bound_excess"] = number(a.max_bound_excess * scale);
  j["literal_bound_violations"] = a.literal_violations;
  j["estimated"] = a.estimated;
  j["within_epsilon"] = a.within_epsilon();
  j["within_bound"] = a.within_bound();
  j["deviations"] = a.deviations.size();
  return j;
}

} // namespace selfres::io
