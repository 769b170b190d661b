#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

#include "selfres/belief.hpp"
#include "selfres/errors.hpp"

namespace selfres {

/// How one agent maps what they know to a report.
struct strategy {
  enum class kind {
    truthful,         // own posterior
    report_as_signal, // posterior as if `signal` had been observed
    uninformative,    // constant report q
    switching,        // 1 minus the previous report
    permutation,      // own posterior with the labels swapped
    fixed             // constant report q, off the signal structure
  };

  kind what{kind::truthful};
  std::size_t signal{0};
  belief q{0.5};

  static strategy truthful() { return {}; }
  static strategy as_signal(std::size_t s) { return {kind::report_as_signal, s, belief{0.5}}; }
  static strategy uninformative(belief q) { return {kind::uninformative, 0, q}; }
  static strategy switching() { return {kind::switching, 0, belief{0.5}}; }
  static strategy permutation() { return {kind::permutation, 0, belief{0.5}}; }
  static strategy fixed(belief q) { return {kind::fixed, 0, q}; }

  friend bool operator==(const strategy&, const strategy&) = default;
};

inline std::string_view to_string(strategy::kind k) {
  switch (k) {
  case strategy::kind::truthful: return "truthful";
  case strategy::kind::report_as_signal: return "report_as_signal";
  case strategy::kind::uninformative: return "uninformative";
  case strategy::kind::switching: return "switching";
  case strategy::kind::permutation: return "permutation";
  case strategy::kind::fixed: return "fixed";
  }
  return "?";
}

inline strategy::kind parse_strategy_kind(std::string_view s) {
  for (auto k : {strategy::kind::truthful, strategy::kind::report_as_signal, strategy::kind::uninformative,
                 strategy::kind::switching, strategy::kind::permutation, strategy::kind::fixed}) {
    if (to_string(k) == s) return k;
  }
  throw config_error("unknown strategy '" + std::string(s) + "'");
}

/// One strategy for everyone, with per-agent overrides (agents are 1-based).
struct strategy_profile {
  strategy fallback{};
  std::map<std::size_t, strategy> overrides;

  const strategy& operator()(std::size_t agent) const {
    const auto it = overrides.find(agent);
    return it == overrides.end() ? fallback : it->second;
  }

  static strategy_profile all(strategy s) { return {s, {}}; }

  /// Everyone truthful except `agent`, who plays `s`.
  static strategy_profile deviation(std::size_t agent, strategy s) {
    strategy_profile p;
    p.overrides[agent] = s;
    return p;
  }
};

} // namespace selfres
