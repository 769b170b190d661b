#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "selfres/belief.hpp"
#include "selfres/errors.hpp"
#include "selfres/floor.hpp"

namespace selfres {

/// Conditional probability table P(X = x_i | Y = w) of one agent's signal.
/// Rows are signals, columns are the outcomes 0 and 1.
class signal_model {
public:
  using row = std::array<double, 2>;

  signal_model() = default;

  /// Throws domain_error unless every entry is in (0, 1] and each column sums
  /// to one within 1e-12.
  explicit signal_model(std::vector<row> rows) : rows_(std::move(rows)) { validate(); }

  signal_model(std::initializer_list<row> rows) : rows_(rows) { validate(); }

  /// Builds a model from the two columns P(X|Y=0) and P(X|Y=1).
  static signal_model from_columns(std::span<const double> given_y0, std::span<const double> given_y1) {
    if (given_y0.size() != given_y1.size()) {
      throw domain_error("signal_model: columns differ in length");
    }
    std::vector<row> rows(given_y0.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = {given_y0[i], given_y1[i]};
    return signal_model{std::move(rows)};
  }

  /// Binary model with P(X = Y) = accuracy.
  static signal_model symmetric(double accuracy) {
    return signal_model{{accuracy, 1.0 - accuracy}, {1.0 - accuracy, accuracy}};
  }

  std::size_t size() const noexcept { return rows_.size(); }

  /// P(X = signal | Y = y).
  double likelihood(std::size_t signal, outcome y) const { return rows_.at(signal)[y]; }

  double likelihood_ratio(std::size_t signal) const { return rows_.at(signal)[1] / rows_.at(signal)[0]; }

  const std::vector<row>& rows() const noexcept { return rows_; }

  /// Distinct signals induce distinct posteriors.
  bool stochastically_relevant() const {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      for (std::size_t j = i + 1; j < rows_.size(); ++j) {
        if (rows_[i][1] * rows_[j][0] == rows_[j][1] * rows_[i][0]) return false;
      }
    }
    return true;
  }

  /// The same model with the outcome labels swapped.
  signal_model permuted() const {
    std::vector<row> swapped(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) swapped[i] = {rows_[i][1], rows_[i][0]};
    return signal_model{std::move(swapped)};
  }

  friend bool operator==(const signal_model&, const signal_model&) = default;

private:
  void validate() const {
    if (rows_.empty()) throw domain_error("signal_model: no signals");
    std::array<double, 2> sums{0.0, 0.0};
    for (const row& r : rows_) {
      for (outcome y : {outcome{0}, outcome{1}}) {
        if (!(r[y] > 0.0 && r[y] <= 1.0)) {
          throw domain_error("signal_model: entry " + std::to_string(r[y]) + " outside (0, 1]");
        }
        sums[y] += r[y];
      }
    }
    for (double s : sums) {
      if (std::abs(s - 1.0) > 1e-12) {
        throw domain_error("signal_model: column sums to " + std::to_string(s));
      }
    }
  }

  std::vector<row> rows_;
};

/// Bhattacharyya coefficient sum_i sqrt(P(x_i|Y=0) P(x_i|Y=1)), i.e. 1 - delta.
inline double bhattacharyya(const signal_model& model) {
  double bc = 0.0;
  for (const auto& r : model.rows()) bc += std::sqrt(r[0] * r[1]);
  return std::min(bc, 1.0);
}

/// -ln of the Bhattacharyya coefficient.
inline double bhattacharyya_distance(const signal_model& model) { return -std::log(bhattacharyya(model)); }

/// The gap delta = 1 - coefficient.
inline double delta_gap(const signal_model& model) { return 1.0 - bhattacharyya(model); }

/// Smallest conditional probability in the table.
inline double eta(const signal_model& model) {
  double m = 1.0;
  for (const auto& r : model.rows()) m = std::min({m, r[0], r[1]});
  return m;
}

/// Pool eta: the minimum entry over every model.
inline double pool_eta(std::span<const signal_model> models) {
  if (models.empty()) throw domain_error("pool_eta: no models");
  double m = 1.0;
  for (const auto& model : models) m = std::min(m, eta(model));
  return m;
}

/// Pool delta: 1 - delta is the largest coefficient over every model.
inline double pool_delta_gap(std::span<const signal_model> models) {
  if (models.empty()) throw domain_error("pool_delta_gap: no models");
  double worst = 0.0;
  for (const auto& model : models) worst = std::max(worst, bhattacharyya(model));
  return 1.0 - worst;
}

/// Bayes rule for one signal. A degenerate prior is returned unchanged.
inline belief posterior(belief prior, const signal_model& model, std::size_t signal) {
  if (signal >= model.size()) {
    throw domain_error("posterior: signal " + std::to_string(signal) + " out of range");
  }
  return belief::from_weights(prior.p1() * model.likelihood(signal, 1), prior.p0() * model.likelihood(signal, 0));
}

/// Posterior after observing conditionally independent signals, one per model.
inline belief aggregate_posterior(belief prior, std::span<const signal_model> models,
                                  std::span<const std::size_t> signals) {
  if (models.size() != signals.size()) {
    throw domain_error("aggregate_posterior: " + std::to_string(models.size()) + " models but " +
                       std::to_string(signals.size()) + " signals");
  }
  double a = prior.p1();
  double b = prior.p0();
  for (std::size_t j = 0; j < models.size(); ++j) {
    if (signals[j] >= models[j].size()) {
      throw domain_error("aggregate_posterior: signal " + std::to_string(signals[j]) + " out of range");
    }
    a *= models[j].likelihood(signals[j], 1);
    b *= models[j].likelihood(signals[j], 0);
    // rescale long products; the ratio is unchanged
    if (a + b < 1e-200) {
      a *= 1e200;
      b *= 1e200;
    }
  }
  return belief::from_weights(a, b);
}

/// Default absolute tolerance on p1 when matching a report to a signal.
inline constexpr double default_invert_tolerance = 1e-9;

/// Recovers the signal behind a report: the unique signal whose posterior under
/// `context` (after `floor`) lies within `tol` of the report. Returns nullopt
/// when no signal, or more than one, matches.
inline std::optional<std::size_t> invert_report(const signal_model& model, belief context, belief report,
                                                double tol = default_invert_tolerance,
                                                floor_policy floor = floor_policy::none()) {
  std::optional<std::size_t> match;
  for (std::size_t s = 0; s < model.size(); ++s) {
    const belief candidate = floor.apply(posterior(context, model, s));
    if (std::abs(candidate.p1() - report.p1()) <= tol) {
      if (match) return std::nullopt;
      match = s;
    }
  }
  return match;
}

/// Signal whose posterior under `context` is nearest to the report.
inline std::size_t nearest_signal(const signal_model& model, belief context, belief report) {
  std::size_t best = 0;
  double best_gap = 2.0;
  for (std::size_t s = 0; s < model.size(); ++s) {
    const double gap = std::abs(posterior(context, model, s).p1() - report.p1());
    if (gap < best_gap) {
      best_gap = gap;
      best = s;
    }
  }
  return best;
}

/// Number of joint signal profiles for a list of models, saturating at `cap + 1`.
inline std::uint64_t profile_count(std::span<const signal_model> models, std::uint64_t cap) {
  std::uint64_t n = 1;
  for (const auto& m : models) {
    n *= m.size();
    if (n > cap) return cap + 1;
  }
  return n;
}

/// Visits every joint signal profile of `models` in lexicographic order (last
/// model varies fastest), passing the profile and its likelihoods under Y=1 and
/// Y=0. An empty model list yields the single empty profile.
template <class Visitor>
void for_each_profile(std::span<const signal_model> models, Visitor&& visit) {
  const std::size_t k = models.size();
  std::vector<std::size_t> profile(k, 0);
  // prefix products so each step only recomputes the changed suffix
  std::vector<double> l1(k + 1, 1.0), l0(k + 1, 1.0);
  for (std::size_t j = 0; j < k; ++j) {
    l1[j + 1] = l1[j] * models[j].likelihood(0, 1);
    l0[j + 1] = l0[j] * models[j].likelihood(0, 0);
  }
  while (true) {
    visit(std::as_const(profile), l1[k], l0[k]);
    std::size_t j = k;
    while (j > 0) {
      --j;
      if (++profile[j] < models[j].size()) break;
      profile[j] = 0;
      if (j == 0) return;
    }
    if (k == 0) return;
    for (std::size_t i = j; i < k; ++i) {
      l1[i + 1] = l1[i] * models[i].likelihood(profile[i], 1);
      l0[i + 1] = l0[i] * models[i].likelihood(profile[i], 0);
    }
  }
}

/// Common prior over Y, a roster of signal models (agent j uses model
/// j mod roster size) and optional realized values.
struct scenario {
  belief prior{0.5};
  std::vector<signal_model> models;
  std::optional<outcome> realized_outcome;
  std::optional<std::vector<std::size_t>> realized_signals;

  const signal_model& model_for(std::size_t agent_index) const {
    if (models.empty()) throw domain_error("scenario: empty roster");
    return models[agent_index % models.size()];
  }

  /// Throws domain_error when the roster is empty or a realized value is invalid.
  void validate() const {
    if (models.empty()) throw domain_error("scenario: empty roster");
    if (realized_outcome && *realized_outcome > 1) throw domain_error("scenario: outcome must be 0 or 1");
    if (realized_signals) {
      for (std::size_t j = 0; j < realized_signals->size(); ++j) {
        if ((*realized_signals)[j] >= model_for(j).size()) {
          throw domain_error("scenario: realized signal " + std::to_string((*realized_signals)[j]) +
                             " of agent " + std::to_string(j + 1) + " out of range");
        }
      }
    }
  }

  /// The scenario with Y relabeled: prior, every model and the outcome swapped.
  scenario permuted() const {
    scenario s;
    s.prior = prior.permuted();
    for (const auto& m : models) s.models.push_back(m.permuted());
    if (realized_outcome) s.realized_outcome = 1 - *realized_outcome;
    s.realized_signals = realized_signals;
    return s;
  }
};

} // namespace selfres
