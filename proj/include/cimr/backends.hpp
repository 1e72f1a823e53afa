#pragma once

// Reasoning backend contract. A backend produces the preliminary response from
// the instruction, the current observation and the fused features, and refines
// a previous response given structured feedback and the context features.
//
// The scripted oracle stands in for a fine-tuned vision-language model. It is
// the only backend that sees ground truth: its factory binds the scenario when
// an episode starts. The remote client only ever receives a ScenarioView.

#include <algorithm>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cimr/encoders.hpp"
#include "cimr/errors.hpp"
#include "cimr/feedback.hpp"
#include "cimr/fusion.hpp"
#include "cimr/response.hpp"
#include "cimr/rng.hpp"
#include "cimr/scenario.hpp"

namespace cimr {

/// What crosses the backend boundary about the task.
struct ScenarioView {
  GoalKind kind = GoalKind::place;
  std::string instruction;
  Observation observation;
  std::string context_text;
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual Response generate_initial(const ScenarioView& view, const FusedFeatures& fused,
                                    Rng& rng) = 0;

  /// `round` >= 2 is the round the refined response belongs to.
  virtual Response refine_response(const ScenarioView& view, const Response& prev,
                                   const FeedbackSignal& feedback, const FeatureSeq& f_ct,
                                   int round, Rng& rng) = 0;
};

/// Opens a per-episode backend session.
class BackendFactory {
 public:
  virtual ~BackendFactory() = default;
  virtual std::unique_ptr<Backend> open(const Scenario& scenario) const = 0;
};

// ---------------------------------------------------------------------------
// Scripted oracle

struct OracleConfig {
  double p_initial_error = 0.0;
  /// Conditional correction probability for rounds 2, 3, ...; rounds past the
  /// end of the list never correct.
  std::vector<double> correction_rates;
  double context_factor = 1.0;
  /// Place error template: planned destination offset from the correct cell.
  GridPos place_error_offset{-1, 0};

  double correction_rate(int round) const {
    const int i = round - 2;
    if (i < 0 || i >= static_cast<int>(correction_rates.size())) return 0.0;
    return correction_rates[static_cast<std::size_t>(i)];
  }
};

inline void validate(const OracleConfig& c) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  bool ok = prob(c.p_initial_error) && prob(c.context_factor);
  for (double r : c.correction_rates) ok = ok && prob(r);
  if (!ok) throw DomainError(DomainErrc::BadCalibration, "oracle probabilities must lie in [0, 1]");
}

/// Fits the oracle to a cumulative accuracy curve (percent after rounds 1..K):
/// p_initial_error = 1 - a_1/100 and r_k = (a_k - a_{k-1}) / (100 - a_{k-1}),
/// the share of still-failing episodes that round k fixes.
inline OracleConfig calibrate_oracle(std::span<const double> targets) {
  if (targets.empty()) throw DomainError(DomainErrc::BadCalibration, "no targets");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!(targets[i] > 0.0 && targets[i] < 100.0)) {
      throw DomainError(DomainErrc::BadCalibration, "targets must lie in (0, 100)");
    }
    if (i > 0 && !(targets[i] > targets[i - 1])) {
      throw DomainError(DomainErrc::BadCalibration, "targets must be strictly increasing");
    }
  }
  OracleConfig c;
  c.p_initial_error = 1.0 - targets[0] / 100.0;
  for (std::size_t k = 1; k < targets.size(); ++k) {
    c.correction_rates.push_back((targets[k] - targets[k - 1]) / (100.0 - targets[k - 1]));
  }
  return c;
}

/// Expected cumulative accuracy (fraction) after `rounds` rounds when every
/// injected error is detected: 1 - p * prod_k (1 - factor * r_k).
inline double expected_accuracy(const OracleConfig& c, int rounds, double factor) {
  double still_failing = c.p_initial_error;
  for (int round = 2; round <= rounds; ++round) {
    still_failing *= 1.0 - factor * c.correction_rate(round);
  }
  return 1.0 - still_failing;
}

/// Context factor that brings the final accuracy after `rounds` rounds to
/// `target_pct`, by bisection on [0, 1].
inline double solve_context_factor(const OracleConfig& c, int rounds, double target_pct) {
  const double target = target_pct / 100.0;
  double lo = 0.0, hi = 1.0;
  if (target <= expected_accuracy(c, rounds, lo)) return lo;
  if (target >= expected_accuracy(c, rounds, hi)) return hi;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (expected_accuracy(c, rounds, mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// The feedback category a response's error would surface as, or nullopt if
/// the response is correct.
inline std::optional<FeedbackCategory> live_error(const Scenario& s, const Response& r) {
  if (answer_kind(r) != s.kind) return FeedbackCategory::CONSTRAINT_VIOLATION;
  TaskOutcome outcome;
  try {
    outcome = execute_and_evaluate(s.goal, s.scene, r);
  } catch (const DomainError&) {
    return s.kind == GoalKind::place ? std::optional(FeedbackCategory::SPATIAL_MISALIGNMENT)
                                     : std::optional(FeedbackCategory::CONSTRAINT_VIOLATION);
  }
  if (outcome.success) return std::nullopt;
  switch (s.kind) {
    case GoalKind::place: return FeedbackCategory::SPATIAL_MISALIGNMENT;
    case GoalKind::count: return FeedbackCategory::COUNT_MISMATCH;
    case GoalKind::identify_all: break;
  }
  auto has = [&](std::string_view p) {
    return std::any_of(outcome.violations.begin(), outcome.violations.end(),
                       [&](const Violation& v) { return v.predicate == p; });
  };
  if (has("constraint")) return FeedbackCategory::CONSTRAINT_VIOLATION;
  if (has("missing")) return FeedbackCategory::MISSING_ITEM;
  return FeedbackCategory::EXTRANEOUS_ITEM;
}

/// Error templates applied to the correct answer:
///   Place       - destination shifted by place_error_offset
///   IdentifyAll - one constraint of the conjunction ignored
///   Count       - only objects visible from the default viewpoint counted
inline Response inject_error(const Scenario& s, const OracleConfig& c, Rng& rng) {
  return std::visit(
      [&](const auto& g) -> Response {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, PlaceGoal>) {
          auto r = solve(s.goal, s.scene);
          auto& move = std::get<ActionPlan>(r.answer).moves.front();
          move.to.row += c.place_error_offset.row;
          move.to.col += c.place_error_offset.col;
          r.rationale = "place subject next to the reference";
          return r;
        } else if constexpr (std::is_same_v<G, IdentifyAllGoal>) {
          const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.filter.constraint_count())));
          return {IdSet{matching_ids(detail::drop_constraint(g.filter, k), s.scene)},
                  "objects meeting the salient constraint"};
        } else {
          int visible = 0;
          for (const auto& o : s.scene.objects) {
            visible += o.depth == Depth::front && g.filter.matches(o.attributes());
          }
          return {CountValue{visible}, "objects counted in the current view"};
        }
      },
      s.goal);
}

/// Calibrated stochastic stand-in for the base model. FusedFeatures are
/// accepted for contract fidelity and ignored.
class ScriptedOracle final : public Backend {
 public:
  ScriptedOracle(OracleConfig config, Scenario scenario)
      : config_(std::move(config)), scenario_(std::move(scenario)) {
    validate(config_);
  }

  Response generate_initial(const ScenarioView&, const FusedFeatures&, Rng& rng) override {
    if (rng.uniform() < config_.p_initial_error) return inject_error(scenario_, config_, rng);
    return solve(scenario_.goal, scenario_.scene);
  }

  Response refine_response(const ScenarioView&, const Response& prev,
                           const FeedbackSignal& feedback, const FeatureSeq&, int round,
                           Rng& rng) override {
    if (feedback.empty()) return prev;
    const auto error = live_error(scenario_, prev);
    if (!error || !feedback.has(*error)) return prev;
    const double p = config_.correction_rate(round) * config_.context_factor;
    if (!(rng.uniform() < p)) return prev;
    Response fixed = solve(scenario_.goal, scenario_.scene);
    fixed.rationale = "corrected after " + std::string(to_string(*error));
    return fixed;
  }

  const OracleConfig& config() const { return config_; }

 private:
  OracleConfig config_;
  Scenario scenario_;
};

class ScriptedOracleFactory final : public BackendFactory {
 public:
  explicit ScriptedOracleFactory(OracleConfig config) : config_(std::move(config)) {
    validate(config_);
  }

  std::unique_ptr<Backend> open(const Scenario& scenario) const override {
    return std::make_unique<ScriptedOracle>(config_, scenario);
  }

  const OracleConfig& config() const { return config_; }

 private:
  OracleConfig config_;
};

}  // namespace cimr
