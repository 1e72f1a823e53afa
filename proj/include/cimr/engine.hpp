#pragma once

// The closed reasoning loop.
//
// Round 1 encodes instruction, observation and C_0, fuses them, asks the
// backend for R_1, executes it, observes, parses feedback S_1 and folds
// (R_1, S_1) into the context. Rounds 2..T_max refine while feedback is
// non-empty and the variant allows it.
//
// Context update consumes S_t, and parsing S_t reads the context, so each round
// parses against the provisional context (history through the previous round)
// and only then commits the update.

#include <optional>
#include <string>
#include <vector>

#include "cimr/backends.hpp"
#include "cimr/context.hpp"
#include "cimr/encoders.hpp"
#include "cimr/feedback.hpp"
#include "cimr/fusion.hpp"
#include "cimr/scenario.hpp"

namespace cimr {

enum class Variant : std::uint8_t { full, no_self_correction, no_dynamic_context };

inline constexpr std::array<std::string_view, 3> kVariantNames{"full", "no_self_correction",
                                                              "no_dynamic_context"};

constexpr std::string_view to_string(Variant v) { return kVariantNames[static_cast<int>(v)]; }

inline std::optional<Variant> variant_from_name(std::string_view s) {
  return enum_from_name<Variant>(kVariantNames, s);
}

inline constexpr int kDefaultMaxRounds = 4;

struct VariantConfig {
  Variant variant = Variant::full;
  int t_max = kDefaultMaxRounds;
};

// ---------------------------------------------------------------------------
// Context update

/// Full variant appends (round, summary, categories); the static-context
/// variant keeps C_0's history and only advances the iteration counter.
inline ContextState update_context(const ContextState& prev, const Response& response,
                                   const FeedbackSignal& feedback, Variant variant) {
  ContextState next = prev;
  ++next.iteration;
  if (variant != Variant::no_dynamic_context) {
    next.history.push_back({next.iteration, summarize(response), feedback.categories()});
  }
  return next;
}

// ---------------------------------------------------------------------------
// Feedback parsing

/// Viewpoint of the observation that judges the response produced in
/// `response_round`. Counting gets a second viewpoint once a response exists;
/// the other tasks are judged from the default view.
constexpr int feedback_viewpoint(GoalKind kind, int response_round) {
  return kind == GoalKind::count ? std::min(response_round, 1) : 0;
}

namespace detail {

inline std::string pos_text(GridPos p) {
  return "(" + std::to_string(p.row) + "," + std::to_string(p.col) + ")";
}

inline std::optional<Attributes> seen_attributes(const Observation& obs, GridPos p, Depth d) {
  return decode_symbol(obs.cells[p.row][p.col][static_cast<int>(d)], p);
}

// Names of the constraints `a` fails, e.g. "not cylindrical".
inline std::string failed_constraints(const AttributeFilter& f, const Attributes& a) {
  std::string out;
  auto add = [&](std::string_view want) {
    if (!out.empty()) out += ", ";
    out += "not ";
    out += want;
  };
  if (f.color && *f.color != a.color) add(to_string(*f.color));
  if (f.material && *f.material != a.material) add(to_string(*f.material));
  if (f.shape && *f.shape != a.shape) add(kShapeAdjectives[static_cast<int>(*f.shape)]);
  return out;
}

}  // namespace detail

/// Rule-based feedback parser. Place and Count compare the response against
/// the new observation; IdentifyAll checks each answered object's observed
/// attributes against the full instruction conjunction. `overlay` carries the
/// instance ids of the visible slots. The context is part of the contract but
/// the rule set does not consult it.
inline FeedbackSignal parse_feedback(const Response& prev, const Observation& new_obs,
                                     const IdOverlay& overlay, const ContextState& /*ctx*/,
                                     const Goal& goal) {
  if (answer_kind(prev) != kind_of(goal)) {
    throw DomainError(DomainErrc::AnswerKindMismatch, "response kind does not match the goal");
  }
  const auto visible = parse_observation(new_obs);  // validates the whole grid
  FeedbackSignal signal;
  std::visit(
      [&](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, PlaceGoal>) {
          const auto subject = overlay.locate(g.subject_id);
          const auto reference = overlay.locate(g.reference_id);
          if (!subject || !detail::seen_attributes(new_obs, subject->first, subject->second)) {
            signal.add(FeedbackCategory::SPATIAL_MISALIGNMENT, {g.subject_id}, "subject not visible");
            return;
          }
          if (!reference || !detail::seen_attributes(new_obs, reference->first, reference->second)) {
            signal.add(FeedbackCategory::SPATIAL_MISALIGNMENT, {g.reference_id},
                       "reference not visible");
            return;
          }
          const GridPos want = required_cell(g.relation, reference->first);
          const GridPos got = subject->first;
          if (got != want) {
            signal.add(FeedbackCategory::SPATIAL_MISALIGNMENT, {g.subject_id},
                       "subject at " + detail::pos_text(got) + ", required " +
                           detail::pos_text(want) + ", offset " +
                           detail::pos_text({got.row - want.row, got.col - want.col}));
          }
        } else if constexpr (std::is_same_v<G, IdentifyAllGoal>) {
          const auto& answered = std::get<IdSet>(prev.answer).ids;
          for (int id : answered) {
            const auto where = overlay.locate(id);
            const auto attrs =
                where ? detail::seen_attributes(new_obs, where->first, where->second) : std::nullopt;
            if (!attrs) {
              signal.add(FeedbackCategory::EXTRANEOUS_ITEM, {id},
                         "object " + std::to_string(id) + " not observed");
            } else if (!g.filter.matches(*attrs)) {
              signal.add(FeedbackCategory::CONSTRAINT_VIOLATION, {id},
                         "object " + std::to_string(id) + " " +
                             detail::failed_constraints(g.filter, *attrs));
            }
          }
          for (const auto& v : visible) {
            if (!g.filter.matches(v.attributes)) continue;
            const int id = overlay.ids[v.pos.row][v.pos.col][static_cast<int>(v.depth)];
            if (!answered.contains(id)) {
              signal.add(FeedbackCategory::MISSING_ITEM, {id},
                         "object " + std::to_string(id) + " meets every constraint");
            }
          }
        } else {
          int seen = 0;
          for (const auto& v : visible) seen += g.filter.matches(v.attributes);
          const int answered = std::get<CountValue>(prev.answer).value;
          if (seen != answered) {
            signal.add(FeedbackCategory::COUNT_MISMATCH, {},
                       "observed " + std::to_string(seen) + " from viewpoint " +
                           std::to_string(new_obs.viewpoint) + ", answered " +
                           std::to_string(answered));
          }
        }
      },
      goal);
  return signal;
}

/// 1 / (1 + number of discrepancies); exactly 1 iff the signal is empty.
inline double compute_confidence(const FeedbackSignal& feedback) {
  return 1.0 / (1.0 + static_cast<double>(feedback.size()));
}

// ---------------------------------------------------------------------------
// Episodes

struct RoundRecord {
  int round = 0;
  Response response;
  FeedbackSignal feedback;
  double confidence = 0.0;
};

struct EpisodeTrace {
  std::uint64_t seed = 0;
  GoalKind kind = GoalKind::place;
  Variant variant = Variant::full;
  std::vector<RoundRecord> rounds;
  TaskOutcome outcome;
  int rounds_used = 0;
  std::optional<BackendError> backend_error;  // set when the backend failed mid-episode
};

inline constexpr std::uint64_t kDefaultAttentionSeed = 43;

/// Fixed encoder and fusion parameters, shared read-only by every episode.
struct EngineResources {
  EncoderParams encoders = make_encoder_params(kDefaultEncoderSeed);
  AttentionParams attention = make_attention_params(kDefaultAttentionSeed);
};

/// Runs one episode to completion. Backend failures are caught and recorded in
/// `backend_error` with a failed outcome; the caller decides whether to abort.
inline EpisodeTrace run_episode(const Scenario& scenario, Backend& backend,
                                const VariantConfig& config, Rng& rng,
                                const EngineResources& resources) {
  if (config.t_max < 1) throw DomainError(DomainErrc::BadCalibration, "T_max must be >= 1");

  EpisodeTrace trace;
  trace.seed = scenario.seed;
  trace.kind = scenario.kind;
  trace.variant = config.variant;

  Scene live = scenario.scene;
  ContextState ctx = scenario.initial_context;
  Observation obs = render(live, 0);

  auto execute = [&](const Response& r) {
    const auto* plan = std::get_if<ActionPlan>(&r.answer);
    if (!plan || scenario.kind != GoalKind::place) return;
    for (const auto& move : plan->moves) {
      try {
        live = apply_action(live, move);
      } catch (const DomainError&) {
        // An infeasible move leaves the world unchanged; feedback will show it.
      }
    }
  };

  // Act, observe, parse against the provisional context, then commit C_t.
  auto close_round = [&](int round, const Response& r) -> const FeedbackSignal& {
    execute(r);
    const int viewpoint = feedback_viewpoint(scenario.kind, round);
    obs = render(live, viewpoint);
    FeedbackSignal feedback = parse_feedback(r, obs, id_overlay(live, viewpoint), ctx, scenario.goal);
    ctx = update_context(ctx, r, feedback, config.variant);
    const double confidence = compute_confidence(feedback);
    trace.rounds.push_back({round, r, std::move(feedback), confidence});
    return trace.rounds.back().feedback;
  };

  try {
    const FeatureSeq f_t = encode_text(scenario.instruction, resources.encoders);
    const FeatureSeq f_v = encode_visual(obs, resources.encoders);
    const FeatureSeq f_c = encode_context(ctx, resources.encoders);
    const FusedFeatures fused = fuse(f_t, f_v, f_c, resources.attention);

    ScenarioView view{scenario.kind, scenario.instruction, obs, canonical_text(ctx)};
    Response response = backend.generate_initial(view, fused, rng);
    bool clean = close_round(1, response).empty();

    const bool may_refine = config.variant != Variant::no_self_correction;
    for (int round = 2; may_refine && !clean && round <= config.t_max; ++round) {
      const FeatureSeq f_ct = encode_context(ctx, resources.encoders);
      view.observation = obs;
      view.context_text = canonical_text(ctx);
      response = backend.refine_response(view, response, trace.rounds.back().feedback, f_ct,
                                         round, rng);
      clean = close_round(round, response).empty();
    }
    trace.rounds_used = static_cast<int>(trace.rounds.size());
    trace.outcome = evaluate_goal(scenario.goal, live, response);
  } catch (const BackendError& e) {
    trace.backend_error = e;
    trace.rounds_used = static_cast<int>(trace.rounds.size());
    trace.outcome = TaskOutcome{};
    trace.outcome.fail("backend", e.what());
  }
  return trace;
}

}  // namespace cimr
