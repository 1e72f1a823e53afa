#pragma once

#include <string>
#include <vector>

#include "cimr/feedback.hpp"

namespace cimr {

struct HistoryEntry {
  int round = 0;
  std::string response_summary;
  std::vector<FeedbackCategory> feedback_categories;
  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

/// Task context C_t: the goal line plus the history of attempts and their feedback.
/// With a static context the history stays empty and only `iteration` advances.
struct ContextState {
  std::string goal_text;
  std::vector<HistoryEntry> history;
  int iteration = 0;
  friend bool operator==(const ContextState&, const ContextState&) = default;
};

inline ContextState initial_context(std::string goal_text) {
  return ContextState{std::move(goal_text), {}, 0};
}

/// Canonical text form: goal line, then one line per history entry.
inline std::string canonical_text(const ContextState& ctx) {
  std::string out = ctx.goal_text;
  for (const auto& h : ctx.history) {
    out += "\niter " + std::to_string(h.round) + ": response " + h.response_summary +
           "; feedback ";
    if (h.feedback_categories.empty()) out += "none";
    for (std::size_t i = 0; i < h.feedback_categories.size(); ++i) {
      if (i) out += ",";
      out += to_string(h.feedback_categories[i]);
    }
  }
  return out;
}

}  // namespace cimr
