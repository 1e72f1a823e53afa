#pragma once

#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cimr/goal.hpp"
#include "cimr/map_sim.hpp"

namespace cimr {

struct ActionPlan {
  std::vector<MoveAction> moves;
  friend bool operator==(const ActionPlan&, const ActionPlan&) = default;
};

struct IdSet {
  std::set<int> ids;
  friend bool operator==(const IdSet&, const IdSet&) = default;
};

struct CountValue {
  int value = 0;
  friend bool operator==(const CountValue&, const CountValue&) = default;
};

/// A backend's answer: a move plan, an id set or a count, plus free-text rationale.
struct Response {
  std::variant<ActionPlan, IdSet, CountValue> answer;
  std::string rationale;
  friend bool operator==(const Response&, const Response&) = default;
};

// ActionPlan answers Place, IdSet answers IdentifyAll, CountValue answers Count;
// the variant indices line up with GoalKind.
inline GoalKind answer_kind(const Response& r) { return static_cast<GoalKind>(r.answer.index()); }

/// One-line, whitespace-tokenizable summary used in the context history.
inline std::string summarize(const Response& r) {
  std::string out;
  std::visit(
      [&](const auto& a) {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, ActionPlan>) {
          out = "plan";
          if (a.moves.empty()) out += " none";
          for (const auto& m : a.moves) {
            out += " move " + std::to_string(m.object_id) + " to " + std::to_string(m.to.row) +
                   " " + std::to_string(m.to.col);
          }
        } else if constexpr (std::is_same_v<A, IdSet>) {
          out = "ids";
          if (a.ids.empty()) out += " none";
          for (int id : a.ids) out += " " + std::to_string(id);
        } else {
          out = "count " + std::to_string(a.value);
        }
      },
      r.answer);
  return out;
}

}  // namespace cimr
