#pragma once

// JSON forms shared by the scenario corpus, the remote backend protocol, the
// trace files and the correction-triplet export.

#include <nlohmann/json.hpp>

#include <string>

#include "cimr/feedback.hpp"
#include "cimr/goal.hpp"
#include "cimr/map_sim.hpp"
#include "cimr/response.hpp"
#include "cimr/scenario.hpp"

namespace cimr {

using json = nlohmann::json;

namespace detail {

template <typename Enum, std::size_t N>
Enum enum_field(const json& j, const char* key, const std::array<std::string_view, N>& names) {
  const std::string s = j.at(key).get<std::string>();
  const auto v = enum_from_name<Enum>(names, s);
  if (!v) throw json::other_error::create(501, std::string("bad ") + key + " '" + s + "'", &j);
  return *v;
}

inline GridPos pos_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw json::other_error::create(501, "position must be [row, col]", &j);
  }
  return {j.at(0).get<int>(), j.at(1).get<int>()};
}

}  // namespace detail

inline json pos_to_json(GridPos p) { return json::array({p.row, p.col}); }

// --- world ------------------------------------------------------------------

inline void to_json(json& j, const ObjectSpec& o) {
  j = json{{"id", o.id},
           {"color", to_string(o.color)},
           {"shape", to_string(o.shape)},
           {"material", to_string(o.material)},
           {"pos", pos_to_json(o.pos)},
           {"depth", to_string(o.depth)}};
}

inline void from_json(const json& j, ObjectSpec& o) {
  o.id = j.at("id").get<int>();
  o.color = detail::enum_field<Color>(j, "color", kColorNames);
  o.shape = detail::enum_field<Shape>(j, "shape", kShapeNames);
  o.material = detail::enum_field<Material>(j, "material", kMaterialNames);
  o.pos = detail::pos_from_json(j.at("pos"));
  static constexpr std::array<std::string_view, 2> kDepthNames{"front", "back"};
  o.depth = detail::enum_field<Depth>(j, "depth", kDepthNames);
}

inline void to_json(json& j, const Scene& s) { j = json{{"objects", s.objects}}; }
inline void from_json(const json& j, Scene& s) {
  s.objects = j.at("objects").get<std::vector<ObjectSpec>>();
}

inline void to_json(json& j, const AttributeFilter& f) {
  j = json::object();
  if (f.color) j["color"] = to_string(*f.color);
  if (f.shape) j["shape"] = to_string(*f.shape);
  if (f.material) j["material"] = to_string(*f.material);
}

inline void from_json(const json& j, AttributeFilter& f) {
  f = {};
  if (j.contains("color")) f.color = detail::enum_field<Color>(j, "color", kColorNames);
  if (j.contains("shape")) f.shape = detail::enum_field<Shape>(j, "shape", kShapeNames);
  if (j.contains("material")) {
    f.material = detail::enum_field<Material>(j, "material", kMaterialNames);
  }
}

inline json goal_to_json(const Goal& goal) {
  return std::visit(
      [](const auto& g) -> json {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, PlaceGoal>) {
          return {{"variant", "Place"},
                  {"subject_id", g.subject_id},
                  {"relation", to_string(g.relation)},
                  {"reference_id", g.reference_id}};
        } else {
          json j = g.filter;
          j["variant"] = std::is_same_v<G, IdentifyAllGoal> ? "IdentifyAll" : "Count";
          return j;
        }
      },
      goal);
}

inline Goal goal_from_json(const json& j) {
  const auto kind = detail::enum_field<GoalKind>(j, "variant", kGoalKindNames);
  switch (kind) {
    case GoalKind::place:
      return PlaceGoal{j.at("subject_id").get<int>(),
                       detail::enum_field<Relation>(j, "relation", kRelationNames),
                       j.at("reference_id").get<int>()};
    case GoalKind::identify_all: return IdentifyAllGoal{j.get<AttributeFilter>()};
    case GoalKind::count: return CountGoal{j.get<AttributeFilter>()};
  }
  return PlaceGoal{};
}

inline json scenario_to_json(const Scenario& s) {
  return json{{"seed", s.seed},
              {"kind", to_string(s.kind)},
              {"scene", s.scene},
              {"instruction", s.instruction},
              {"goal", goal_to_json(s.goal)}};
}

/// Parses and validates one corpus record. C_0 is rebuilt from the instruction.
inline Scenario scenario_from_json(const json& j) {
  Scenario s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.kind = detail::enum_field<GoalKind>(j, "kind", kGoalKindNames);
  s.scene = j.at("scene").get<Scene>();
  s.instruction = j.at("instruction").get<std::string>();
  s.goal = goal_from_json(j.at("goal"));
  if (kind_of(s.goal) != s.kind) {
    throw DomainError(DomainErrc::AnswerKindMismatch, "scenario kind disagrees with its goal");
  }
  validate(s.scene);
  validate(s.goal, s.scene);
  s.initial_context = initial_context(s.instruction);
  return s;
}

/// cells as nested arrays [row][col][slot][11], slot 0 = front, 1 = back.
inline json observation_to_json(const Observation& obs) {
  json rows = json::array();
  for (const auto& row : obs.cells) {
    json cols = json::array();
    for (const auto& cell : row) {
      cols.push_back(json::array({json(cell[0]), json(cell[1])}));
    }
    rows.push_back(std::move(cols));
  }
  return rows;
}

// --- responses and feedback ---------------------------------------------------

inline std::string_view response_kind_name(GoalKind k) {
  switch (k) {
    case GoalKind::place: return "plan";
    case GoalKind::identify_all: return "ids";
    case GoalKind::count: return "count";
  }
  return "";
}

/// {"kind": "plan"|"ids"|"count", "value": ...}
inline json response_value_to_json(const Response& r) {
  json value;
  std::visit(
      [&](const auto& a) {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, ActionPlan>) {
          value = json::array();
          for (const auto& m : a.moves) {
            value.push_back({{"object_id", m.object_id}, {"to", pos_to_json(m.to)}});
          }
        } else if constexpr (std::is_same_v<A, IdSet>) {
          value = a.ids;
        } else {
          value = a.value;
        }
      },
      r.answer);
  return json{{"kind", response_kind_name(answer_kind(r))}, {"value", std::move(value)}};
}

inline json response_to_json(const Response& r) {
  json j = response_value_to_json(r);
  j["rationale"] = r.rationale;
  return j;
}

/// Inverse of response_value_to_json; `rationale` is taken from the caller.
inline Response response_from_json(const json& j, std::string rationale = {}) {
  const std::string kind = j.at("kind").get<std::string>();
  const json& value = j.at("value");
  Response r;
  r.rationale = std::move(rationale);
  if (kind == "plan") {
    ActionPlan plan;
    for (const auto& m : value) {
      plan.moves.push_back({m.at("object_id").get<int>(), detail::pos_from_json(m.at("to"))});
    }
    r.answer = std::move(plan);
  } else if (kind == "ids") {
    r.answer = IdSet{value.get<std::set<int>>()};
  } else if (kind == "count") {
    const auto v = value.get<int>();
    if (v < 0) throw json::other_error::create(501, "negative count", &j);
    r.answer = CountValue{v};
  } else {
    throw json::other_error::create(501, "unknown response kind '" + kind + "'", &j);
  }
  return r;
}

inline json feedback_to_json(const FeedbackSignal& s) {
  json out = json::array();
  for (const auto& d : s.discrepancies()) {
    out.push_back({{"category", to_string(d.category)}, {"detail", d.detail}});
  }
  return out;
}

inline FeedbackSignal feedback_from_json(const json& j) {
  FeedbackSignal s;
  for (const auto& d : j) {
    const std::string name = d.at("category").get<std::string>();
    const auto c = category_from_name(name);
    if (!c) throw json::other_error::create(501, "unknown feedback category '" + name + "'", &d);
    s.add(*c, {}, d.at("detail").get<std::string>());
  }
  return s;
}

}  // namespace cimr
