#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "cimr/map_sim.hpp"

namespace cimr {

enum class Relation : std::uint8_t { left_of, right_of, above, below };

inline constexpr std::array<std::string_view, 4> kRelationNames{"left_of", "right_of", "above",
                                                               "below"};

constexpr std::string_view to_string(Relation r) { return kRelationNames[static_cast<int>(r)]; }

/// Cell the subject must occupy to stand in `rel` to an object at `reference`.
/// "Exactly left of" means same row, adjacent column; the others are analogous.
constexpr GridPos required_cell(Relation rel, GridPos reference) {
  switch (rel) {
    case Relation::left_of: return {reference.row, reference.col - 1};
    case Relation::right_of: return {reference.row, reference.col + 1};
    case Relation::above: return {reference.row - 1, reference.col};
    case Relation::below: return {reference.row + 1, reference.col};
  }
  return reference;
}

/// Conjunction of optional attribute constraints.
struct AttributeFilter {
  std::optional<Color> color;
  std::optional<Shape> shape;
  std::optional<Material> material;

  int constraint_count() const {
    return int(color.has_value()) + int(shape.has_value()) + int(material.has_value());
  }
  bool matches(const Attributes& a) const {
    return (!color || *color == a.color) && (!shape || *shape == a.shape) &&
           (!material || *material == a.material);
  }
  friend bool operator==(const AttributeFilter&, const AttributeFilter&) = default;
};

struct PlaceGoal {
  int subject_id = 0;
  Relation relation = Relation::left_of;
  int reference_id = 0;
  friend bool operator==(const PlaceGoal&, const PlaceGoal&) = default;
};

struct IdentifyAllGoal {
  AttributeFilter filter;
  friend bool operator==(const IdentifyAllGoal&, const IdentifyAllGoal&) = default;
};

/// Count objects satisfying a single-attribute predicate.
struct CountGoal {
  AttributeFilter filter;
  friend bool operator==(const CountGoal&, const CountGoal&) = default;
};

using Goal = std::variant<PlaceGoal, IdentifyAllGoal, CountGoal>;

enum class GoalKind : std::uint8_t { place, identify_all, count };

inline constexpr std::array<std::string_view, 3> kGoalKindNames{"Place", "IdentifyAll", "Count"};

constexpr std::string_view to_string(GoalKind k) { return kGoalKindNames[static_cast<int>(k)]; }

inline std::optional<GoalKind> goal_kind_from_name(std::string_view s) {
  return enum_from_name<GoalKind>(kGoalKindNames, s);
}

inline GoalKind kind_of(const Goal& g) { return static_cast<GoalKind>(g.index()); }

/// Throws DomainError(InvalidScene) if the goal is ill-formed for the scene.
inline void validate(const Goal& goal, const Scene& scene) {
  std::visit(
      [&](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, PlaceGoal>) {
          if (g.subject_id == g.reference_id) {
            throw DomainError(DomainErrc::InvalidScene, "place goal subject equals reference");
          }
          if (!scene.find(g.subject_id) || !scene.find(g.reference_id)) {
            throw DomainError(DomainErrc::InvalidScene, "place goal names a missing object");
          }
        } else if constexpr (std::is_same_v<G, IdentifyAllGoal>) {
          if (g.filter.constraint_count() < 1) {
            throw DomainError(DomainErrc::InvalidScene, "identify goal without constraints");
          }
        } else {
          if (g.filter.constraint_count() != 1) {
            throw DomainError(DomainErrc::InvalidScene, "count goal needs exactly one attribute");
          }
        }
      },
      goal);
}

}  // namespace cimr
