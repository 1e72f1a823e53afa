#pragma once

// Scenario generation, instruction templates and goal evaluation.

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cimr/context.hpp"
#include "cimr/goal.hpp"
#include "cimr/map_sim.hpp"
#include "cimr/response.hpp"
#include "cimr/rng.hpp"

namespace cimr {

struct Scenario {
  std::uint64_t seed = 0;
  GoalKind kind = GoalKind::place;
  Scene scene;
  std::string instruction;
  Goal goal;
  ContextState initial_context;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct Violation {
  std::string predicate;
  std::string detail;
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct TaskOutcome {
  bool success = true;
  std::vector<Violation> violations;

  void fail(std::string predicate, std::string detail) {
    violations.push_back({std::move(predicate), std::move(detail)});
    success = false;
  }
  friend bool operator==(const TaskOutcome&, const TaskOutcome&) = default;
};

// ---------------------------------------------------------------------------
// Instruction templates

namespace detail {

inline std::string noun_phrase(const ObjectSpec& o) {
  return std::string(to_string(o.color)) + " " + std::string(to_string(o.shape));
}

inline std::string relation_phrase(Relation r) {
  switch (r) {
    case Relation::left_of: return "to the left of";
    case Relation::right_of: return "to the right of";
    case Relation::above: return "above";
    case Relation::below: return "below";
  }
  return "";
}

// Adjectives in color, material, shape order.
inline std::vector<std::string> filter_adjectives(const AttributeFilter& f) {
  std::vector<std::string> out;
  if (f.color) out.emplace_back(to_string(*f.color));
  if (f.material) out.emplace_back(to_string(*f.material));
  if (f.shape) out.emplace_back(kShapeAdjectives[static_cast<int>(*f.shape)]);
  return out;
}

}  // namespace detail

/// Template instruction for a goal; Place goals read the referenced objects'
/// attributes from the scene.
inline std::string instruction_for(const Goal& goal, const Scene& scene) {
  return std::visit(
      [&](const auto& g) -> std::string {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, PlaceGoal>) {
          const ObjectSpec* subject = scene.find(g.subject_id);
          const ObjectSpec* reference = scene.find(g.reference_id);
          if (!subject || !reference) {
            throw DomainError(DomainErrc::NoSuchObject, "place goal names a missing object");
          }
          return "place the " + detail::noun_phrase(*subject) + " exactly " +
                 detail::relation_phrase(g.relation) + " the " + detail::noun_phrase(*reference);
        } else if constexpr (std::is_same_v<G, IdentifyAllGoal>) {
          const auto adj = detail::filter_adjectives(g.filter);
          std::string text = "identify all objects that are ";
          if (adj.size() == 1) return text + adj[0];
          if (adj.size() == 2) return text + "both " + adj[0] + " and " + adj[1];
          return text + adj[0] + ", " + adj[1] + " and " + adj[2];
        } else {
          const auto adj = detail::filter_adjectives(g.filter);
          return "count the number of " + (adj.empty() ? std::string() : adj[0] + " ") + "objects";
        }
      },
      goal);
}

// ---------------------------------------------------------------------------
// Ground truth

/// Ids matching a filter over every object, occluded ones included.
inline std::set<int> matching_ids(const AttributeFilter& f, const Scene& scene) {
  std::set<int> out;
  for (const auto& o : scene.objects) {
    if (f.matches(o.attributes())) out.insert(o.id);
  }
  return out;
}

/// The goal-satisfying response computed from ground truth.
inline Response solve(const Goal& goal, const Scene& scene) {
  return std::visit(
      [&](const auto& g) -> Response {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, PlaceGoal>) {
          const ObjectSpec* reference = scene.find(g.reference_id);
          if (!reference) throw DomainError(DomainErrc::NoSuchObject, "reference object");
          return {ActionPlan{{MoveAction{g.subject_id, required_cell(g.relation, reference->pos)}}},
                  "move subject to the required cell"};
        } else if constexpr (std::is_same_v<G, IdentifyAllGoal>) {
          return {IdSet{matching_ids(g.filter, scene)}, "all objects meeting every constraint"};
        } else {
          return {CountValue{static_cast<int>(matching_ids(g.filter, scene).size())},
                  "count including occluded objects"};
        }
      },
      goal);
}

/// Applies every move of a plan in order.
inline Scene apply_plan(const Scene& scene, const ActionPlan& plan) {
  Scene s = scene;
  for (const auto& m : plan.moves) s = apply_action(s, m);
  return s;
}

/// Judges an answer. For Place goals `scene` is the configuration after the
/// plan was executed; the plan itself is not re-applied.
inline TaskOutcome evaluate_goal(const Goal& goal, const Scene& scene, const Response& answer) {
  if (answer_kind(answer) != kind_of(goal)) {
    throw DomainError(DomainErrc::AnswerKindMismatch,
                      std::string(to_string(kind_of(goal))) + " goal answered with a " +
                          std::string(to_string(answer_kind(answer))) + " response");
  }
  TaskOutcome out;
  std::visit(
      [&](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, PlaceGoal>) {
          const ObjectSpec* subject = scene.find(g.subject_id);
          const ObjectSpec* reference = scene.find(g.reference_id);
          if (!subject || !reference) {
            throw DomainError(DomainErrc::NoSuchObject, "place goal names a missing object");
          }
          const GridPos want = required_cell(g.relation, reference->pos);
          const std::string name(to_string(g.relation));
          if (subject->pos.row != want.row) out.fail(name, "row mismatch");
          if (subject->pos.col != want.col) out.fail(name, "col mismatch");
        } else if constexpr (std::is_same_v<G, IdentifyAllGoal>) {
          const auto& ids = std::get<IdSet>(answer.answer).ids;
          const auto truth = matching_ids(g.filter, scene);
          for (int id : ids) {
            const ObjectSpec* o = scene.find(id);
            if (!o) {
              out.fail("extraneous", "object " + std::to_string(id) + " not in scene");
            } else if (!truth.contains(id)) {
              out.fail("constraint", "object " + std::to_string(id) + " fails the conjunction");
            }
          }
          for (int id : truth) {
            if (!ids.contains(id)) out.fail("missing", "object " + std::to_string(id));
          }
        } else {
          const int expected = static_cast<int>(matching_ids(g.filter, scene).size());
          const int got = std::get<CountValue>(answer.answer).value;
          if (got != expected) {
            out.fail("count", "expected " + std::to_string(expected) + " got " + std::to_string(got));
          }
        }
      },
      goal);
  return out;
}

/// Place answers are executed on `scene` first; other kinds are judged directly.
inline TaskOutcome execute_and_evaluate(const Goal& goal, const Scene& scene,
                                        const Response& answer) {
  if (const auto* plan = std::get_if<ActionPlan>(&answer.answer);
      plan && kind_of(goal) == GoalKind::place) {
    return evaluate_goal(goal, apply_plan(scene, *plan), answer);
  }
  return evaluate_goal(goal, scene, answer);
}

// ---------------------------------------------------------------------------
// Generation

namespace detail {

class CellPicker {
 public:
  explicit CellPicker(Rng& rng) : rng_(rng) {
    for (int r = 0; r < kGridSize; ++r)
      for (int c = 0; c < kGridSize; ++c) free_.push_back({r, c});
  }

  void reserve(GridPos p) { std::erase(free_, p); }

  GridPos take() {
    const auto i = static_cast<std::size_t>(rng_.below(free_.size()));
    const GridPos p = free_[i];
    free_.erase(free_.begin() + static_cast<std::ptrdiff_t>(i));
    return p;
  }

 private:
  Rng& rng_;
  std::vector<GridPos> free_;
};

inline Attributes random_attributes(Rng& rng) {
  return {static_cast<Color>(rng.below(kNumColors)), static_cast<Shape>(rng.below(kNumShapes)),
          static_cast<Material>(rng.below(kNumMaterials))};
}

inline ObjectSpec make_object(const Attributes& a, GridPos p, Depth d = Depth::front) {
  return ObjectSpec{0, a.color, a.shape, a.material, p, d};
}

// Shuffles objects and assigns ids by final position.
inline void assign_ids(std::vector<ObjectSpec>& objects, Rng& rng) {
  rng.shuffle(objects);
  for (std::size_t i = 0; i < objects.size(); ++i) objects[i].id = static_cast<int>(i);
}

// Place: red cube subject, blue sphere reference, left_of. The required cell
// and the cell one row above it start empty, and the subject starts elsewhere.
inline std::pair<Scene, Goal> generate_place(Rng& rng) {
  CellPicker cells(rng);
  const GridPos ref_pos{rng.between(1, kGridSize - 1), rng.between(1, kGridSize - 1)};
  const GridPos target = required_cell(Relation::left_of, ref_pos);
  const GridPos above_target{target.row - 1, target.col};
  cells.reserve(ref_pos);
  cells.reserve(target);
  cells.reserve(above_target);

  std::vector<ObjectSpec> objs;
  const auto subject_material = static_cast<Material>(rng.below(kNumMaterials));
  const auto reference_material = static_cast<Material>(rng.below(kNumMaterials));
  objs.push_back(make_object({Color::red, Shape::cube, subject_material}, cells.take()));
  objs.push_back(make_object({Color::blue, Shape::sphere, reference_material}, ref_pos));
  const int distractors = rng.between(3, 8);
  for (int i = 0; i < distractors; ++i) {
    Attributes a = random_attributes(rng);
    while ((a.color == Color::red && a.shape == Shape::cube) ||
           (a.color == Color::blue && a.shape == Shape::sphere)) {
      a = random_attributes(rng);
    }
    objs.push_back(make_object(a, cells.take()));
  }
  // Tag subject/reference before shuffling ids.
  objs[0].id = -1;
  objs[1].id = -2;
  rng.shuffle(objs);
  PlaceGoal goal{0, Relation::left_of, 0};
  for (std::size_t i = 0; i < objs.size(); ++i) {
    if (objs[i].id == -1) goal.subject_id = static_cast<int>(i);
    if (objs[i].id == -2) goal.reference_id = static_cast<int>(i);
    objs[i].id = static_cast<int>(i);
  }
  return {Scene{std::move(objs)}, goal};
}

inline AttributeFilter drop_constraint(const AttributeFilter& f, int which) {
  AttributeFilter out;
  int seen = 0;
  if (f.color && seen++ != which) out.color = f.color;
  if (f.material && seen++ != which) out.material = f.material;
  if (f.shape && seen++ != which) out.shape = f.shape;
  return out;
}

inline Attributes sample_matching(Rng& rng, const AttributeFilter& keep) {
  for (;;) {
    const Attributes a = random_attributes(rng);
    if (keep.matches(a)) return a;
  }
}

// A random attribute set satisfying `keep` and violating `violate`.
inline Attributes sample_satisfying(Rng& rng, const AttributeFilter& keep,
                                    const AttributeFilter& violate) {
  for (;;) {
    const Attributes a = random_attributes(rng);
    if (keep.matches(a) && !violate.matches(a)) return a;
  }
}

// IdentifyAll: two constraints. For each constraint there is a decoy that
// meets the other one only, so dropping any constraint over-selects.
inline std::pair<Scene, Goal> generate_identify(Rng& rng) {
  CellPicker cells(rng);
  AttributeFilter f;
  const int skip = static_cast<int>(rng.below(3));  // attribute kind left unconstrained
  if (skip != 0) f.color = static_cast<Color>(rng.below(kNumColors));
  if (skip != 1) f.material = static_cast<Material>(rng.below(kNumMaterials));
  if (skip != 2) f.shape = static_cast<Shape>(rng.below(kNumShapes));

  std::vector<ObjectSpec> objs;
  const int matches = rng.between(1, 2);
  for (int i = 0; i < matches; ++i) {
    objs.push_back(make_object(sample_matching(rng, f), cells.take()));
  }
  for (int k = 0; k < f.constraint_count(); ++k) {
    const AttributeFilter relaxed = drop_constraint(f, k);
    objs.push_back(make_object(sample_satisfying(rng, relaxed, f), cells.take()));
  }
  const int distractors = rng.between(2, 6);
  for (int i = 0; i < distractors; ++i) {
    objs.push_back(make_object(random_attributes(rng), cells.take()));
  }
  assign_ids(objs, rng);
  return {Scene{std::move(objs)}, IdentifyAllGoal{f}};
}

// Count: single color predicate; at least one matching object sits at back depth.
inline std::pair<Scene, Goal> generate_count(Rng& rng) {
  CellPicker cells(rng);
  AttributeFilter f;
  f.color = static_cast<Color>(rng.below(kNumColors));

  std::vector<ObjectSpec> objs;
  const int fronts = rng.between(4, 9);
  for (int i = 0; i < fronts; ++i) {
    objs.push_back(make_object(random_attributes(rng), cells.take()));
  }
  const int backs = rng.between(1, 3);
  std::vector<std::size_t> hosts(objs.size());
  for (std::size_t i = 0; i < hosts.size(); ++i) hosts[i] = i;
  rng.shuffle(hosts);
  for (int i = 0; i < backs; ++i) {
    Attributes a = random_attributes(rng);
    if (i == 0) a.color = *f.color;
    objs.push_back(make_object(a, objs[hosts[static_cast<std::size_t>(i)]].pos, Depth::back));
  }
  assign_ids(objs, rng);
  return {Scene{std::move(objs)}, CountGoal{f}};
}

}  // namespace detail

/// Deterministic in (seed, kind).
inline Scenario generate_scenario(std::uint64_t seed, GoalKind kind) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(kind), 0x5CE7A210ULL));
  std::pair<Scene, Goal> made;
  switch (kind) {
    case GoalKind::place: made = detail::generate_place(rng); break;
    case GoalKind::identify_all: made = detail::generate_identify(rng); break;
    case GoalKind::count: made = detail::generate_count(rng); break;
  }
  Scenario s;
  s.seed = seed;
  s.kind = kind;
  s.scene = std::move(made.first);
  s.goal = std::move(made.second);
  s.instruction = instruction_for(s.goal, s.scene);
  s.initial_context = initial_context(s.instruction);
  return s;
}

}  // namespace cimr
