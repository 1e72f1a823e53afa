#pragma once

// Test-only reference implementations. They deliberately avoid the library's
// helpers (AttributeFilter::matches, required_cell, parse_observation, ...) so
// they can serve as independent oracles.

#include <optional>
#include <set>
#include <vector>

#include "cimr/cimr.hpp"

namespace cimr::oracle {

/// Random valid scene: 0..max_objects objects, back slots only under fronts.
inline Scene random_scene(Rng& rng, int max_objects = 20) {
  Scene s;
  const int n = rng.between(0, max_objects);
  std::vector<GridPos> cells;
  for (int r = 0; r < kGridSize; ++r)
    for (int c = 0; c < kGridSize; ++c) cells.push_back({r, c});
  rng.shuffle(cells);
  std::vector<GridPos> fronts;
  int next_id = 0;
  for (int i = 0; i < n; ++i) {
    ObjectSpec o;
    o.id = next_id;
    next_id += rng.between(1, 3);  // ids need not be dense
    o.color = static_cast<Color>(rng.below(kNumColors));
    o.shape = static_cast<Shape>(rng.below(kNumShapes));
    o.material = static_cast<Material>(rng.below(kNumMaterials));
    const bool back = !fronts.empty() && rng.bernoulli(0.3);
    if (back) {
      const auto k = static_cast<std::size_t>(rng.below(fronts.size()));
      o.pos = fronts[k];
      o.depth = Depth::back;
      fronts.erase(fronts.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      o.pos = cells.back();
      cells.pop_back();
      o.depth = Depth::front;
      fronts.push_back(o.pos);
    }
    s.objects.push_back(o);
  }
  return s;
}

/// Ground-truth visibility: front objects always, back objects from viewpoint 1.
inline std::vector<VisibleObject> visible_objects(const Scene& scene, int viewpoint) {
  std::vector<VisibleObject> out;
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      for (int d = 0; d < 2; ++d) {
        if (d == 1 && viewpoint == 0) continue;
        for (const auto& o : scene.objects) {
          if (o.pos.row == r && o.pos.col == c && static_cast<int>(o.depth) == d) {
            out.push_back({{o.color, o.shape, o.material}, {r, c}, o.depth});
          }
        }
      }
    }
  }
  return out;
}

inline bool brute_matches(const ObjectSpec& o, const AttributeFilter& f) {
  if (f.color.has_value() && o.color != f.color.value()) return false;
  if (f.shape.has_value() && o.shape != f.shape.value()) return false;
  if (f.material.has_value() && o.material != f.material.value()) return false;
  return true;
}

/// Brute-force verdict: walk every cell and depth slot.
inline bool brute_force_success(const Goal& goal, const Scene& scene, const Response& answer) {
  std::vector<const ObjectSpec*> slots;
  for (int r = 0; r < kGridSize; ++r)
    for (int c = 0; c < kGridSize; ++c)
      for (Depth d : {Depth::front, Depth::back})
        if (const auto* o = scene.at({r, c}, d)) slots.push_back(o);

  if (const auto* place = std::get_if<PlaceGoal>(&goal)) {
    const ObjectSpec* subject = nullptr;
    const ObjectSpec* reference = nullptr;
    for (const auto* o : slots) {
      if (o->id == place->subject_id) subject = o;
      if (o->id == place->reference_id) reference = o;
    }
    const int dr = subject->pos.row - reference->pos.row;
    const int dc = subject->pos.col - reference->pos.col;
    switch (place->relation) {
      case Relation::left_of: return dr == 0 && dc == -1;
      case Relation::right_of: return dr == 0 && dc == 1;
      case Relation::above: return dr == -1 && dc == 0;
      case Relation::below: return dr == 1 && dc == 0;
    }
    return false;
  }
  if (const auto* ident = std::get_if<IdentifyAllGoal>(&goal)) {
    std::set<int> truth;
    for (const auto* o : slots)
      if (brute_matches(*o, ident->filter)) truth.insert(o->id);
    return truth == std::get<IdSet>(answer.answer).ids;
  }
  const auto& count = std::get<CountGoal>(goal);
  int n = 0;
  for (const auto* o : slots) n += brute_matches(*o, count.filter);
  return n == std::get<CountValue>(answer.answer).value;
}

inline AttributeFilter random_filter(Rng& rng, int min_constraints, int max_constraints) {
  for (;;) {
    AttributeFilter f;
    if (rng.bernoulli(0.5)) f.color = static_cast<Color>(rng.below(kNumColors));
    if (rng.bernoulli(0.5)) f.shape = static_cast<Shape>(rng.below(kNumShapes));
    if (rng.bernoulli(0.5)) f.material = static_cast<Material>(rng.below(kNumMaterials));
    const int k = f.constraint_count();
    if (k >= min_constraints && k <= max_constraints) return f;
  }
}

struct GoalCase {
  Goal goal;
  Response answer;
  Scene scene;  // configuration the answer is judged on (after any move)
};

/// Random (goal, answer, scene) triple for a scene with >= 2 objects. Answers
/// are biased toward near-misses so both verdicts occur often. Place answers
/// move the subject next to the required cell and are judged on the result.
inline GoalCase random_goal_case(Rng& rng, const Scene& scene) {
  switch (rng.below(3)) {
    case 0: {
      const auto a = static_cast<std::size_t>(rng.below(scene.objects.size()));
      auto b = static_cast<std::size_t>(rng.below(scene.objects.size() - 1));
      if (b >= a) ++b;
      PlaceGoal g{scene.objects[a].id, static_cast<Relation>(rng.below(4)), scene.objects[b].id};
      static constexpr int kOffset[4][2] = {{0, -1}, {0, 1}, {-1, 0}, {1, 0}};
      const auto& ref = scene.objects[b].pos;
      GridPos dest{ref.row + kOffset[static_cast<int>(g.relation)][0],
                   ref.col + kOffset[static_cast<int>(g.relation)][1]};
      if (rng.bernoulli(0.5)) {
        dest.row += rng.between(-1, 1);
        dest.col += rng.between(-1, 1);
      }
      ActionPlan plan{{MoveAction{g.subject_id, dest}}};
      Scene after = scene;
      try {
        after = apply_action(scene, plan.moves[0]);
      } catch (const DomainError&) {
        plan.moves.clear();
      }
      return {g, Response{plan, ""}, after};
    }
    case 1: {
      IdentifyAllGoal g{random_filter(rng, 1, 3)};
      std::set<int> ids;
      for (const auto& o : scene.objects) {
        const bool truth = brute_matches(o, g.filter);
        if (truth != rng.bernoulli(0.1)) ids.insert(o.id);
      }
      if (rng.bernoulli(0.05)) ids.insert(10'000);
      return {g, Response{IdSet{ids}, ""}, scene};
    }
    default: {
      CountGoal g{random_filter(rng, 1, 1)};
      int n = 0;
      for (const auto& o : scene.objects) n += brute_matches(o, g.filter);
      const int noise = rng.between(-1, 1);
      return {g, Response{CountValue{std::max(0, n + noise)}, ""}, scene};
    }
  }
}

}  // namespace cimr::oracle
