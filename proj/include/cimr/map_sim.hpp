#pragma once

// Synthetic multi-modal action planning world: an 8x8 grid where every cell
// holds at most a front and a back object. Back objects are hidden from the
// default viewpoint.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cimr/errors.hpp"

namespace cimr {

inline constexpr int kGridSize = 8;

enum class Color : std::uint8_t { red, green, blue, yellow, gray };
enum class Shape : std::uint8_t { cube, sphere, cylinder };
enum class Material : std::uint8_t { metallic, rubber };
enum class Depth : std::uint8_t { front, back };

inline constexpr int kNumColors = 5;
inline constexpr int kNumShapes = 3;
inline constexpr int kNumMaterials = 2;

inline constexpr std::array<std::string_view, kNumColors> kColorNames{"red", "green", "blue",
                                                                      "yellow", "gray"};
inline constexpr std::array<std::string_view, kNumShapes> kShapeNames{"cube", "sphere", "cylinder"};
inline constexpr std::array<std::string_view, kNumShapes> kShapeAdjectives{"cubic", "spherical",
                                                                           "cylindrical"};
inline constexpr std::array<std::string_view, kNumMaterials> kMaterialNames{"metallic", "rubber"};

constexpr std::string_view to_string(Color c) { return kColorNames[static_cast<int>(c)]; }
constexpr std::string_view to_string(Shape s) { return kShapeNames[static_cast<int>(s)]; }
constexpr std::string_view to_string(Material m) { return kMaterialNames[static_cast<int>(m)]; }
constexpr std::string_view to_string(Depth d) { return d == Depth::front ? "front" : "back"; }

template <typename Enum, std::size_t N>
std::optional<Enum> enum_from_name(const std::array<std::string_view, N>& names,
                                   std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

struct GridPos {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
  friend auto operator<=>(const GridPos&, const GridPos&) = default;
};

constexpr bool in_bounds(GridPos p) {
  return p.row >= 0 && p.row < kGridSize && p.col >= 0 && p.col < kGridSize;
}

struct Attributes {
  Color color = Color::red;
  Shape shape = Shape::cube;
  Material material = Material::metallic;
  friend bool operator==(const Attributes&, const Attributes&) = default;
};

struct ObjectSpec {
  int id = 0;
  Color color = Color::red;
  Shape shape = Shape::cube;
  Material material = Material::metallic;
  GridPos pos;
  Depth depth = Depth::front;

  Attributes attributes() const { return {color, shape, material}; }
  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct Scene {
  std::vector<ObjectSpec> objects;

  const ObjectSpec* find(int id) const {
    auto it = std::find_if(objects.begin(), objects.end(),
                           [id](const ObjectSpec& o) { return o.id == id; });
    return it == objects.end() ? nullptr : &*it;
  }

  const ObjectSpec* at(GridPos p, Depth d) const {
    auto it = std::find_if(objects.begin(), objects.end(),
                           [&](const ObjectSpec& o) { return o.pos == p && o.depth == d; });
    return it == objects.end() ? nullptr : &*it;
  }

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Checks the scene invariants: in-bounds positions, unique ids, at most one
/// object per (cell, depth) and no back object without a front object.
/// Throws DomainError(InvalidScene) naming the first violation.
inline void validate(const Scene& scene) {
  std::array<std::array<std::array<bool, 2>, kGridSize>, kGridSize> used{};
  std::vector<int> ids;
  ids.reserve(scene.objects.size());
  for (const auto& o : scene.objects) {
    if (o.id < 0) throw DomainError(DomainErrc::InvalidScene, "negative id");
    if (!in_bounds(o.pos)) {
      throw DomainError(DomainErrc::InvalidScene, "object " + std::to_string(o.id) + " off grid");
    }
    auto& slot = used[o.pos.row][o.pos.col][static_cast<int>(o.depth)];
    if (slot) {
      throw DomainError(DomainErrc::InvalidScene,
                        "two objects share a slot at object " + std::to_string(o.id));
    }
    slot = true;
    ids.push_back(o.id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw DomainError(DomainErrc::InvalidScene, "duplicate object id");
  }
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      if (used[r][c][1] && !used[r][c][0]) {
        throw DomainError(DomainErrc::InvalidScene, "back object without a front object");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Observations

inline constexpr int kSymbolDim = kNumColors + kNumShapes + kNumMaterials + 1;  // 11
inline constexpr int kPresenceIndex = kSymbolDim - 1;

using SymbolVec = std::array<std::uint8_t, kSymbolDim>;
using CellSlots = std::array<SymbolVec, 2>;  // [front, back]

struct Observation {
  int viewpoint = 0;
  std::array<std::array<CellSlots, kGridSize>, kGridSize> cells{};
  friend bool operator==(const Observation&, const Observation&) = default;
};

inline SymbolVec encode_symbol(const Attributes& a) {
  SymbolVec v{};
  v[static_cast<int>(a.color)] = 1;
  v[kNumColors + static_cast<int>(a.shape)] = 1;
  v[kNumColors + kNumShapes + static_cast<int>(a.material)] = 1;
  v[kPresenceIndex] = 1;
  return v;
}

/// Pure render. Viewpoint 0 shows front slots only; viewpoint >= 1 also shows
/// back slots.
inline Observation render(const Scene& scene, int viewpoint) {
  Observation obs;
  obs.viewpoint = viewpoint;
  for (const auto& o : scene.objects) {
    if (o.depth == Depth::back && viewpoint < 1) continue;
    obs.cells[o.pos.row][o.pos.col][static_cast<int>(o.depth)] = encode_symbol(o.attributes());
  }
  return obs;
}

struct VisibleObject {
  Attributes attributes;
  GridPos pos;
  Depth depth = Depth::front;
  friend bool operator==(const VisibleObject&, const VisibleObject&) = default;
};

namespace detail {

inline std::optional<int> one_hot_index(const SymbolVec& v, int begin, int count) {
  std::optional<int> hit;
  for (int i = 0; i < count; ++i) {
    const auto x = v[begin + i];
    if (x == 0) continue;
    if (x != 1 || hit) return std::nullopt;
    hit = i;
  }
  return hit;
}

}  // namespace detail

/// Decodes one slot; nullopt for an all-zero slot.
inline std::optional<Attributes> decode_symbol(const SymbolVec& v, GridPos where) {
  const auto malformed = [&](const char* why) {
    return DomainError(DomainErrc::MalformedObservation,
                       std::string(why) + " at (" + std::to_string(where.row) + "," +
                           std::to_string(where.col) + ")");
  };
  if (v[kPresenceIndex] == 0) {
    if (std::any_of(v.begin(), v.end(), [](auto x) { return x != 0; })) {
      throw malformed("attribute bits set without presence");
    }
    return std::nullopt;
  }
  if (v[kPresenceIndex] != 1) throw malformed("presence flag not 0/1");
  const auto color = detail::one_hot_index(v, 0, kNumColors);
  const auto shape = detail::one_hot_index(v, kNumColors, kNumShapes);
  const auto material = detail::one_hot_index(v, kNumColors + kNumShapes, kNumMaterials);
  if (!color) throw malformed("color block not one-hot");
  if (!shape) throw malformed("shape block not one-hot");
  if (!material) throw malformed("material block not one-hot");
  return Attributes{static_cast<Color>(*color), static_cast<Shape>(*shape),
                    static_cast<Material>(*material)};
}

/// Visible objects in row-major cell order, front before back.
inline std::vector<VisibleObject> parse_observation(const Observation& obs) {
  std::vector<VisibleObject> out;
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      const GridPos p{r, c};
      const auto front = decode_symbol(obs.cells[r][c][0], p);
      const auto back = decode_symbol(obs.cells[r][c][1], p);
      if (back && !front) {
        throw DomainError(DomainErrc::MalformedObservation,
                          "back slot set without a front object at (" + std::to_string(r) + "," +
                              std::to_string(c) + ")");
      }
      if (front) out.push_back({*front, p, Depth::front});
      if (back) out.push_back({*back, p, Depth::back});
    }
  }
  return out;
}

/// Instance ids for the visible slots of a render (-1 where nothing is seen),
/// as an environment would report alongside the symbol grid.
struct IdOverlay {
  std::array<std::array<std::array<int, 2>, kGridSize>, kGridSize> ids;

  IdOverlay() {
    for (auto& row : ids)
      for (auto& cell : row) cell = {-1, -1};
  }

  /// Visible slot of an object id, if any.
  std::optional<std::pair<GridPos, Depth>> locate(int id) const {
    for (int r = 0; r < kGridSize; ++r)
      for (int c = 0; c < kGridSize; ++c)
        for (int d = 0; d < 2; ++d)
          if (ids[r][c][d] == id) return std::pair{GridPos{r, c}, static_cast<Depth>(d)};
    return std::nullopt;
  }
};

inline IdOverlay id_overlay(const Scene& scene, int viewpoint) {
  IdOverlay out;
  for (const auto& o : scene.objects) {
    if (o.depth == Depth::back && viewpoint < 1) continue;
    out.ids[o.pos.row][o.pos.col][static_cast<int>(o.depth)] = o.id;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Actions

struct MoveAction {
  int object_id = 0;
  GridPos to;
  friend bool operator==(const MoveAction&, const MoveAction&) = default;
};

/// Moves one object. The source slot is vacated first (a back object there is
/// promoted to front), then the object lands in the destination's front slot,
/// or its back slot when the front is taken.
inline Scene apply_action(const Scene& scene, const MoveAction& action) {
  const ObjectSpec* mover = scene.find(action.object_id);
  if (mover == nullptr) {
    throw DomainError(DomainErrc::NoSuchObject, "object " + std::to_string(action.object_id));
  }
  if (!in_bounds(action.to)) {
    throw DomainError(DomainErrc::OutOfBounds, "destination (" + std::to_string(action.to.row) +
                                                   "," + std::to_string(action.to.col) + ")");
  }

  Scene next = scene;
  auto it = std::find_if(next.objects.begin(), next.objects.end(),
                         [&](const ObjectSpec& o) { return o.id == action.object_id; });
  const GridPos from = it->pos;
  const Depth from_depth = it->depth;

  // Vacate the source slot.
  if (from_depth == Depth::front) {
    for (auto& o : next.objects) {
      if (o.pos == from && o.depth == Depth::back) o.depth = Depth::front;
    }
  }
  it->pos = GridPos{-1, -1};

  bool front_taken = false;
  bool back_taken = false;
  for (const auto& o : next.objects) {
    if (o.pos != action.to) continue;
    (o.depth == Depth::front ? front_taken : back_taken) = true;
  }
  if (front_taken && back_taken) {
    throw DomainError(DomainErrc::CellFull, "destination (" + std::to_string(action.to.row) + "," +
                                                std::to_string(action.to.col) + ")");
  }
  it->pos = action.to;
  it->depth = front_taken ? Depth::back : Depth::front;
  return next;
}

}  // namespace cimr
