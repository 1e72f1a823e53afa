#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cimr {

enum class FeedbackCategory : std::uint8_t {
  SPATIAL_MISALIGNMENT,
  CONSTRAINT_VIOLATION,
  COUNT_MISMATCH,
  MISSING_ITEM,
  EXTRANEOUS_ITEM,
};

inline constexpr std::array<std::string_view, 5> kCategoryNames{
    "SPATIAL_MISALIGNMENT", "CONSTRAINT_VIOLATION", "COUNT_MISMATCH", "MISSING_ITEM",
    "EXTRANEOUS_ITEM"};

constexpr std::string_view to_string(FeedbackCategory c) {
  return kCategoryNames[static_cast<int>(c)];
}

inline std::optional<FeedbackCategory> category_from_name(std::string_view s) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == s) return static_cast<FeedbackCategory>(i);
  }
  return std::nullopt;
}

struct Discrepancy {
  FeedbackCategory category = FeedbackCategory::SPATIAL_MISALIGNMENT;
  std::vector<int> subject_ids;
  std::string detail;
  friend bool operator==(const Discrepancy&, const Discrepancy&) = default;
};

/// Ordered discrepancy list, at most one entry per category. Empty means no issue.
class FeedbackSignal {
 public:
  FeedbackSignal() = default;

  /// Adds a discrepancy; a repeated category is merged into the existing entry.
  void add(FeedbackCategory category, std::vector<int> ids, std::string detail) {
    auto it = std::find_if(items_.begin(), items_.end(),
                           [&](const Discrepancy& d) { return d.category == category; });
    if (it == items_.end()) {
      items_.push_back({category, std::move(ids), std::move(detail)});
      return;
    }
    for (int id : ids) {
      if (std::find(it->subject_ids.begin(), it->subject_ids.end(), id) == it->subject_ids.end()) {
        it->subject_ids.push_back(id);
      }
    }
    if (!detail.empty()) it->detail += "; " + detail;
  }

  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  const std::vector<Discrepancy>& discrepancies() const { return items_; }

  bool has(FeedbackCategory c) const {
    return std::any_of(items_.begin(), items_.end(),
                       [c](const Discrepancy& d) { return d.category == c; });
  }

  std::vector<FeedbackCategory> categories() const {
    std::vector<FeedbackCategory> out;
    for (const auto& d : items_) out.push_back(d.category);
    return out;
  }

  friend bool operator==(const FeedbackSignal&, const FeedbackSignal&) = default;

 private:
  std::vector<Discrepancy> items_;
};

}  // namespace cimr
