#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace spark {

// Eight tools plus chain-of-thought. The index is part of the file format.
enum class ActionId : std::uint8_t {
  calculator = 0,
  unit_converter = 1,
  search = 2,
  wiki_lookup = 3,
  python_repl = 4,
  table_lookup = 5,
  date_math = 6,
  translator = 7,
  cot = 8,
};

inline constexpr std::size_t kNumActions = 9;
inline constexpr std::size_t kNumTools = 8;

inline constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "calculator", "unit_converter", "search",    "wiki_lookup", "python_repl",
    "table_lookup", "date_math",    "translator", "cot"};

constexpr std::size_t index_of(ActionId a) noexcept { return static_cast<std::size_t>(a); }

constexpr ActionId action_at(std::size_t index) noexcept { return static_cast<ActionId>(index); }

constexpr std::string_view action_name(ActionId a) noexcept { return kActionNames[index_of(a)]; }

constexpr std::optional<ActionId> action_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNumActions; ++i)
    if (kActionNames[i] == name) return action_at(i);
  return std::nullopt;
}

using ActionScores = std::array<double, kNumActions>;
using ActionCounts = std::array<long, kNumActions>;

}  // namespace spark
