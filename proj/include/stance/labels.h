#ifndef STANCE_LABELS_H_
#define STANCE_LABELS_H_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace stance {

// Class order is fixed everywhere: Favor, Against, None.
enum class StanceLabel { kFavor = 0, kAgainst = 1, kNone = 2 };

inline constexpr std::size_t kNumLabels = 3;
inline constexpr std::array<StanceLabel, kNumLabels> kAllLabels = {
    StanceLabel::kFavor, StanceLabel::kAgainst, StanceLabel::kNone};

inline constexpr std::size_t index_of(StanceLabel l) {
  return static_cast<std::size_t>(l);
}

std::string_view to_string(StanceLabel l);

// Trims surrounding whitespace and case-folds before matching
// FAVOR / AGAINST / NONE.
std::optional<StanceLabel> try_parse_label(std::string_view s);

// Throws ValidationError on unknown strings.
StanceLabel parse_label(std::string_view s);

}  // namespace stance

#endif  // STANCE_LABELS_H_
