#include "stance/labels.h"

#include "stance/error.h"
#include "stance/text_util.h"

namespace stance {

std::string_view to_string(StanceLabel l) {
  switch (l) {
    case StanceLabel::kFavor:
      return "FAVOR";
    case StanceLabel::kAgainst:
      return "AGAINST";
    case StanceLabel::kNone:
      return "NONE";
  }
  return "NONE";
}

std::optional<StanceLabel> try_parse_label(std::string_view s) {
  const std::string folded = to_lower_ascii(trim(s));
  if (folded == "favor") return StanceLabel::kFavor;
  if (folded == "against") return StanceLabel::kAgainst;
  if (folded == "none") return StanceLabel::kNone;
  return std::nullopt;
}

StanceLabel parse_label(std::string_view s) {
  if (auto l = try_parse_label(s)) return *l;
  throw ValidationError("unknown stance label '" + std::string(s) + "'");
}

}  // namespace stance
