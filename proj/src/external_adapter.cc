#include "stance/external_adapter.h"

#include <set>

#include "stance/error.h"
#include "stance/text_util.h"

namespace stance {

std::vector<StanceLabel> ExternalPredictionSet::in_test_order(const TopicDataset& ds) const {
  std::vector<StanceLabel> out;
  out.reserve(ds.test.size());
  for (const Post& p : ds.test) {
    const auto it = labels.find(p.id);
    if (it == labels.end()) throw ValidationError("no external prediction for post " + p.id);
    out.push_back(it->second);
  }
  return out;
}

ExternalPredictionSet import_predictions(const std::filesystem::path& path,
                                         const TopicDataset& ds) {
  std::set<std::string> expected;
  for (const Post& p : ds.test) expected.insert(p.id);

  ExternalPredictionSet out;
  out.model = path.stem().string();
  out.topic = ds.topic;
  const std::string src = path.string();
  const std::vector<std::string> lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string_view body = trim(line.substr(1));
      if (body.rfind("model=", 0) == 0) out.model = std::string(trim(body.substr(6)));
      if (body.rfind("provenance=", 0) == 0) out.provenance = std::string(trim(body.substr(11)));
      continue;
    }
    const std::vector<std::string> parts = split(std::string(line), '\t');
    if (parts.size() != 2) throw ParseError(src, i + 1, "expected \"post_id<TAB>label\"");
    const std::string id(trim(parts[0]));
    const auto label = try_parse_label(std::string(trim(parts[1])));
    if (!label) throw ParseError(src, i + 1, "unknown label '" + parts[1] + "'");
    if (!expected.count(id)) {
      throw ParseError(src, i + 1, "post " + id + " is not in the " + ds.topic + " test split");
    }
    if (!out.labels.emplace(id, *label).second) {
      throw ParseError(src, i + 1, "duplicate prediction for post " + id);
    }
  }

  std::string missing;
  std::size_t n_missing = 0;
  for (const Post& p : ds.test) {
    if (out.labels.count(p.id)) continue;
    ++n_missing;
    missing += (missing.empty() ? "" : ", ") + p.id;
  }
  if (n_missing > 0) {
    throw ValidationError(src + ": missing " + std::to_string(n_missing) +
                          " prediction(s) for " + ds.topic + " test posts: " + missing);
  }
  if (out.provenance.empty()) out.provenance = "imported from " + src;
  return out;
}

}  // namespace stance
