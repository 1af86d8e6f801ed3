#include "stance/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "stance/error.h"
#include "stance/text_util.h"

namespace stance {
namespace {

struct TopicName {
  const char* code;
  const char* description;
};

constexpr TopicName kKnownTopics[] = {
    {"AT", "Atheism"},
    {"CC", "Climate Change is a Real Concern"},
    {"FM", "Feminist Movement"},
    {"HC", "Hillary Clinton"},
    {"LA", "Legalization of Abortion"},
    {"MMR", "MMR vaccination can cause autism"},
    {"EC", "E-cigarettes are safer than normal cigarettes"},
    {"HRT", "Women should take HRT post menopause"},
    {"VC", "Vitamin C prevents common cold"},
    {"SC", "Sun exposure leads to skin cancer"},
};

// One record per row; handles quoted fields (with doubled quotes and
// embedded delimiters/newlines). Returns rows with their starting line.
std::vector<std::pair<std::size_t, std::vector<std::string>>> parse_delimited(
    const std::string& content, char delim, const std::string& source) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t row_line = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.size() == 1 && trim(row[0]).empty();
    if (!blank) rows.emplace_back(row_line, std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delim) {
      end_field();
    } else if (c == '\r') {
      // dropped; "\r\n" endings
    } else if (c == '\n') {
      end_row();
      ++line;
      row_line = line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw ParseError(source, row_line, "unterminated quoted field");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_unique_ids(const std::vector<Post>& posts, const std::string& what) {
  std::set<std::string> seen;
  for (const Post& p : posts) {
    if (p.id.empty()) throw ValidationError(what + ": post with empty id");
    if (!seen.insert(p.id).second) {
      throw ValidationError(what + ": duplicate post id '" + p.id + "'");
    }
    if (trim(p.text).empty()) {
      throw ValidationError(what + ": post '" + p.id + "' has empty text");
    }
  }
}

}  // namespace

std::string topic_code(const std::string& target) {
  const std::string folded = to_lower_ascii(trim(target));
  for (const auto& t : kKnownTopics) {
    if (folded == to_lower_ascii(t.description) || folded == to_lower_ascii(t.code)) {
      return t.code;
    }
  }
  return std::string(trim(target));
}

std::string topic_description(const std::string& code) {
  for (const auto& t : kKnownTopics) {
    if (code == t.code) return t.description;
  }
  return code;
}

std::map<std::string, TopicDataset> load_semeval(const std::filesystem::path& path,
                                                 Split into) {
  const std::vector<std::string> lines = read_lines(path);
  const std::string source = path.string();
  if (lines.empty()) throw ParseError(source, 1, "missing header row");

  const std::vector<std::string> header = split(lines[0], '\t');
  static const std::vector<std::string> kHeader = {"id", "target", "tweet", "stance"};
  bool header_ok = header.size() == kHeader.size();
  for (std::size_t i = 0; header_ok && i < header.size(); ++i) {
    header_ok = to_lower_ascii(trim(header[i])) == kHeader[i];
  }
  if (!header_ok) {
    throw ParseError(source, 1, "expected header ID<TAB>Target<TAB>Tweet<TAB>Stance");
  }

  std::map<std::string, TopicDataset> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::vector<std::string> cols = split(lines[i], '\t');
    if (cols.size() != 4) {
      throw ParseError(source, i + 1,
                       "expected 4 tab-separated columns, got " + std::to_string(cols.size()));
    }
    const auto label = try_parse_label(cols[3]);
    if (!label) {
      throw ValidationError(source + ":" + std::to_string(i + 1) + ": unknown stance label '" +
                            cols[3] + "'");
    }
    Post p;
    p.id = std::string(trim(cols[0]));
    p.topic = topic_code(cols[1]);
    p.text = cols[2];
    p.gold = *label;

    TopicDataset& ds = out[p.topic];
    if (ds.topic.empty()) {
      ds.topic = p.topic;
      ds.target = std::string(trim(cols[1]));
    }
    (into == Split::kTrain ? ds.train : ds.test).push_back(std::move(p));
  }
  for (const auto& [topic, ds] : out) validate(ds);
  return out;
}

std::map<std::string, TopicDataset> load_semeval_pair(const std::filesystem::path& train_path,
                                                      const std::filesystem::path& test_path) {
  std::map<std::string, TopicDataset> merged = load_semeval(train_path, Split::kTrain);
  for (auto& [topic, ds] : load_semeval(test_path, Split::kTest)) {
    TopicDataset& dst = merged[topic];
    if (dst.topic.empty()) {
      dst.topic = ds.topic;
      dst.target = ds.target;
    }
    dst.test = std::move(ds.test);
  }
  for (const auto& [topic, ds] : merged) validate(ds);
  return merged;
}

void write_semeval(const std::vector<Post>& posts, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  out << "ID\tTarget\tTweet\tStance\n";
  for (const Post& p : posts) {
    for (const std::string* field : {&p.id, &p.text}) {
      if (field->find_first_of("\t\n\r") != std::string::npos) {
        throw ValidationError("post '" + p.id + "' contains a tab or newline");
      }
    }
    out << p.id << '\t' << topic_description(p.topic) << '\t' << p.text << '\t'
        << to_string(p.gold) << '\n';
  }
}

std::vector<Post> load_mpchi_posts(const std::filesystem::path& path,
                                   const MpchiFormat& format) {
  const std::string source = path.string();
  auto rows = parse_delimited(slurp(path), format.delimiter, source);
  if (rows.empty()) throw ParseError(source, 1, "missing header row");

  const std::vector<std::string>& header = rows.front().second;
  auto column = [&](const std::string& name) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (to_lower_ascii(trim(header[i])) == to_lower_ascii(name)) {
        return static_cast<std::ptrdiff_t>(i);
      }
    }
    return -1;
  };
  const std::ptrdiff_t text_col = column(format.text_column);
  const std::ptrdiff_t label_col = column(format.label_column);
  const std::ptrdiff_t id_col = format.id_column.empty() ? -1 : column(format.id_column);
  if (text_col < 0) throw ParseError(source, 1, "no column named '" + format.text_column + "'");
  if (label_col < 0) throw ParseError(source, 1, "no column named '" + format.label_column + "'");
  if (!format.id_column.empty() && id_col < 0) {
    throw ParseError(source, 1, "no column named '" + format.id_column + "'");
  }

  std::vector<Post> posts;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [line, cols] = rows[r];
    if (cols.size() != header.size()) {
      throw ParseError(source, line,
                       "expected " + std::to_string(header.size()) + " columns, got " +
                           std::to_string(cols.size()));
    }
    const auto label = try_parse_label(cols[label_col]);
    if (!label) {
      throw ValidationError(source + ":" + std::to_string(line) + ": unknown stance label '" +
                            cols[label_col] + "'");
    }
    Post p;
    p.id = id_col >= 0 ? std::string(trim(cols[id_col])) : format.topic + "-" + std::to_string(r);
    p.topic = format.topic;
    p.text = cols[text_col];
    p.gold = *label;
    posts.push_back(std::move(p));
  }
  check_unique_ids(posts, source);
  return posts;
}

TopicDataset load_mpchi(const std::filesystem::path& path, const MpchiFormat& format,
                        const SplitSpec& spec,
                        const std::optional<std::filesystem::path>& manifest) {
  std::vector<Post> posts = load_mpchi_posts(path, format);
  TopicDataset ds;
  ds.topic = format.topic;
  ds.target = topic_description(format.topic);
  if (manifest) {
    std::tie(ds.train, ds.test) = apply_split_manifest(posts, read_split_manifest(*manifest));
  } else if (!posts.empty()) {
    std::tie(ds.train, ds.test) = stratified_split(std::move(posts), spec);
  }
  validate(ds);
  return ds;
}

std::map<std::string, Split> read_split_manifest(const std::filesystem::path& path) {
  std::map<std::string, Split> manifest;
  const std::vector<std::string> lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::vector<std::string> cols = split_whitespace(lines[i]);
    if (cols.size() != 2) throw ParseError(path.string(), i + 1, "expected '<id> train|test'");
    const std::string which = to_lower_ascii(cols[1]);
    Split s;
    if (which == "train") {
      s = Split::kTrain;
    } else if (which == "test") {
      s = Split::kTest;
    } else {
      throw ParseError(path.string(), i + 1, "split must be 'train' or 'test'");
    }
    if (!manifest.emplace(cols[0], s).second) {
      throw ParseError(path.string(), i + 1, "duplicate id '" + cols[0] + "'");
    }
  }
  return manifest;
}

void write_split_manifest(const TopicDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  for (const Post& p : ds.train) out << p.id << "\ttrain\n";
  for (const Post& p : ds.test) out << p.id << "\ttest\n";
}

std::pair<std::vector<Post>, std::vector<Post>> apply_split_manifest(
    const std::vector<Post>& posts, const std::map<std::string, Split>& manifest) {
  std::pair<std::vector<Post>, std::vector<Post>> out;
  for (const Post& p : posts) {
    const auto it = manifest.find(p.id);
    if (it == manifest.end()) {
      throw ValidationError("split manifest has no entry for post '" + p.id + "'");
    }
    (it->second == Split::kTrain ? out.first : out.second).push_back(p);
  }
  return out;
}

std::pair<std::vector<Post>, std::vector<Post>> stratified_split(std::vector<Post> posts,
                                                                 const SplitSpec& spec) {
  if (posts.empty()) throw ValidationError("stratified_split: no posts");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ValidationError("stratified_split: train_fraction must lie in (0, 1)");
  }
  std::sort(posts.begin(), posts.end(),
            [](const Post& a, const Post& b) { return a.id < b.id; });

  std::mt19937_64 rng(spec.seed);
  const auto n_train_total =
      static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(posts.size())));

  std::pair<std::vector<Post>, std::vector<Post>> out;
  if (!spec.stratified) {
    std::shuffle(posts.begin(), posts.end(), rng);
    out.first.assign(posts.begin(), posts.begin() + static_cast<std::ptrdiff_t>(n_train_total));
    out.second.assign(posts.begin() + static_cast<std::ptrdiff_t>(n_train_total), posts.end());
    return out;
  }

  std::array<std::vector<Post>, kNumLabels> by_class;
  for (Post& p : posts) by_class[index_of(p.gold)].push_back(std::move(p));

  // Largest-remainder apportionment of the train budget across classes.
  std::array<std::size_t, kNumLabels> quota{};
  std::array<double, kNumLabels> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    const double exact = spec.train_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  std::array<std::size_t, kNumLabels> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t c : order) {
    if (assigned >= n_train_total) break;
    if (quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  for (std::size_t c = 0; c < kNumLabels; ++c) {
    auto& group = by_class[c];
    std::shuffle(group.begin(), group.end(), rng);
    for (std::size_t i = 0; i < group.size(); ++i) {
      (i < quota[c] ? out.first : out.second).push_back(std::move(group[i]));
    }
  }
  const auto by_id = [](const Post& a, const Post& b) { return a.id < b.id; };
  std::sort(out.first.begin(), out.first.end(), by_id);
  std::sort(out.second.begin(), out.second.end(), by_id);
  return out;
}

ClassCounts count_labels(const std::vector<Post>& posts) {
  ClassCounts c;
  for (const Post& p : posts) ++c.by_label[index_of(p.gold)];
  return c;
}

DatasetStats dataset_stats(const TopicDataset& ds) {
  return {count_labels(ds.train), count_labels(ds.test)};
}

void validate(const TopicDataset& ds) {
  check_unique_ids(ds.train, ds.topic + " train");
  check_unique_ids(ds.test, ds.topic + " test");
  std::set<std::string> train_ids;
  for (const Post& p : ds.train) train_ids.insert(p.id);
  for (const Post& p : ds.test) {
    if (train_ids.count(p.id)) {
      throw ValidationError(ds.topic + ": post '" + p.id + "' is in both train and test");
    }
  }
}

}  // namespace stance
