#include "stance/preprocess.h"

#include <cmath>
#include <tuple>

#include "stance/error.h"
#include "stance/text_util.h"

namespace stance {
namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c >= 0x80;
}

bool is_url(std::string_view chunk) {
  return chunk.starts_with("http://") || chunk.starts_with("https://") ||
         chunk.starts_with("www.");
}

// Byte offsets at which a UTF-8 code point starts, plus the end offset.
std::vector<std::size_t> char_boundaries(std::string_view s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) out.push_back(i);
  }
  out.push_back(s.size());
  return out;
}

void tokenize_chunk(std::string_view chunk, bool microblog, TokenSequence& out) {
  std::size_t i = 0;
  while (i < chunk.size()) {
    const auto c = static_cast<unsigned char>(chunk[i]);
    const bool sigil = microblog && (c == '#' || c == '@') && i + 1 < chunk.size() &&
                       is_word_byte(static_cast<unsigned char>(chunk[i + 1]));
    if (sigil || is_word_byte(c)) {
      const std::size_t start = i;
      if (sigil) ++i;
      while (i < chunk.size()) {
        const auto d = static_cast<unsigned char>(chunk[i]);
        if (is_word_byte(d)) {
          ++i;
        } else if ((d == '\'' || d == '-') && i + 1 < chunk.size() &&
                   is_word_byte(static_cast<unsigned char>(chunk[i + 1])) && i > start) {
          // internal apostrophe or hyphen: "we're", "e-cigarettes"
          ++i;
        } else {
          break;
        }
      }
      out.push_back({std::string(chunk.substr(start, i - start))});
    } else {
      out.push_back({std::string(1, chunk[i])});
      ++i;
    }
  }
}

}  // namespace

std::vector<std::string> words(const TokenSequence& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) out.push_back(t.text);
  return out;
}

NormalizationLexicon::NormalizationLexicon(
    std::unordered_map<std::string, std::vector<std::string>> entries) {
  for (auto& [key, value] : entries) entries_.emplace(to_lower_ascii(key), std::move(value));
}

NormalizationLexicon NormalizationLexicon::load(const std::filesystem::path& path) {
  std::unordered_map<std::string, std::vector<std::string>> entries;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty() || lines[i].front() == '#') continue;
    const auto cols = split(lines[i], '\t');
    if (cols.size() != 2 || trim(cols[0]).empty()) {
      throw ParseError(path.string(), i + 1, "expected 'oov<TAB>replacement'");
    }
    auto replacement = split_whitespace(to_lower_ascii(cols[1]));
    if (replacement.empty()) throw ParseError(path.string(), i + 1, "empty replacement");
    entries[to_lower_ascii(trim(cols[0]))] = std::move(replacement);
  }
  return NormalizationLexicon(std::move(entries));
}

const std::vector<std::string>* NormalizationLexicon::find(std::string_view token) const {
  const auto it = entries_.find(std::string(token));
  return it == entries_.end() ? nullptr : &it->second;
}

UnigramFrequencyTable::UnigramFrequencyTable(std::vector<std::string> words_by_frequency) {
  // Repeated words keep their first (most frequent) rank.
  for (std::string& w : words_by_frequency) {
    if (rank_.emplace(w, words_.size()).second) words_.push_back(std::move(w));
  }
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty()) throw ValidationError("frequency table contains an empty word");
    max_len_ = std::max(max_len_, words_[i].size());
  }
  if (!words_.empty() && words_.size() < 2) {
    throw ValidationError("frequency table needs at least two words");
  }
  log_vocab_ = words_.empty() ? 0.0 : std::log(static_cast<double>(words_.size()));
}

UnigramFrequencyTable UnigramFrequencyTable::load(const std::filesystem::path& path) {
  std::vector<std::string> list;
  for (const std::string& line : read_lines(path)) {
    const std::string_view w = trim(line);
    if (!w.empty()) list.push_back(to_lower_ascii(w));
  }
  return UnigramFrequencyTable(std::move(list));
}

std::optional<std::size_t> UnigramFrequencyTable::rank(std::string_view word) const {
  const auto it = rank_.find(std::string(word));
  if (it == rank_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> UnigramFrequencyTable::cost(std::string_view word) const {
  const auto r = rank(word);
  if (!r) return std::nullopt;
  return std::log(static_cast<double>(*r + 1) * log_vocab_);
}

double segment_piece_cost(std::string_view piece, const UnigramFrequencyTable& freq) {
  if (const auto c = freq.cost(piece)) return *c;
  const auto bounds = char_boundaries(piece);
  if (bounds.size() == 2) return kUnknownCharCost;
  return std::numeric_limits<double>::infinity();
}

std::int64_t quantize_cost(double cost) { return std::llround(cost * 4294967296.0); }

std::vector<std::string> segment_hashtag(std::string_view tag, const UnigramFrequencyTable& freq) {
  if (tag.empty()) return {};
  const std::vector<std::size_t> bounds = char_boundaries(tag);
  const std::size_t n = bounds.size() - 1;  // number of code points

  // Costs are summed in fixed point so equal-cost splits tie exactly
  // regardless of summation order.
  constexpr std::int64_t kUnreached = std::numeric_limits<std::int64_t>::max();
  struct Best {
    std::int64_t cost = kUnreached;
    std::vector<std::string> pieces;
  };
  std::vector<Best> best(n + 1);
  best[0].cost = 0;

  for (std::size_t end = 1; end <= n; ++end) {
    for (std::size_t start = end; start-- > 0;) {
      const std::size_t bytes = bounds[end] - bounds[start];
      if (end - start > 1 && bytes > freq.max_word_length()) break;
      if (best[start].cost == kUnreached) continue;
      const std::string_view piece = tag.substr(bounds[start], bytes);
      const double piece_cost = segment_piece_cost(piece, freq);
      if (!std::isfinite(piece_cost)) continue;
      const std::int64_t total = best[start].cost + quantize_cost(piece_cost);

      Best& cur = best[end];
      const std::size_t count = best[start].pieces.size() + 1;
      bool take = total < cur.cost;
      if (!take && total == cur.cost) {
        if (count != cur.pieces.size()) {
          take = count < cur.pieces.size();
        } else {
          std::vector<std::string> cand = best[start].pieces;
          cand.emplace_back(piece);
          take = cand < cur.pieces;
        }
      }
      if (take) {
        cur.cost = total;
        cur.pieces = best[start].pieces;
        cur.pieces.emplace_back(piece);
      }
    }
  }
  return best[n].pieces;
}

std::string case_fold(std::string_view text) { return to_lower_ascii(text); }

TokenSequence tokenize(std::string_view text, bool microblog) {
  TokenSequence out;
  for (const std::string& chunk : split_whitespace(text)) {
    if (microblog && is_url(chunk)) {
      out.push_back({chunk});
      continue;
    }
    tokenize_chunk(chunk, microblog, out);
  }
  return out;
}

std::vector<std::string> normalize_token(const std::string& token,
                                         const NormalizationLexicon& lex) {
  if (const auto* replacement = lex.find(token)) return *replacement;
  return {token};
}

TokenSequence preprocess_text(std::string_view text, const PreprocessConfig& cfg,
                              const NormalizationLexicon& lex, const UnigramFrequencyTable& freq) {
  TokenSequence tokens = tokenize(case_fold(text), cfg.microblog);

  if (cfg.microblog) {
    TokenSequence expanded;
    for (Token& t : tokens) {
      if (is_url(t.text)) {
        expanded.push_back({std::string(kUrlToken)});
      } else if (t.text.size() > 1 && t.text.front() == '@') {
        expanded.push_back({std::string(kUserToken)});
      } else if (t.text.size() > 1 && t.text.front() == '#') {
        const std::string_view tag = std::string_view(t.text).substr(1);
        if (cfg.drop_semst && tag == "semst") continue;
        if (!cfg.apply_hashtag_split) {
          expanded.push_back(std::move(t));
          continue;
        }
        // Hashtag pieces bypass the normalization lexicon.
        for (std::string& piece : segment_hashtag(tag, freq)) {
          Token pt{std::move(piece)};
          pt.from_hashtag = true;
          expanded.push_back(std::move(pt));
        }
      } else if (cfg.apply_normalization) {
        const std::vector<std::string>* replacement = lex.find(t.text);
        if (!replacement) {
          expanded.push_back(std::move(t));
          continue;
        }
        for (const std::string& w : *replacement) {
          Token nt{w};
          nt.normalized = true;
          expanded.push_back(std::move(nt));
        }
      } else {
        expanded.push_back(std::move(t));
      }
    }
    tokens = std::move(expanded);
  }

  if (cfg.mode == PreprocessMode::kClassical) {
    TokenSequence kept;
    for (Token& t : tokens) {
      if (cfg.stopwords.count(t.text)) continue;
      t.unstemmed = t.text;
      t.text = porter_stem(t.unstemmed);
      t.stemmed = true;
      kept.push_back(std::move(t));
    }
    tokens = std::move(kept);
  }
  return tokens;
}

TokenSequence preprocess_post(const Post& post, const PreprocessConfig& cfg,
                              const NormalizationLexicon& lex, const UnigramFrequencyTable& freq) {
  return preprocess_text(post.text, cfg, lex, freq);
}

std::set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::set<std::string> out;
  for (const std::string& line : read_lines(path)) {
    const std::string_view w = trim(line);
    if (!w.empty()) out.insert(to_lower_ascii(w));
  }
  return out;
}

}  // namespace stance
