#ifndef STANCE_PREPROCESS_H_
#define STANCE_PREPROCESS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stance/corpus.h"

namespace stance {

struct Token {
  std::string text;
  // Form before stemming; empty when the token was not stemmed.
  std::string unstemmed;
  bool from_hashtag = false;
  bool normalized = false;
  bool stemmed = false;

  friend bool operator==(const Token&, const Token&) = default;
};

using TokenSequence = std::vector<Token>;

std::vector<std::string> words(const TokenSequence& tokens);

// The token as written after normalization, ignoring stemming.
inline const std::string& surface_form(const Token& t) {
  return t.stemmed ? t.unstemmed : t.text;
}

enum class PreprocessMode {
  kClassical,  // stemming and stopword removal enabled
  kEmbedding,  // neither, so tokens stay findable in pretrained embeddings
};

struct PreprocessConfig {
  PreprocessMode mode = PreprocessMode::kClassical;
  bool microblog = true;
  bool apply_normalization = true;
  bool apply_hashtag_split = true;
  // Drops the "#SemST" marker appended to every SemEval tweet.
  bool drop_semst = true;
  std::set<std::string> stopwords;
};

class NormalizationLexicon {
 public:
  NormalizationLexicon() = default;
  explicit NormalizationLexicon(std::unordered_map<std::string, std::vector<std::string>> entries);

  // "oov<TAB>replacement phrase" per line.
  static NormalizationLexicon load(const std::filesystem::path& path);

  const std::vector<std::string>* find(std::string_view token) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

// Unigram list ordered by descending frequency. Word cost follows a Zipf
// model: cost(w) = log((rank + 1) * log(V)).
class UnigramFrequencyTable {
 public:
  UnigramFrequencyTable() = default;
  explicit UnigramFrequencyTable(std::vector<std::string> words_by_frequency);

  // One word per line, most frequent first.
  static UnigramFrequencyTable load(const std::filesystem::path& path);

  std::optional<std::size_t> rank(std::string_view word) const;
  // Cost of an in-vocabulary word; nullopt for unknown words.
  std::optional<double> cost(std::string_view word) const;
  std::size_t size() const { return words_.size(); }
  std::size_t max_word_length() const { return max_len_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> rank_;
  std::size_t max_len_ = 0;
  double log_vocab_ = 0.0;
};

// Cost charged for a single out-of-vocabulary character.
inline constexpr double kUnknownCharCost = 1.0e4;

// Cost of one segmentation piece: the table cost for known words,
// kUnknownCharCost for a single unknown character, +infinity otherwise.
double segment_piece_cost(std::string_view piece, const UnigramFrequencyTable& freq);

// Fixed-point (2^-32) representation used when summing piece costs.
std::int64_t quantize_cost(double cost);

// Minimum-cost split of a lowercase tag (without '#'). Ties go to fewer
// words, then the lexicographically smallest word sequence.
std::vector<std::string> segment_hashtag(std::string_view tag, const UnigramFrequencyTable& freq);

std::string case_fold(std::string_view text);

// Splits on whitespace and separates punctuation. In microblog mode '#tag'
// and '@user' stay whole and URLs are single tokens.
TokenSequence tokenize(std::string_view text, bool microblog);

std::vector<std::string> normalize_token(const std::string& token, const NormalizationLexicon& lex);

// Porter (1980) suffix stripper. Input is a lowercase word; non-alphabetic
// input is returned unchanged.
std::string porter_stem(std::string_view word);

// case-fold -> tokenize -> (microblog) placeholders, normalization, hashtag
// split -> (classical) stopword removal and stemming.
TokenSequence preprocess_text(std::string_view text, const PreprocessConfig& cfg,
                              const NormalizationLexicon& lex, const UnigramFrequencyTable& freq);
TokenSequence preprocess_post(const Post& post, const PreprocessConfig& cfg,
                              const NormalizationLexicon& lex, const UnigramFrequencyTable& freq);

std::set<std::string> load_stopwords(const std::filesystem::path& path);

inline constexpr std::string_view kUrlToken = "<url>";
inline constexpr std::string_view kUserToken = "<user>";

}  // namespace stance

#endif  // STANCE_PREPROCESS_H_
