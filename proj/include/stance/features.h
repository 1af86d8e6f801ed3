#ifndef STANCE_FEATURES_H_
#define STANCE_FEATURES_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stance/preprocess.h"

namespace stance {

// Sparse vector; indices strictly increasing and below dim, no stored zeros.
struct FeatureVector {
  std::size_t dim = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  static FeatureVector from_map(const std::map<std::size_t, double>& values, std::size_t dim);

  double dot(std::span<const double> dense) const;
  double squared_norm() const;
  double value_at(std::size_t index) const;
  bool empty() const { return entries.empty(); }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Key -> dense column index. Once frozen, unseen keys are ignored.
class Vocabulary {
 public:
  // Returns the key's index, adding it unless frozen.
  std::optional<std::size_t> add(const std::string& key);
  std::optional<std::size_t> find(const std::string& key) const;
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> keys_;
  bool frozen_ = false;
};

enum class NgramLevel { kWord, kChar };

std::vector<std::string> unigram_keys(const TokenSequence& tokens);
// Word n-grams join tokens with a space; char n-grams run over the
// space-joined token string.
std::vector<std::string> ngram_keys(const TokenSequence& tokens, std::size_t n, NgramLevel level);

// Term-frequency counts of the keys found in vocab; unknown keys are skipped.
FeatureVector count_features(const std::vector<std::string>& keys, const Vocabulary& vocab);

FeatureVector bow_unigrams(const TokenSequence& tokens, const Vocabulary& vocab);
FeatureVector ngrams(const TokenSequence& tokens, std::size_t n, NgramLevel level,
                     const Vocabulary& vocab);

enum class CoarsePosTag { kNoun, kVerb, kAdjective, kAdverb, kOther };

std::optional<CoarsePosTag> parse_pos_tag(std::string_view s);

// Dictionary lookup, then a closed-class word list, then suffix rules
// (-ly adverb; -ous/-ful/-ive adjective; -ing/-ed verb), else Noun.
// Tokens without letters are Other.
class CoarsePosTagger {
 public:
  CoarsePosTagger() = default;
  explicit CoarsePosTagger(std::unordered_map<std::string, CoarsePosTag> dictionary)
      : dictionary_(std::move(dictionary)) {}

  // "word<TAB>tag" per line; tags noun/verb/adjective/adverb/other.
  static CoarsePosTagger load(const std::filesystem::path& path);

  CoarsePosTag tag(std::string_view word) const;

 private:
  std::unordered_map<std::string, CoarsePosTag> dictionary_;
};

std::vector<CoarsePosTag> coarse_pos_tag(const TokenSequence& tokens, const CoarsePosTagger& tagger);

// Keys of tokens tagged noun/verb/adjective/adverb.
std::vector<std::string> stance_keys(const TokenSequence& tokens,
                                     const std::vector<CoarsePosTag>& tags);
FeatureVector stance_vector(const TokenSequence& tokens, const std::vector<CoarsePosTag>& tags,
                            const Vocabulary& vocab);

enum class SentimentPolarity { kPositive, kNegative, kNeutral };
enum class SubjectivityStrength { kStrong, kWeak };
enum class LexiconPolarity { kPositive, kNegative, kNeutral };

struct SubjectivityEntry {
  SubjectivityStrength strength = SubjectivityStrength::kWeak;
  LexiconPolarity polarity = LexiconPolarity::kNeutral;
};

class SubjectivityLexicon {
 public:
  SubjectivityLexicon() = default;
  explicit SubjectivityLexicon(std::unordered_map<std::string, SubjectivityEntry> entries);

  // "word<TAB>strong|weak<TAB>positive|negative|neutral" per line.
  static SubjectivityLexicon load(const std::filesystem::path& path);

  const SubjectivityEntry* find(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, SubjectivityEntry> entries_;
};

SentimentPolarity sentence_sentiment(const TokenSequence& tokens, const SubjectivityLexicon& lex);
// One-hot over [Positive, Negative, Neutral].
FeatureVector sentiment_feature(const TokenSequence& tokens, const SubjectivityLexicon& lex);
// Counts over [strong-pos, strong-neg, weak-pos, weak-neg].
FeatureVector subjectivity_features(const TokenSequence& tokens, const SubjectivityLexicon& lex);

// Raw-text counts over [hashtags, mentions, url present, emoticons,
// question mark present, exclamation marks].
FeatureVector surface_features(std::string_view raw_text);
std::size_t count_emoticons(std::string_view raw_text);

enum class FeatureBlock {
  kBow,
  kStanceVector,
  kSentiment,
  kSubjectivity,
  kSurface,
  kWordNgrams,
  kCharNgrams,
  kTargetTerms,
};

std::optional<FeatureBlock> parse_feature_block(std::string_view name);
std::string_view feature_block_name(FeatureBlock b);

// Named presets: SEN = {stance_vector, sentiment, bow}; two-step stage 1 =
// {subjectivity, surface}; stage 2 = {subjectivity, word n-grams 1-3,
// char n-grams 2-4, target terms}.
std::vector<std::string> sen_feature_set();
std::vector<std::string> two_step_stage1_feature_set();
std::vector<std::string> two_step_stage2_feature_set();

struct FeatureResources {
  std::shared_ptr<const SubjectivityLexicon> lexicon;
  std::shared_ptr<const CoarsePosTagger> tagger;
  std::set<std::string> stopwords;
};

struct FeatureInput {
  const TokenSequence* tokens = nullptr;
  std::string_view raw_text;
};

struct BlockLayout {
  FeatureBlock block;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Concatenates the selected blocks at stable offsets. Vocabulary-backed
// blocks are built by fit() on training inputs and frozen afterwards.
class FeaturePipeline {
 public:
  FeaturePipeline(const std::vector<std::string>& block_names, FeatureResources resources,
                  std::string target = {});

  void fit(const std::vector<FeatureInput>& train);
  bool fitted() const { return fitted_; }

  FeatureVector transform(const FeatureInput& input) const;

  std::size_t dimension() const;
  std::vector<BlockLayout> layout() const;
  const std::vector<FeatureBlock>& blocks() const { return blocks_; }
  const std::vector<std::string>& target_terms() const { return target_terms_; }

  // Stable hash of block order, vocabularies and target terms.
  std::uint64_t hash() const;

 private:
  std::size_t block_size(FeatureBlock b) const;
  Vocabulary& vocab_for(FeatureBlock b);
  const Vocabulary& vocab_for(FeatureBlock b) const;
  std::vector<std::string> block_keys(FeatureBlock b, const FeatureInput& in) const;

  std::vector<FeatureBlock> blocks_;
  FeatureResources resources_;
  std::vector<std::string> target_terms_;
  Vocabulary bow_vocab_;
  Vocabulary stance_vocab_;
  Vocabulary word_ngram_vocab_;
  Vocabulary char_ngram_vocab_;
  bool fitted_ = false;
};

}  // namespace stance

#endif  // STANCE_FEATURES_H_
