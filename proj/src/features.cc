#include "stance/features.h"

#include <algorithm>
#include <cctype>
#include <set>

#include "stance/error.h"
#include "stance/text_util.h"

namespace stance {
namespace {

// Determiners, pronouns, prepositions, conjunctions, auxiliaries, particles.
const std::set<std::string, std::less<>>& closed_class_words() {
  static const std::set<std::string, std::less<>> kWords = {
      "a", "about", "above", "after", "against", "all", "am", "among", "an", "and", "any",
      "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
      "both", "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during",
      "each", "either", "every", "few", "for", "from", "had", "has", "have", "having", "he",
      "her", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into",
      "is", "it", "its", "itself", "may", "me", "might", "mine", "must", "my", "myself",
      "neither", "nor", "of", "off", "on", "onto", "or", "our", "ours", "ourselves", "out",
      "over", "shall", "she", "should", "since", "so", "some", "such", "than", "that",
      "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they",
      "this", "those", "through", "to", "toward", "towards", "under", "until", "up", "upon",
      "us", "via", "was", "we", "were", "what", "when", "where", "whether", "which", "while",
      "who", "whom", "whose", "why", "will", "with", "within", "without", "would", "yet",
      "you", "your", "yours", "yourself", "yourselves", "'s", "n't", "not", "no",
  };
  return kWords;
}

bool has_letter(std::string_view w) {
  return std::any_of(w.begin(), w.end(), [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
  });
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::size_t count_sigils(std::string_view text, char sigil) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    if (text[i] != sigil || !is_word_char(text[i + 1])) continue;
    if (i > 0 && is_word_char(text[i - 1])) continue;
    ++n;
  }
  return n;
}

bool looks_like_url(std::string_view chunk) {
  return chunk.find("http://") != std::string_view::npos ||
         chunk.find("https://") != std::string_view::npos || chunk.starts_with("www.");
}

}  // namespace

FeatureVector FeatureVector::from_map(const std::map<std::size_t, double>& values,
                                      std::size_t dim) {
  FeatureVector v;
  v.dim = dim;
  for (const auto& [index, value] : values) {
    if (index >= dim) throw ShapeError("feature index out of range");
    if (value != 0.0) v.entries.emplace_back(static_cast<std::uint32_t>(index), value);
  }
  return v;
}

double FeatureVector::dot(std::span<const double> dense) const {
  if (dense.size() != dim) {
    throw ShapeError("dot: dimension " + std::to_string(dim) + " vs " +
                     std::to_string(dense.size()));
  }
  double s = 0.0;
  for (const auto& [i, v] : entries) s += v * dense[i];
  return s;
}

double FeatureVector::squared_norm() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.second * e.second;
  return s;
}

double FeatureVector::value_at(std::size_t index) const {
  const auto it = std::lower_bound(entries.begin(), entries.end(), index,
                                   [](const auto& e, std::size_t i) { return e.first < i; });
  return it != entries.end() && it->first == index ? it->second : 0.0;
}

std::optional<std::size_t> Vocabulary::add(const std::string& key) {
  if (const auto it = index_.find(key); it != index_.end()) return it->second;
  if (frozen_) return std::nullopt;
  const std::size_t index = keys_.size();
  index_.emplace(key, index);
  keys_.push_back(key);
  return index;
}

std::optional<std::size_t> Vocabulary::find(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> unigram_keys(const TokenSequence& tokens) { return words(tokens); }

std::vector<std::string> ngram_keys(const TokenSequence& tokens, std::size_t n, NgramLevel level) {
  if (n < 1) throw ConfigError("n-gram order must be at least 1");
  std::vector<std::string> keys;
  if (level == NgramLevel::kWord) {
    if (tokens.size() < n) return keys;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string key = tokens[i].text;
      for (std::size_t j = 1; j < n; ++j) key += " " + tokens[i + j].text;
      keys.push_back(std::move(key));
    }
    return keys;
  }
  std::string joined;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) joined += ' ';
    joined += tokens[i].text;
  }
  if (joined.size() < n) return keys;
  for (std::size_t i = 0; i + n <= joined.size(); ++i) keys.push_back(joined.substr(i, n));
  return keys;
}

FeatureVector count_features(const std::vector<std::string>& keys, const Vocabulary& vocab) {
  std::map<std::size_t, double> counts;
  for (const std::string& k : keys) {
    if (const auto i = vocab.find(k)) counts[*i] += 1.0;
  }
  return FeatureVector::from_map(counts, vocab.size());
}

FeatureVector bow_unigrams(const TokenSequence& tokens, const Vocabulary& vocab) {
  return count_features(unigram_keys(tokens), vocab);
}

FeatureVector ngrams(const TokenSequence& tokens, std::size_t n, NgramLevel level,
                     const Vocabulary& vocab) {
  return count_features(ngram_keys(tokens, n, level), vocab);
}

std::optional<CoarsePosTag> parse_pos_tag(std::string_view s) {
  const std::string t = to_lower_ascii(trim(s));
  if (t == "noun" || t == "n") return CoarsePosTag::kNoun;
  if (t == "verb" || t == "v") return CoarsePosTag::kVerb;
  if (t == "adjective" || t == "adj") return CoarsePosTag::kAdjective;
  if (t == "adverb" || t == "adv") return CoarsePosTag::kAdverb;
  if (t == "other") return CoarsePosTag::kOther;
  return std::nullopt;
}

CoarsePosTagger CoarsePosTagger::load(const std::filesystem::path& path) {
  std::unordered_map<std::string, CoarsePosTag> dict;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto cols = split(lines[i], '\t');
    const auto tag = cols.size() == 2 ? parse_pos_tag(cols[1]) : std::nullopt;
    if (!tag) throw ParseError(path.string(), i + 1, "expected 'word<TAB>tag'");
    dict[to_lower_ascii(trim(cols[0]))] = *tag;
  }
  return CoarsePosTagger(std::move(dict));
}

CoarsePosTag CoarsePosTagger::tag(std::string_view word) const {
  if (const auto it = dictionary_.find(std::string(word)); it != dictionary_.end()) {
    return it->second;
  }
  if (closed_class_words().count(word)) return CoarsePosTag::kOther;
  if (!has_letter(word) || word.front() == '<') return CoarsePosTag::kOther;
  if (word.ends_with("ly")) return CoarsePosTag::kAdverb;
  if (word.ends_with("ous") || word.ends_with("ful") || word.ends_with("ive")) {
    return CoarsePosTag::kAdjective;
  }
  if (word.ends_with("ing") || word.ends_with("ed")) return CoarsePosTag::kVerb;
  return CoarsePosTag::kNoun;
}

std::vector<CoarsePosTag> coarse_pos_tag(const TokenSequence& tokens,
                                         const CoarsePosTagger& tagger) {
  std::vector<CoarsePosTag> tags;
  tags.reserve(tokens.size());
  for (const Token& t : tokens) tags.push_back(tagger.tag(surface_form(t)));
  return tags;
}

std::vector<std::string> stance_keys(const TokenSequence& tokens,
                                     const std::vector<CoarsePosTag>& tags) {
  if (tokens.size() != tags.size()) {
    throw ValidationError("stance_vector: " + std::to_string(tokens.size()) + " tokens but " +
                          std::to_string(tags.size()) + " tags");
  }
  TokenSequence kept;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tags[i] != CoarsePosTag::kOther) kept.push_back(tokens[i]);
  }
  return unigram_keys(kept);
}

FeatureVector stance_vector(const TokenSequence& tokens, const std::vector<CoarsePosTag>& tags,
                            const Vocabulary& vocab) {
  return count_features(stance_keys(tokens, tags), vocab);
}

SubjectivityLexicon::SubjectivityLexicon(std::unordered_map<std::string, SubjectivityEntry> entries) {
  for (auto& [word, entry] : entries) entries_.emplace(to_lower_ascii(word), entry);
}

SubjectivityLexicon SubjectivityLexicon::load(const std::filesystem::path& path) {
  std::unordered_map<std::string, SubjectivityEntry> entries;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto cols = split(lines[i], '\t');
    if (cols.size() != 3) {
      throw ParseError(path.string(), i + 1, "expected 'word<TAB>strength<TAB>polarity'");
    }
    SubjectivityEntry e;
    const std::string strength = to_lower_ascii(trim(cols[1]));
    if (strength == "strong" || strength == "strongsubj") {
      e.strength = SubjectivityStrength::kStrong;
    } else if (strength == "weak" || strength == "weaksubj") {
      e.strength = SubjectivityStrength::kWeak;
    } else {
      throw ParseError(path.string(), i + 1, "unknown strength '" + cols[1] + "'");
    }
    const std::string polarity = to_lower_ascii(trim(cols[2]));
    if (polarity == "positive" || polarity == "pos") {
      e.polarity = LexiconPolarity::kPositive;
    } else if (polarity == "negative" || polarity == "neg") {
      e.polarity = LexiconPolarity::kNegative;
    } else if (polarity == "neutral" || polarity == "both") {
      e.polarity = LexiconPolarity::kNeutral;
    } else {
      throw ParseError(path.string(), i + 1, "unknown polarity '" + cols[2] + "'");
    }
    entries[to_lower_ascii(trim(cols[0]))] = e;
  }
  return SubjectivityLexicon(std::move(entries));
}

const SubjectivityEntry* SubjectivityLexicon::find(std::string_view word) const {
  const auto it = entries_.find(std::string(word));
  return it == entries_.end() ? nullptr : &it->second;
}

SentimentPolarity sentence_sentiment(const TokenSequence& tokens, const SubjectivityLexicon& lex) {
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (const Token& t : tokens) {
    const SubjectivityEntry* e = lex.find(surface_form(t));
    if (!e) continue;
    if (e->polarity == LexiconPolarity::kPositive) ++pos;
    if (e->polarity == LexiconPolarity::kNegative) ++neg;
  }
  if (pos > neg) return SentimentPolarity::kPositive;
  if (neg > pos) return SentimentPolarity::kNegative;
  return SentimentPolarity::kNeutral;
}

FeatureVector sentiment_feature(const TokenSequence& tokens, const SubjectivityLexicon& lex) {
  const auto s = sentence_sentiment(tokens, lex);
  return FeatureVector::from_map({{static_cast<std::size_t>(s), 1.0}}, 3);
}

FeatureVector subjectivity_features(const TokenSequence& tokens, const SubjectivityLexicon& lex) {
  std::map<std::size_t, double> counts;
  for (const Token& t : tokens) {
    const SubjectivityEntry* e = lex.find(surface_form(t));
    if (!e || e->polarity == LexiconPolarity::kNeutral) continue;
    const std::size_t base = e->strength == SubjectivityStrength::kStrong ? 0 : 2;
    counts[base + (e->polarity == LexiconPolarity::kPositive ? 0 : 1)] += 1.0;
  }
  return FeatureVector::from_map(counts, 4);
}

std::size_t count_emoticons(std::string_view raw_text) {
  static const std::vector<std::string_view> kEmoticons = [] {
    std::vector<std::string_view> v = {
        ":-)", ":)", ":-(", ":(", ":-D", ":D", ";-)", ";)", ":-P", ":P", ":p", ":'(",
        ":-/", ":/", "<3", ":o", ":O", "xD", "XD", ":|", "=)", "=(", ":]", ":[", "^_^", "-_-",
    };
    std::stable_sort(v.begin(), v.end(),
                     [](std::string_view a, std::string_view b) { return a.size() > b.size(); });
    return v;
  }();
  std::size_t n = 0;
  for (const std::string& chunk : split_whitespace(raw_text)) {
    if (looks_like_url(chunk)) continue;
    std::size_t i = 0;
    while (i < chunk.size()) {
      std::size_t matched = 0;
      for (std::string_view e : kEmoticons) {
        if (std::string_view(chunk).substr(i).starts_with(e)) {
          matched = e.size();
          break;
        }
      }
      if (matched) {
        ++n;
        i += matched;
      } else {
        ++i;
      }
    }
  }
  return n;
}

FeatureVector surface_features(std::string_view raw_text) {
  std::map<std::size_t, double> v;
  v[0] = static_cast<double>(count_sigils(raw_text, '#'));
  v[1] = static_cast<double>(count_sigils(raw_text, '@'));
  bool url = false;
  for (const std::string& chunk : split_whitespace(raw_text)) url = url || looks_like_url(chunk);
  v[2] = url ? 1.0 : 0.0;
  v[3] = static_cast<double>(count_emoticons(raw_text));
  v[4] = raw_text.find('?') != std::string_view::npos ? 1.0 : 0.0;
  v[5] = static_cast<double>(std::count(raw_text.begin(), raw_text.end(), '!'));
  return FeatureVector::from_map(v, 6);
}

std::optional<FeatureBlock> parse_feature_block(std::string_view name) {
  for (FeatureBlock b : {FeatureBlock::kBow, FeatureBlock::kStanceVector, FeatureBlock::kSentiment,
                         FeatureBlock::kSubjectivity, FeatureBlock::kSurface,
                         FeatureBlock::kWordNgrams, FeatureBlock::kCharNgrams,
                         FeatureBlock::kTargetTerms}) {
    if (feature_block_name(b) == name) return b;
  }
  return std::nullopt;
}

std::string_view feature_block_name(FeatureBlock b) {
  switch (b) {
    case FeatureBlock::kBow:
      return "bow";
    case FeatureBlock::kStanceVector:
      return "stance_vector";
    case FeatureBlock::kSentiment:
      return "sentiment";
    case FeatureBlock::kSubjectivity:
      return "subjectivity";
    case FeatureBlock::kSurface:
      return "surface";
    case FeatureBlock::kWordNgrams:
      return "word_ngrams";
    case FeatureBlock::kCharNgrams:
      return "char_ngrams";
    case FeatureBlock::kTargetTerms:
      return "target_terms";
  }
  return "";
}

std::vector<std::string> sen_feature_set() { return {"stance_vector", "sentiment", "bow"}; }
std::vector<std::string> two_step_stage1_feature_set() { return {"subjectivity", "surface"}; }
std::vector<std::string> two_step_stage2_feature_set() {
  return {"subjectivity", "word_ngrams", "char_ngrams", "target_terms"};
}

FeaturePipeline::FeaturePipeline(const std::vector<std::string>& block_names,
                                 FeatureResources resources, std::string target)
    : resources_(std::move(resources)) {
  if (block_names.empty()) throw ConfigError("feature configuration selects no blocks");
  for (const std::string& name : block_names) {
    const auto b = parse_feature_block(name);
    if (!b) throw ConfigError("unknown feature block '" + name + "'");
    if (std::find(blocks_.begin(), blocks_.end(), *b) != blocks_.end()) {
      throw ConfigError("feature block '" + name + "' listed twice");
    }
    blocks_.push_back(*b);
  }
  for (FeatureBlock b : blocks_) {
    const bool needs_lexicon = b == FeatureBlock::kSentiment || b == FeatureBlock::kSubjectivity;
    if (needs_lexicon && !resources_.lexicon) {
      throw ConfigError("feature block '" + std::string(feature_block_name(b)) +
                        "' needs a subjectivity lexicon");
    }
    if (b == FeatureBlock::kStanceVector && !resources_.tagger) {
      throw ConfigError("feature block 'stance_vector' needs a POS tagger");
    }
  }
  // Content words of the target, compared in stemmed form.
  for (const Token& t : tokenize(case_fold(target), false)) {
    if (!has_letter(t.text) || closed_class_words().count(t.text) ||
        resources_.stopwords.count(t.text)) {
      continue;
    }
    const std::string stem = porter_stem(t.text);
    if (std::find(target_terms_.begin(), target_terms_.end(), stem) == target_terms_.end()) {
      target_terms_.push_back(stem);
    }
  }
}

Vocabulary& FeaturePipeline::vocab_for(FeatureBlock b) {
  return const_cast<Vocabulary&>(std::as_const(*this).vocab_for(b));
}

const Vocabulary& FeaturePipeline::vocab_for(FeatureBlock b) const {
  switch (b) {
    case FeatureBlock::kBow:
      return bow_vocab_;
    case FeatureBlock::kStanceVector:
      return stance_vocab_;
    case FeatureBlock::kWordNgrams:
      return word_ngram_vocab_;
    case FeatureBlock::kCharNgrams:
      return char_ngram_vocab_;
    default:
      throw Error("feature block has no vocabulary");
  }
}

std::vector<std::string> FeaturePipeline::block_keys(FeatureBlock b, const FeatureInput& in) const {
  const TokenSequence& tokens = *in.tokens;
  std::vector<std::string> keys;
  switch (b) {
    case FeatureBlock::kBow:
      return unigram_keys(tokens);
    case FeatureBlock::kStanceVector:
      return stance_keys(tokens, coarse_pos_tag(tokens, *resources_.tagger));
    case FeatureBlock::kWordNgrams:
      for (std::size_t n = 1; n <= 3; ++n) {
        for (std::string& k : ngram_keys(tokens, n, NgramLevel::kWord)) keys.push_back(std::move(k));
      }
      return keys;
    case FeatureBlock::kCharNgrams:
      for (std::size_t n = 2; n <= 4; ++n) {
        for (std::string& k : ngram_keys(tokens, n, NgramLevel::kChar)) keys.push_back(std::move(k));
      }
      return keys;
    default:
      return keys;
  }
}

void FeaturePipeline::fit(const std::vector<FeatureInput>& train) {
  if (fitted_) throw Error("feature pipeline already fitted");
  for (FeatureBlock b : blocks_) {
    const bool has_vocab = b == FeatureBlock::kBow || b == FeatureBlock::kStanceVector ||
                           b == FeatureBlock::kWordNgrams || b == FeatureBlock::kCharNgrams;
    if (!has_vocab) continue;
    Vocabulary& vocab = vocab_for(b);
    for (const FeatureInput& in : train) {
      for (const std::string& k : block_keys(b, in)) vocab.add(k);
    }
    vocab.freeze();
  }
  fitted_ = true;
}

std::size_t FeaturePipeline::block_size(FeatureBlock b) const {
  switch (b) {
    case FeatureBlock::kSentiment:
      return 3;
    case FeatureBlock::kSubjectivity:
      return 4;
    case FeatureBlock::kSurface:
      return 6;
    case FeatureBlock::kTargetTerms:
      return target_terms_.size();
    default:
      return vocab_for(b).size();
  }
}

std::size_t FeaturePipeline::dimension() const {
  std::size_t d = 0;
  for (FeatureBlock b : blocks_) d += block_size(b);
  return d;
}

std::vector<BlockLayout> FeaturePipeline::layout() const {
  std::vector<BlockLayout> out;
  std::size_t offset = 0;
  for (FeatureBlock b : blocks_) {
    out.push_back({b, offset, block_size(b)});
    offset += block_size(b);
  }
  return out;
}

FeatureVector FeaturePipeline::transform(const FeatureInput& input) const {
  if (!fitted_) throw Error("feature pipeline used before fit()");
  if (!input.tokens) throw Error("feature input without tokens");
  const TokenSequence& tokens = *input.tokens;

  FeatureVector out;
  out.dim = dimension();
  std::size_t offset = 0;
  for (FeatureBlock b : blocks_) {
    FeatureVector part;
    switch (b) {
      case FeatureBlock::kSentiment:
        part = sentiment_feature(tokens, *resources_.lexicon);
        break;
      case FeatureBlock::kSubjectivity:
        part = subjectivity_features(tokens, *resources_.lexicon);
        break;
      case FeatureBlock::kSurface:
        part = surface_features(input.raw_text);
        break;
      case FeatureBlock::kTargetTerms: {
        std::map<std::size_t, double> present;
        for (const Token& t : tokens) {
          const std::string stem = porter_stem(surface_form(t));
          for (std::size_t i = 0; i < target_terms_.size(); ++i) {
            if (target_terms_[i] == stem) present[i] = 1.0;
          }
        }
        part = FeatureVector::from_map(present, target_terms_.size());
        break;
      }
      default:
        part = count_features(block_keys(b, input), vocab_for(b));
        break;
    }
    for (const auto& [i, v] : part.entries) {
      out.entries.emplace_back(static_cast<std::uint32_t>(offset + i), v);
    }
    offset += block_size(b);
  }
  return out;
}

std::uint64_t FeaturePipeline::hash() const {
  std::string canon;
  for (FeatureBlock b : blocks_) {
    canon += "block:";
    canon += feature_block_name(b);
    canon += '\n';
    if (b == FeatureBlock::kBow || b == FeatureBlock::kStanceVector ||
        b == FeatureBlock::kWordNgrams || b == FeatureBlock::kCharNgrams) {
      for (const std::string& k : vocab_for(b).keys()) {
        canon += k;
        canon += '\x1f';
      }
      canon += '\n';
    }
  }
  for (const std::string& t : target_terms_) canon += "target:" + t + "\n";
  return fnv1a64(canon);
}

}  // namespace stance
