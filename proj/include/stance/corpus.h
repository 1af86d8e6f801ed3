#ifndef STANCE_CORPUS_H_
#define STANCE_CORPUS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stance/labels.h"

namespace stance {

struct Post {
  std::string id;
  std::string topic;
  std::string text;
  StanceLabel gold = StanceLabel::kNone;

  friend bool operator==(const Post&, const Post&) = default;
};

struct TopicDataset {
  std::string topic;
  // Human-readable target/claim ("Atheism", "MMR vaccination can cause autism").
  std::string target;
  std::vector<Post> train;
  std::vector<Post> test;

  friend bool operator==(const TopicDataset&, const TopicDataset&) = default;
};

enum class Split { kTrain, kTest };

struct SplitSpec {
  double train_fraction = 0.70;
  std::uint64_t seed = 0;
  bool stratified = true;
};

struct ClassCounts {
  std::array<std::size_t, kNumLabels> by_label{};

  std::size_t operator[](StanceLabel l) const { return by_label[index_of(l)]; }
  std::size_t total() const { return by_label[0] + by_label[1] + by_label[2]; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct DatasetStats {
  ClassCounts train;
  ClassCounts test;
};

// Short topic code for a SemEval target string ("Hillary Clinton" -> "HC").
// Unknown targets are returned unchanged.
std::string topic_code(const std::string& target);
// Inverse of topic_code for the ten known topics; unknown codes unchanged.
std::string topic_description(const std::string& code);

// Tab-separated "ID\tTarget\tTweet\tStance" with a header row. Posts are
// grouped per topic code and placed into the requested split.
std::map<std::string, TopicDataset> load_semeval(const std::filesystem::path& path,
                                                 Split into = Split::kTrain);
std::map<std::string, TopicDataset> load_semeval_pair(
    const std::filesystem::path& train_path, const std::filesystem::path& test_path);

// Writes posts in the SemEval layout; the target column carries the topic
// description. Text containing tabs or newlines is rejected.
void write_semeval(const std::vector<Post>& posts, const std::filesystem::path& path);

struct MpchiFormat {
  char delimiter = ',';
  std::string text_column = "text";
  std::string label_column = "label";
  // Empty means ids are synthesized as "<topic>-<row>".
  std::string id_column;
  std::string topic;
};

std::vector<Post> load_mpchi_posts(const std::filesystem::path& path,
                                   const MpchiFormat& format);

// Loads an MPCHI topic and splits it, either with a split manifest (one
// "id<TAB>train|test" line per post) or with stratified_split.
TopicDataset load_mpchi(const std::filesystem::path& path, const MpchiFormat& format,
                        const SplitSpec& spec,
                        const std::optional<std::filesystem::path>& manifest = std::nullopt);

std::map<std::string, Split> read_split_manifest(const std::filesystem::path& path);
void write_split_manifest(const TopicDataset& ds, const std::filesystem::path& path);
std::pair<std::vector<Post>, std::vector<Post>> apply_split_manifest(
    const std::vector<Post>& posts, const std::map<std::string, Split>& manifest);

// Deterministic in spec.seed and independent of input order (posts are
// sorted by id first). Stratified splits allocate round(fraction * n) train
// posts across classes by largest remainder, so each class is within one
// instance of its exact proportional share.
std::pair<std::vector<Post>, std::vector<Post>> stratified_split(std::vector<Post> posts,
                                                                 const SplitSpec& spec);

ClassCounts count_labels(const std::vector<Post>& posts);
DatasetStats dataset_stats(const TopicDataset& ds);

// Throws ValidationError on empty/duplicate ids, blank text or overlapping
// train/test ids.
void validate(const TopicDataset& ds);

// Read-only view that counts how often each split is touched. Used to audit
// that tuning never reads the test split.
class TrackedDataset {
 public:
  explicit TrackedDataset(const TopicDataset& ds) : ds_(ds) {}

  const std::string& topic() const { return ds_.topic; }
  const std::string& target() const { return ds_.target; }
  const std::vector<Post>& train() const {
    ++train_reads_;
    return ds_.train;
  }
  const std::vector<Post>& test() const {
    ++test_reads_;
    return ds_.test;
  }
  std::size_t train_reads() const { return train_reads_; }
  std::size_t test_reads() const { return test_reads_; }

 private:
  const TopicDataset& ds_;
  mutable std::size_t train_reads_ = 0;
  mutable std::size_t test_reads_ = 0;
};

}  // namespace stance

#endif  // STANCE_CORPUS_H_
