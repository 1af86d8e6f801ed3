#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "stance/corpus.h"
#include "stance/error.h"

using namespace stance;
namespace fs = std::filesystem;

namespace {

fs::path fixture(const char* name) { return fs::path(STANCE_FIXTURE_DIR) / name; }

std::vector<Post> synthetic_posts(std::size_t favor, std::size_t against, std::size_t none) {
  std::vector<Post> posts;
  std::size_t next = 0;
  auto add = [&](std::size_t n, StanceLabel l) {
    for (std::size_t i = 0; i < n; ++i, ++next) {
      posts.push_back({"p" + std::to_string(1000 + next), "T", "text " + std::to_string(next), l});
    }
  };
  add(favor, StanceLabel::kFavor);
  add(against, StanceLabel::kAgainst);
  add(none, StanceLabel::kNone);
  return posts;
}

}  // namespace

TEST_CASE("labels parse after trimming and case-folding") {
  CHECK(parse_label("AGAINST ") == StanceLabel::kAgainst);
  CHECK(parse_label(" favor") == StanceLabel::kFavor);
  CHECK(parse_label("None") == StanceLabel::kNone);
  CHECK_THROWS_AS(parse_label("neutral"), ValidationError);
  CHECK(to_string(StanceLabel::kAgainst) == "AGAINST");
}

TEST_CASE("load_semeval groups by topic and trims labels") {
  const auto topics = load_semeval(fixture("semeval_small.tsv"));
  REQUIRE(topics.size() == 2);
  const TopicDataset& at = topics.at("AT");
  REQUIRE(at.train.size() == 2);
  CHECK(at.train[0].gold == StanceLabel::kAgainst);
  CHECK(at.train[0].text == "God is great #SemST");
  CHECK(at.target == "Atheism");
  CHECK(topics.at("HC").train[0].gold == StanceLabel::kNone);
  CHECK(at.test.empty());
}

TEST_CASE("load_semeval header-only file has zero posts") {
  CHECK(load_semeval(fixture("semeval_header_only.tsv")).empty());
}

TEST_CASE("load_semeval errors") {
  try {
    load_semeval(fixture("semeval_bad_columns.tsv"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(load_semeval(fixture("semeval_bad_label.tsv")), ValidationError);
  CHECK_THROWS_AS(load_semeval(fixture("does_not_exist.tsv")), ValidationError);
}

TEST_CASE("load_mpchi single row lands in train") {
  MpchiFormat fmt;
  fmt.topic = "MMR";
  const TopicDataset ds = load_mpchi(fixture("mpchi_single.csv"), fmt, SplitSpec{0.7, 1, true});
  REQUIRE(ds.train.size() == 1);
  CHECK(ds.test.empty());
  CHECK(ds.train[0].text == "MMR vaccines are safe, studies show");
  CHECK(ds.target == "MMR vaccination can cause autism");
}

TEST_CASE("load_mpchi ten rows at 0.7 gives 7 train and 3 test") {
  MpchiFormat fmt;
  fmt.topic = "MMR";
  const TopicDataset ds = load_mpchi(fixture("mpchi_ten.csv"), fmt, SplitSpec{0.7, 3, true});
  CHECK(ds.train.size() == 7);
  CHECK(ds.test.size() == 3);
  const auto posts = load_mpchi_posts(fixture("mpchi_ten.csv"), fmt);
  CHECK(posts[7].text == "Some doctors still question the schedule, \"quietly\".");
}

TEST_CASE("load_mpchi honours a split manifest") {
  MpchiFormat fmt;
  fmt.topic = "MMR";
  const fs::path manifest = fs::temp_directory_path() / "stance_manifest_test.txt";
  {
    TopicDataset ds;
    ds.topic = "MMR";
    const auto posts = load_mpchi_posts(fixture("mpchi_ten.csv"), fmt);
    ds.train.assign(posts.begin(), posts.begin() + 4);
    ds.test.assign(posts.begin() + 4, posts.end());
    write_split_manifest(ds, manifest);
  }
  const TopicDataset ds = load_mpchi(fixture("mpchi_ten.csv"), fmt, SplitSpec{}, manifest);
  CHECK(ds.train.size() == 4);
  CHECK(ds.test.size() == 6);
  CHECK(ds.train[0].id == "MMR-1");
}

TEST_CASE("stratified_split 50/30/20 at 0.8 keeps 40/24/16") {
  const auto [train, test] = stratified_split(synthetic_posts(50, 30, 20), SplitSpec{0.8, 7, true});
  CHECK(train.size() == 80);
  const ClassCounts c = count_labels(train);
  CHECK(c[StanceLabel::kFavor] == 40);
  CHECK(c[StanceLabel::kAgainst] == 24);
  CHECK(c[StanceLabel::kNone] == 16);
  CHECK(test.size() == 20);
}

TEST_CASE("stratified_split preconditions") {
  CHECK_THROWS_AS(stratified_split(synthetic_posts(5, 5, 5), SplitSpec{1.0, 1, true}),
                  ValidationError);
  CHECK_THROWS_AS(stratified_split(synthetic_posts(5, 5, 5), SplitSpec{0.0, 1, true}),
                  ValidationError);
  CHECK_THROWS_AS(stratified_split({}, SplitSpec{0.5, 1, true}), ValidationError);
}

TEST_CASE("stratified_split is deterministic, order invariant and within one per class") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<std::size_t> n(0, 40);
    auto posts = synthetic_posts(n(rng) + 1, n(rng), n(rng));
    const double fraction = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    const SplitSpec spec{fraction, rng(), true};

    const auto a = stratified_split(posts, spec);
    std::shuffle(posts.begin(), posts.end(), rng);
    const auto b = stratified_split(posts, spec);
    CHECK(a == b);

    const ClassCounts all = count_labels(posts);
    const ClassCounts tr = count_labels(a.first);
    for (StanceLabel l : kAllLabels) {
      const double exact = fraction * static_cast<double>(all[l]);
      CHECK(std::abs(static_cast<double>(tr[l]) - exact) <= 1.0);
    }
    CHECK(a.first.size() + a.second.size() == posts.size());
    std::set<std::string> train_ids;
    for (const Post& p : a.first) train_ids.insert(p.id);
    for (const Post& p : a.second) CHECK(train_ids.count(p.id) == 0);
  }
}

TEST_CASE("non-stratified split respects the fraction") {
  const auto [train, test] = stratified_split(synthetic_posts(10, 10, 10), SplitSpec{0.5, 2, false});
  CHECK(train.size() == 15);
  CHECK(test.size() == 15);
}

TEST_CASE("dataset_stats") {
  CHECK(dataset_stats(TopicDataset{}).train.total() == 0);
  CHECK(dataset_stats(TopicDataset{}).test.total() == 0);
  TopicDataset ds;
  ds.train = synthetic_posts(3, 2, 1);
  const DatasetStats s = dataset_stats(ds);
  CHECK(s.train[StanceLabel::kFavor] == 3);
  CHECK(s.train.total() == ds.train.size());
}

TEST_CASE("semeval write/load round trip") {
  std::mt19937_64 rng(5);
  const char* vocab[] = {"god", "is", "love", "#SemST", "no", "faith", "@user", "!"};
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Post> posts;
    const std::size_t n = 1 + rng() % 20;
    for (std::size_t i = 0; i < n; ++i) {
      std::string text;
      for (std::size_t w = 0; w < 1 + rng() % 8; ++w) {
        if (!text.empty()) text += ' ';
        text += vocab[rng() % 8];
      }
      posts.push_back({std::to_string(100 + i), "FM", text, kAllLabels[rng() % 3]});
    }
    const fs::path path = fs::temp_directory_path() / "stance_roundtrip.tsv";
    write_semeval(posts, path);
    const auto loaded = load_semeval(path);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded.at("FM").train == posts);
  }
  CHECK_THROWS_AS(write_semeval({{"1", "FM", "tab\there", StanceLabel::kNone}},
                                fs::temp_directory_path() / "stance_bad.tsv"),
                  ValidationError);
}

TEST_CASE("validate rejects overlapping and duplicate ids") {
  TopicDataset ds;
  ds.topic = "AT";
  ds.train = {{"1", "AT", "a", StanceLabel::kFavor}};
  ds.test = {{"1", "AT", "b", StanceLabel::kFavor}};
  CHECK_THROWS_AS(validate(ds), ValidationError);
  ds.test = {{"2", "AT", "  ", StanceLabel::kFavor}};
  CHECK_THROWS_AS(validate(ds), ValidationError);
}

TEST_CASE("topic codes") {
  CHECK(topic_code("Climate Change is a Real Concern") == "CC");
  CHECK(topic_code("Legalization of Abortion") == "LA");
  CHECK(topic_code("Something else") == "Something else");
  CHECK(topic_description("HRT") == "Women should take HRT post menopause");
}
