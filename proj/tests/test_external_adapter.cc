#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "stance/error.h"
#include "stance/evaluation.h"
#include "stance/external_adapter.h"

using namespace stance;
namespace fs = std::filesystem;

namespace {

// HC test split sized like the official one: 45 Favor, 172 Against, 78 None.
TopicDataset hc_dataset() {
  TopicDataset ds;
  ds.topic = "HC";
  ds.target = "Hillary Clinton";
  const std::pair<StanceLabel, int> counts[] = {
      {StanceLabel::kFavor, 45}, {StanceLabel::kAgainst, 172}, {StanceLabel::kNone, 78}};
  int id = 0;
  for (const auto& [label, n] : counts) {
    for (int i = 0; i < n; ++i) {
      ds.test.push_back({"hc" + std::to_string(id++), "HC", "post", label});
    }
  }
  return ds;
}

fs::path write_file(const std::string& name, const std::string& body) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p;
}

std::string all_rows(const TopicDataset& ds, std::size_t skip = SIZE_MAX) {
  std::string body;
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    if (i == skip) continue;
    body += ds.test[i].id + "\t" + std::string(to_string(ds.test[i].gold)) + "\n";
  }
  return body;
}

}  // namespace

TEST_CASE("full HC coverage is accepted") {
  const TopicDataset ds = hc_dataset();
  REQUIRE(ds.test.size() == 295);
  const fs::path p = write_file("bert.tsv", "# model=BERT\n# provenance=fine-tuned elsewhere\n" + all_rows(ds));
  const ExternalPredictionSet set = import_predictions(p, ds);
  CHECK(set.model == "BERT");
  CHECK(set.topic == "HC");
  CHECK(set.provenance == "fine-tuned elsewhere");
  CHECK(set.labels.size() == 295);
  std::vector<StanceLabel> gold;
  for (const Post& post : ds.test) gold.push_back(post.gold);
  CHECK(set.in_test_order(ds) == gold);
  CHECK(macro_f1_favor_against(gold, set.in_test_order(ds)).official == doctest::Approx(1.0));
  fs::remove(p);
}

TEST_CASE("native prediction files import unchanged") {
  const TopicDataset ds = hc_dataset();
  std::vector<PredictionRow> rows;
  for (const Post& post : ds.test) rows.push_back({post.id, StanceLabel::kAgainst});
  const fs::path p = fs::temp_directory_path() / "cnn.tsv";
  write_predictions(p, rows, {"config_hash=abc seed=1"});
  const ExternalPredictionSet set = import_predictions(p, ds);
  CHECK(set.model == "cnn");
  CHECK(set.provenance.find("imported from") == 0);
  CHECK(set.in_test_order(ds) == std::vector<StanceLabel>(295, StanceLabel::kAgainst));
  fs::remove(p);
}

TEST_CASE("a missing id is named") {
  const TopicDataset ds = hc_dataset();
  const fs::path p = write_file("gap.tsv", all_rows(ds, 100));
  try {
    import_predictions(p, ds);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    CHECK(what.find("hc100") != std::string::npos);
    CHECK(what.find("missing 1") != std::string::npos);
  }
  fs::remove(p);
}

TEST_CASE("duplicates, unknown ids and bad labels are rejected") {
  const TopicDataset ds = hc_dataset();
  const fs::path dup = write_file("dup.tsv", all_rows(ds) + "hc3\tNONE\n");
  try {
    import_predictions(dup, ds);
    FAIL("expected an error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 296);
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
  }
  const fs::path extra = write_file("extra.tsv", "zz9\tFAVOR\n" + all_rows(ds));
  CHECK_THROWS_AS(import_predictions(extra, ds), ParseError);
  const fs::path bad = write_file("bad.tsv", "hc0\tMAYBE\n");
  CHECK_THROWS_AS(import_predictions(bad, ds), ParseError);
  const fs::path cols = write_file("cols.tsv", "hc0 FAVOR\n");
  CHECK_THROWS_AS(import_predictions(cols, ds), ParseError);
  CHECK_THROWS_AS(import_predictions("/nonexistent/preds.tsv", ds), Error);
  for (const auto& p : {dup, extra, bad, cols}) fs::remove(p);
}
