#include <filesystem>
#include <set>

#include "doctest.h"
#include "stance/error.h"
#include "stance/evaluation.h"
#include "stance/pipeline.h"

using namespace stance;
namespace fs = std::filesystem;

namespace {

const fs::path kCli = fs::path(STANCE_FIXTURE_DIR) / "cli";

RunConfig fixture_config() {
  RunConfig c = RunConfig::load(kCli / "config.json");
  c.output_dir = fs::temp_directory_path() / "stance_pipeline_test";
  return c;
}

}  // namespace

TEST_CASE("k-fold indices partition the data") {
  const auto folds = kfold_indices(23, 5, 9);
  std::set<std::size_t> seen;
  for (const auto& f : folds) {
    CHECK((f.size() == 4 || f.size() == 5));
    seen.insert(f.begin(), f.end());
  }
  CHECK(seen.size() == 23);
  CHECK(kfold_indices(23, 5, 9) == folds);
  CHECK_THROWS_AS(kfold_indices(3, 5, 9), ValidationError);
  CHECK_THROWS_AS(kfold_indices(10, 1, 9), ConfigError);
}

TEST_CASE("datasets follow the topic filter") {
  RunConfig c = fixture_config();
  CHECK(load_datasets(c).size() == 2);
  c.topics = {"HC"};
  const auto ds = load_datasets(c);
  REQUIRE(ds.size() == 1);
  CHECK(ds.at("HC").train.size() == 30);
  CHECK(ds.at("HC").test.size() == 6);
  c.topics = {"CC"};
  CHECK_THROWS_AS(load_datasets(c), ConfigError);
  CHECK(format_stats(load_datasets(fixture_config())).find("AT\t10\t10\t10\t2\t2\t2") != std::string::npos);
}

TEST_CASE("tuning reads only the train split") {
  Session s(fixture_config());
  for (ModelId m : {ModelId::kSen, ModelId::kTwoStep}) {
    const TrackedDataset tracked(s.dataset("AT"));
    const auto report = tune_topic(s, tracked, m);
    CHECK(tracked.test_reads() == 0);
    CHECK(tracked.train_reads() > 0);
    CHECK(report["results"].size() == 2);
    CHECK(report["results"][0]["fold_scores"].size() == 3);
  }
}

TEST_CASE("in-memory training separates the fixture topics") {
  Session s(fixture_config());
  const TopicDataset& ds = s.dataset("AT");
  std::vector<StanceLabel> gold;
  for (const Post& p : ds.test) gold.push_back(p.gold);
  for (ModelId m : {ModelId::kSen, ModelId::kTwoStep}) {
    const auto pred = fit_predict(s, "AT", ds.target, m, s.config().resolve("AT", m), ds.train, ds.test);
    CHECK(macro_f1_favor_against(pred, gold).official == doctest::Approx(1.0));
  }
  Hyperparameters h = s.config().resolve("AT", ModelId::kCnn);
  const auto a = fit_predict(s, "AT", ds.target, ModelId::kCnn, h, ds.train, ds.test);
  const auto b = fit_predict(s, "AT", ds.target, ModelId::kCnn, h, ds.train, ds.test);
  CHECK(a == b);
  CHECK_THROWS_AS(fit_predict(s, "AT", ds.target, ModelId::kSen, h, {}, ds.test), ValidationError);
}

TEST_CASE("prediction without training artifacts fails cleanly") {
  RunConfig c = fixture_config();
  c.output_dir = fs::temp_directory_path() / "stance_pipeline_empty";
  fs::remove_all(c.output_dir);
  Session s(c);
  CHECK_THROWS_AS(predict_topic(s, "AT", ModelId::kSen), ValidationError);
  CHECK_THROWS_AS(predict_topic(s, "AT", ModelId::kTan), ValidationError);
}

TEST_CASE("trained artifacts reproduce in-memory predictions") {
  Session s(fixture_config());
  const TopicDataset& ds = s.dataset("HC");
  for (ModelId m : {ModelId::kSen, ModelId::kTwoStep, ModelId::kCnn}) {
    CAPTURE(model_name(m));
    const auto report = train_topic(s, "HC", m);
    CHECK(report["config_hash"] == s.config().hash_hex());
    const auto from_disk = predict_topic(s, "HC", m);
    CHECK(from_disk.size() == ds.test.size());
    CHECK(from_disk == fit_predict(s, "HC", ds.target, m, s.config().resolve("HC", m), ds.train, ds.test));
  }
  fs::remove_all(s.config().output_dir);
}
