#include <filesystem>
#include <fstream>
#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "stance/error.h"
#include "stance/evaluation.h"

using namespace stance;
namespace fs = std::filesystem;

namespace {

constexpr StanceLabel F = StanceLabel::kFavor;
constexpr StanceLabel A = StanceLabel::kAgainst;
constexpr StanceLabel N = StanceLabel::kNone;

// Direct TP/FP/FN count per class.
double oracle_official(const std::vector<StanceLabel>& pred, const std::vector<StanceLabel>& gold) {
  double total = 0.0;
  for (StanceLabel c : {F, A}) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (pred[i] == c && gold[i] == c) ++tp;
      if (pred[i] == c && gold[i] != c) ++fp;
      if (pred[i] != c && gold[i] == c) ++fn;
    }
    total += tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
  }
  return total / 2.0;
}

std::vector<StanceLabel> random_labels(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> u(0, 2);
  std::vector<StanceLabel> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(kAllLabels[u(rng)]);
  return out;
}

Post post(const std::string& topic, const std::string& id, StanceLabel gold) {
  return Post{id, topic, "text " + id, gold};
}

}  // namespace

TEST_CASE("worked example gives 0.65") {
  const MetricReport r = macro_f1_favor_against({F, A, A, A, N, F}, {F, F, A, A, N, N});
  CHECK(r.per_class[0].precision == doctest::Approx(0.5));
  CHECK(r.per_class[0].recall == doctest::Approx(0.5));
  CHECK(r.per_class[0].f1 == doctest::Approx(0.5));
  CHECK(r.per_class[1].precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class[1].recall == doctest::Approx(1.0));
  CHECK(r.per_class[1].f1 == doctest::Approx(0.8));
  CHECK(r.official == doctest::Approx(0.65).epsilon(1e-15));
  CHECK(r.count == 6);
  CHECK(r.confusion.counts[0][1] == 1);
  CHECK(r.confusion.counts[2][0] == 1);
}

TEST_CASE("perfect and all-None predictions") {
  const std::vector<StanceLabel> gold{F, A, N, A, F};
  CHECK(macro_f1_favor_against(gold, gold).official == 1.0);
  const MetricReport none = macro_f1_favor_against({N, N, N, N, N}, gold);
  CHECK(none.official == 0.0);
  CHECK(none.per_class[0].precision == 0.0);
  CHECK_THROWS_AS(macro_f1_favor_against({F}, {F, A}), ValidationError);
  CHECK_THROWS_AS(macro_f1_favor_against({}, {}), ValidationError);
}

TEST_CASE("metric equals the counting oracle on random cases") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> len(1, 50);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = len(rng);
    const auto gold = random_labels(rng, n);
    const auto pred = random_labels(rng, n);
    const MetricReport r = macro_f1_favor_against(pred, gold);
    CHECK(r.official == oracle_official(pred, gold));
    CHECK(r.official >= 0.0);
    CHECK(r.official <= 1.0);
    CHECK(r.confusion.total() == n);

    // Permuting pairs leaves the metric unchanged.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<StanceLabel> pg, pp;
    for (std::size_t i : order) {
      pg.push_back(gold[i]);
      pp.push_back(pred[i]);
    }
    CHECK(macro_f1_favor_against(pp, pg).official == r.official);
  }
}

TEST_CASE("adding None-None cells never changes the metric") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto gold = random_labels(rng, 20);
    auto pred = random_labels(rng, 20);
    const double before = macro_f1_favor_against(pred, gold).official;
    gold.push_back(N);
    pred.push_back(N);
    CHECK(macro_f1_favor_against(pred, gold).official == before);
  }
}

TEST_CASE("pooled total") {
  const TopicPredictions t1{"AT", {F, A, A, A, N, F}, {F, F, A, A, N, N}};
  SUBCASE("single topic equals its own report") {
    const MetricReport a = pooled_overall({t1});
    const MetricReport b = macro_f1_favor_against(t1.pred, t1.gold);
    CHECK(a.official == b.official);
    CHECK(a.confusion == b.confusion);
  }
  SUBCASE("hand-pooled confusion matrix") {
    const TopicPredictions t2{"CC", {F, F, N, A}, {F, N, A, A}};
    const MetricReport pooled = pooled_overall({t1, t2});
    // Favor: tp 1+1, fp 1+1, fn 1+0. Against: tp 2+1, fp 1+0, fn 0+1.
    CHECK(pooled.per_class[0].tp == 2);
    CHECK(pooled.per_class[0].fp == 2);
    CHECK(pooled.per_class[0].fn == 1);
    CHECK(pooled.per_class[1].tp == 3);
    CHECK(pooled.per_class[1].fp == 1);
    CHECK(pooled.per_class[1].fn == 1);
    const double f1f = 4.0 / 7.0;
    const double f1a = 6.0 / 8.0;
    CHECK(pooled.official == doctest::Approx((f1f + f1a) / 2.0).epsilon(1e-15));
  }
  SUBCASE("two topics with identical reports") {
    const MetricReport pooled = pooled_overall({t1, t1});
    CHECK(pooled.official == doctest::Approx(0.65));
    CHECK(pooled.count == 12);
  }
  CHECK_THROWS_AS(pooled_overall({}), ValidationError);
}

TEST_CASE("posts every model missed") {
  std::vector<Post> posts;
  const std::vector<StanceLabel> gold{F, A, N, F, A, N, F, A, N, F};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    posts.push_back(post(i < 5 ? "AT" : "HC", "p" + std::to_string(i), gold[i]));
  }
  // Posts 2 and 7 are missed by both models, with the models disagreeing on 7.
  std::vector<StanceLabel> m1 = gold;
  std::vector<StanceLabel> m2 = gold;
  m1[2] = F;
  m2[2] = A;
  m1[7] = F;
  m2[7] = N;
  m1[4] = F;  // m2 still right
  m2[9] = A;  // m1 still right
  const ErrorAnalysisReport r = all_models_missed({{"cnn", m1}, {"tan", m2}}, posts);
  REQUIRE(r.size() == 2);
  CHECK(r.posts[0].id == "p2");
  CHECK(r.posts[1].id == "p7");
  CHECK(r.posts[1].predictions.at("cnn") == F);
  CHECK(r.posts[1].predictions.at("tan") == N);
  CHECK(r.per_topic.at("AT") == 1);
  CHECK(r.per_topic.at("HC") == 1);

  // With fewer models there are fewer chances to be right, so the set never shrinks.
  const ErrorAnalysisReport single = all_models_missed({{"cnn", m1}}, posts);
  CHECK(single.size() >= r.size());
  CHECK_THROWS_AS(all_models_missed({{"cnn", {F}}}, posts), ValidationError);

  const auto j = to_json(r);
  CHECK(j["count"] == 2);
  CHECK(j["posts"][1]["predictions"]["tan"] == "NONE");
}

TEST_CASE("comparison table") {
  SUBCASE("best per column and missing cells") {
    const ComparisonTable t = render_comparison(
        {{"svm", {{"AT", 0.3}}, 0.3}, {"cnn", {{"AT", 0.7}, {"CC", 0.5}}, std::nullopt}}, {"AT", "CC"});
    REQUIRE(t.columns == std::vector<std::string>{"AT", "CC", "TOTAL"});
    CHECK(*t.best[0] == 1);
    CHECK(*t.best[1] == 1);
    CHECK(*t.best[2] == 0);
    CHECK_FALSE(t.rows[0].cells[1].has_value());
    const std::string text = t.to_text();
    CHECK(text.find("\xE2\x80\x94") != std::string::npos);
    CHECK(text.find("0.700*") != std::string::npos);
    CHECK(t.to_tsv().find("svm\t0\t0.300\t\xE2\x80\x94\t0.300") != std::string::npos);
    CHECK(t.to_json()["best"]["AT"] == "cnn");
  }
  SUBCASE("reference rows") {
    const auto refs = reference_results(Benchmark::kSemEval);
    const ComparisonTable t =
        render_comparison({{"cnn", {{"AT", 0.5}}, 0.6}}, reference_topics(Benchmark::kSemEval), refs);
    const auto cnn = std::find_if(t.rows.begin(), t.rows.end(),
                                  [](const auto& r) { return r.reference && r.model == "CNN"; });
    REQUIRE(cnn != t.rows.end());
    CHECK(*cnn->cells.back() == 0.706);
    CHECK(*t.best.back() == 0);  // reference rows are never flagged
    CHECK(t.to_text().find("CNN (reported)") != std::string::npos);
  }
}

TEST_CASE("published reference values") {
  const auto sem = reference_results(Benchmark::kSemEval);
  REQUIRE(sem.size() == 8);
  CHECK(sem[5].model == "BERT");
  CHECK(*sem[5].total == 0.751);
  CHECK(sem[0].per_topic.at("HC") == 0.728);
  const auto mp = reference_results(Benchmark::kMpchi);
  REQUIRE(mp.size() == 7);
  CHECK(mp[5].per_topic.at("MMR") == 0.782);
  CHECK(*mp[6].total == 0.519);
}

TEST_CASE("preprocessing effect") {
  const MetricReport r = macro_f1_favor_against({F, A, A, A, N, F}, {F, F, A, A, N, N});
  const EffectReport same = preprocessing_effect(r, r);
  CHECK(same.official_delta == 0.0);
  for (double d : same.f1_delta) CHECK(d == 0.0);

  const MetricReport after = macro_f1_favor_against({F, F, A, A, N, N}, {F, F, A, A, N, N});
  const EffectReport e = preprocessing_effect(r, after);
  CHECK(e.official_delta == doctest::Approx(0.35));
  CHECK(e.f1_delta[0] == doctest::Approx(0.5));
  CHECK(e.f1_delta[1] == doctest::Approx(0.2));
  CHECK(e.recall_delta[2] == doctest::Approx(0.5));
  CHECK(to_json(e)["f1_delta"]["FAVOR"] == doctest::Approx(0.5));
}

TEST_CASE("report json keeps a stable key order") {
  const MetricReport r = macro_f1_favor_against({F, A, A, A, N, F}, {F, F, A, A, N, N});
  const std::string s = to_json(r).dump();
  CHECK(s.rfind("{\"official\":0.65", 0) == 0);
  CHECK(s.find("\"FAVOR\"") < s.find("\"AGAINST\""));
  CHECK(to_json(r).dump() == s);
}

TEST_CASE("prediction files round trip") {
  const fs::path p = fs::temp_directory_path() / "stance_eval_preds.tsv";
  write_predictions(p, {{"1", F}, {"2", N}}, {"config_hash=abc seed=1"});
  const auto rows = read_predictions(p);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].id == "2");
  CHECK(rows[1].label == N);
  {
    std::ofstream out(p);
    out << "1\tFAVOR\n2\tMAYBE\n";
  }
  CHECK_THROWS_WITH_AS(read_predictions(p), doctest::Contains(":2"), ParseError);
  CHECK_THROWS_AS(write_predictions(p, {{"a\tb", F}}), ValidationError);
  fs::remove(p);
}
