#include <algorithm>
#include <filesystem>
#include <random>
#include <mutex>
#include <set>

#include "doctest.h"
#include "neural_fixture.h"
#include "stance/ensemble_vote.h"
#include "stance/error.h"

using namespace stance;
namespace fs = std::filesystem;

namespace {

constexpr StanceLabel F = StanceLabel::kFavor;
constexpr StanceLabel A = StanceLabel::kAgainst;
constexpr StanceLabel N = StanceLabel::kNone;
const std::vector<StanceLabel> kAFN{A, F, N};

// Count, take the max, and break ties by position in the order list.
StanceLabel oracle_majority(const std::vector<StanceLabel>& labels, const std::vector<StanceLabel>& order) {
  std::size_t best_count = 0;
  for (StanceLabel l : order) {
    best_count = std::max<std::size_t>(best_count, std::count(labels.begin(), labels.end(), l));
  }
  for (StanceLabel l : order) {
    if (static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l)) == best_count) return l;
  }
  return order.front();
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("t" + std::to_string(i));
  return out;
}

// Trainer whose output is a fixed table per run (checkpoint-independent).
RunTrainer table_trainer(std::vector<std::vector<StanceLabel>> per_run) {
  return [per_run](const RunSpec& s, const std::vector<std::size_t>& epochs) {
    std::map<std::size_t, std::vector<StanceLabel>> out;
    for (std::size_t e : epochs) out[e] = per_run[s.run];
    return out;
  };
}

}  // namespace

TEST_CASE("majority examples") {
  CHECK(majority({F, F, N}, kAFN) == F);
  CHECK(majority({F, A}, {A, F, N}) == A);
  CHECK(majority({F, A}, {F, A, N}) == F);
  CHECK(majority({N}, kAFN) == N);
  CHECK_THROWS_AS(majority({}, kAFN), ValidationError);
  CHECK_THROWS_AS(majority({F}, {F, A}), ConfigError);
  CHECK_THROWS_AS(majority({F}, {F, A, A}), ConfigError);
}

TEST_CASE("majority equals the brute-force oracle") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> lab(0, 2);
  std::uniform_int_distribution<std::size_t> len(1, 12);
  std::vector<StanceLabel> order{F, A, N};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<StanceLabel> labels;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) labels.push_back(kAllLabels[lab(rng)]);
    std::shuffle(order.begin(), order.end(), rng);
    CHECK(majority(labels, order) == oracle_majority(labels, order));
  }
}

TEST_CASE("default tie-break follows training frequency") {
  CHECK(default_tie_break({F, F, A, N, N, N}) == std::vector<StanceLabel>{N, F, A});
  CHECK(default_tie_break({F, A}) == std::vector<StanceLabel>{A, F, N});
  CHECK(default_tie_break({}) == std::vector<StanceLabel>{A, F, N});
}

TEST_CASE("validation folds are disjoint") {
  for (std::size_t n : {0, 7, 10, 95, 513}) {
    const auto folds = validation_folds(n, 10, 0.1, 3);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& f : folds) {
      for (std::size_t i : f) {
        CHECK(i < n);
        seen.insert(i);
      }
      total += f.size();
    }
    CHECK(seen.size() == total);
    CHECK(total == n);
  }
  const auto partial = validation_folds(100, 3, 0.2, 4);
  CHECK(partial[0].size() == 20);
  CHECK(validation_folds(100, 3, 0.2, 4) == partial);
  CHECK_THROWS_AS(validation_folds(100, 10, 0.2, 4), ConfigError);
}

TEST_CASE("vote configuration") {
  VoteConfig c;
  CHECK_THROWS_AS(c.validate(), ConfigError);  // no checkpoints
  c.checkpoint_epochs = {1};
  CHECK_NOTHROW(c.validate());
  c.num_runs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.num_runs = 10;
  c.validation_fraction = 0.2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(epoch_range(40, 50).size() == 11);
  CHECK_THROWS_AS(epoch_range(5, 4), ConfigError);
}

TEST_CASE("single run and single checkpoint is plain prediction") {
  const std::vector<StanceLabel> preds{F, N, A, A};
  VoteConfig c;
  c.num_runs = 1;
  c.validation_fraction = 0.0;
  c.checkpoint_epochs = {5};
  const VoteResult r = run_vote_scheme(table_trainer({preds}), {F, A, N}, ids(4), c);
  CHECK(r.labels == preds);
}

TEST_CASE("three runs voting A, A, B give A") {
  VoteConfig c;
  c.num_runs = 3;
  c.validation_fraction = 0.1;
  c.checkpoint_epochs = {1, 2};
  const VoteResult r = run_vote_scheme(table_trainer({{A}, {A}, {F}}), std::vector<StanceLabel>(30, F), ids(1), c);
  CHECK(r.labels == std::vector<StanceLabel>{A});
}

TEST_CASE("a five-five tie between Favor and Against uses the tie-break") {
  std::vector<std::vector<StanceLabel>> runs;
  for (int i = 0; i < 10; ++i) runs.push_back({i < 5 ? F : A});
  VoteConfig c;
  c.checkpoint_epochs = {1};
  // Training data dominated by Favor: the default order puts Favor first.
  std::vector<StanceLabel> train(40, N);
  std::fill(train.begin(), train.begin() + 25, F);
  std::fill(train.begin() + 25, train.begin() + 35, A);
  CHECK(run_vote_scheme(table_trainer(runs), train, ids(1), c).labels == std::vector<StanceLabel>{F});
  std::fill(train.begin(), train.begin() + 25, A);
  std::fill(train.begin() + 25, train.begin() + 35, F);
  CHECK(run_vote_scheme(table_trainer(runs), train, ids(1), c).labels == std::vector<StanceLabel>{A});
  c.tie_break = {N, F, A};
  CHECK(run_vote_scheme(table_trainer(runs), train, ids(1), c).labels == std::vector<StanceLabel>{F});
}

TEST_CASE("voting within a run happens before voting across runs") {
  // Run 0: checkpoints F, F, A -> F. Run 1: A, A, F -> A. Run 2: F, A, A -> A.
  // Flat majority over all nine cells would tie 4 F vs 5 A -> A; run-level gives A too,
  // so use a case where they differ: run 2 = N, N, F -> N.
  PredictionMatrix m(3, {1, 2, 3}, {"p"});
  const StanceLabel cells[3][3] = {{F, F, A}, {A, A, F}, {N, N, F}};
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) m.set(r, c, 0, cells[r][c]);
  }
  // Runs give F, A, N: three-way tie -> first in order. Flat count would be F (4).
  CHECK(vote(m, {A, F, N}) == std::vector<StanceLabel>{A});
  CHECK(vote(m, {N, F, A}) == std::vector<StanceLabel>{N});
}

TEST_CASE("unanimity and order independence") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> lab(0, 2);
  std::vector<StanceLabel> same;
  for (int i = 0; i < 20; ++i) same.push_back(kAllLabels[lab(rng)]);
  VoteConfig c;
  c.checkpoint_epochs = {3, 4};
  const VoteResult u = run_vote_scheme(table_trainer(std::vector(10, same)), std::vector<StanceLabel>(50, F), ids(20), c);
  CHECK(u.labels == same);

  std::vector<std::vector<StanceLabel>> runs;
  for (int r = 0; r < 10; ++r) {
    std::vector<StanceLabel> row;
    for (int i = 0; i < 20; ++i) row.push_back(kAllLabels[lab(rng)]);
    runs.push_back(row);
  }
  const auto serial = run_vote_scheme(table_trainer(runs), std::vector<StanceLabel>(50, F), ids(20), c);
  c.threads = 4;
  const auto parallel = run_vote_scheme(table_trainer(runs), std::vector<StanceLabel>(50, F), ids(20), c);
  CHECK(serial.labels == parallel.labels);
  // Re-voting the same matrix with runs permuted gives the same labels.
  PredictionMatrix permuted(10, {3, 4}, ids(20));
  for (std::size_t r = 0; r < 10; ++r) {
    for (std::size_t ck = 0; ck < 2; ++ck) {
      for (std::size_t p = 0; p < 20; ++p) permuted.set(9 - r, ck, p, serial.matrix.get(r, ck, p));
    }
  }
  CHECK(vote(permuted, serial.tie_break) == serial.labels);
}

TEST_CASE("run specs hold out their fold and use distinct seeds") {
  std::vector<RunSpec> seen;
  std::mutex mu;
  const RunTrainer spy = [&](const RunSpec& s, const std::vector<std::size_t>& epochs) {
    std::lock_guard<std::mutex> lock(mu);
    seen.push_back(s);
    std::map<std::size_t, std::vector<StanceLabel>> out;
    for (std::size_t e : epochs) out[e] = {F};
    return out;
  };
  VoteConfig c;
  c.checkpoint_epochs = {1};
  c.master_seed = 77;
  run_vote_scheme(spy, std::vector<StanceLabel>(95, F), ids(1), c);
  REQUIRE(seen.size() == 10);
  std::set<std::uint64_t> seeds;
  for (const RunSpec& s : seen) {
    seeds.insert(s.seed);
    CHECK(s.train_idx.size() + s.validation_idx.size() == 95);
    for (std::size_t v : s.validation_idx) {
      CHECK_FALSE(std::binary_search(s.train_idx.begin(), s.train_idx.end(), v));
    }
  }
  CHECK(seeds.size() == 10);
  CHECK(run_seed(77, 3) == seen[3].seed);
}

TEST_CASE("incomplete runs and matrices are rejected") {
  VoteConfig c;
  c.num_runs = 2;
  c.checkpoint_epochs = {1, 2};
  const RunTrainer missing = [](const RunSpec&, const std::vector<std::size_t>&) {
    return std::map<std::size_t, std::vector<StanceLabel>>{{1, {F}}};
  };
  CHECK_THROWS_AS(run_vote_scheme(missing, {F, A}, ids(1), c), Error);
  PredictionMatrix m(1, {1}, {"a", "b"});
  m.set(0, 0, 0, F);
  CHECK_FALSE(m.complete());
  CHECK_THROWS_AS(vote(m, kAFN), ValidationError);
}

TEST_CASE("prediction matrix file round trip") {
  PredictionMatrix m(2, {40, 41}, {"x1", "x2", "x3"});
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> lab(0, 2);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t p = 0; p < 3; ++p) m.set(r, c, p, kAllLabels[lab(rng)]);
    }
  }
  const fs::path path = fs::temp_directory_path() / "stance_matrix.tsv";
  m.save(path, {"config_hash=1 seed=2"});
  const PredictionMatrix back = PredictionMatrix::load(path);
  CHECK(back.runs() == 2);
  CHECK(back.checkpoint_epochs() == std::vector<std::size_t>{40, 41});
  CHECK(back.post_ids() == m.post_ids());
  CHECK(vote(back, kAFN) == vote(m, kAFN));
  for (std::size_t p = 0; p < 3; ++p) CHECK(back.get(1, 1, p) == m.get(1, 1, p));
  fs::remove(path);
}

TEST_CASE("neural run trainer is deterministic") {
  const auto posts = testing::memorization_fixture(6);
  const std::vector<EncodedPost> test(posts.begin(), posts.begin() + 4);
  TrainSchedule s = testing::memorization_schedule();
  s.epochs_min = 2;
  s.epochs_max = 3;
  const RunTrainer t = neural_run_trainer(testing::small_config(ModelKind::kCnn, 6, 4), s, posts, test);
  std::vector<StanceLabel> gold;
  for (const auto& p : posts) gold.push_back(p.gold);
  VoteConfig c;
  c.num_runs = 2;
  c.validation_fraction = 0.2;
  c.checkpoint_epochs = epoch_range(2, 3);
  const VoteResult a = run_vote_scheme(t, gold, {"a", "b", "c", "d"}, c);
  const VoteResult b = run_vote_scheme(t, gold, {"a", "b", "c", "d"}, c);
  CHECK(a.labels == b.labels);
  CHECK(a.labels.size() == 4);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t ck = 0; ck < 2; ++ck) {
      for (std::size_t p = 0; p < 4; ++p) CHECK(a.matrix.get(r, ck, p) == b.matrix.get(r, ck, p));
    }
  }
}
