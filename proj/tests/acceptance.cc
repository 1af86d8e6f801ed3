// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion; exits 0
// only if every selected criterion passes. Usage: acceptance [N ...]
//
// Criteria 1 and 8 need the official SemEval files. They are looked up in
// $STANCE_DATA_ROOT (or its semeval/ subdirectory); pretrained vectors are
// taken from $STANCE_EMBEDDINGS when set.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "neural_fixture.h"
#include "stance/corpus.h"
#include "stance/diagnostics.h"
#include "stance/ensemble_vote.h"
#include "stance/evaluation.h"
#include "stance/linear_svm.h"
#include "stance/neural_models.h"
#include "stance/pipeline.h"
#include "stance/preprocess.h"

namespace fs = std::filesystem;
using namespace stance;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct SemEvalFiles {
  fs::path train;
  fs::path test;
};

std::optional<SemEvalFiles> find_semeval(std::string& searched) {
  const char* root = std::getenv("STANCE_DATA_ROOT");
  if (root == nullptr || *root == '\0') {
    searched = "STANCE_DATA_ROOT is not set";
    return std::nullopt;
  }
  const char* train_names[] = {"semeval2016-task6-trainingdata.txt", "train.tsv"};
  const char* test_names[] = {"SemEval2016-Task6-subtaskA-testdata-gold.txt", "test.tsv"};
  for (const fs::path dir : {fs::path(root), fs::path(root) / "semeval"}) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (fs::exists(dir / train_names[i]) && fs::exists(dir / test_names[i])) {
        return SemEvalFiles{dir / train_names[i], dir / test_names[i]};
      }
    }
  }
  searched = std::string("no SemEval train/test files under ") + root;
  return std::nullopt;
}

// ---- 1 ----
Outcome dataset_fidelity() {
  std::string why;
  const auto files = find_semeval(why);
  if (!files) return {false, "blocked: " + why};
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = load_semeval_pair(files->train, files->test);
  std::map<std::string, DatasetStats> stats;
  for (const auto& [topic, ds] : data) stats[topic] = dataset_stats(ds);
  const double secs = seconds_since(t0);
  const std::map<std::string, std::array<std::size_t, 6>> expected = {
      {"AT", {92, 304, 117, 32, 160, 28}},  {"CC", {212, 15, 168, 123, 11, 35}},
      {"FM", {210, 328, 126, 58, 183, 44}}, {"HC", {112, 361, 166, 45, 172, 78}},
      {"LA", {105, 334, 164, 46, 189, 45}}};
  std::string mismatches;
  for (const auto& [topic, want] : expected) {
    const auto it = stats.find(topic);
    if (it == stats.end()) {
      mismatches += " " + topic + " missing;";
      continue;
    }
    const auto& s = it->second;
    const std::array<std::size_t, 6> got = {s.train[StanceLabel::kFavor], s.train[StanceLabel::kAgainst],
                                            s.train[StanceLabel::kNone],  s.test[StanceLabel::kFavor],
                                            s.test[StanceLabel::kAgainst], s.test[StanceLabel::kNone]};
    if (got != want) mismatches += " " + topic + " differs;";
  }
  const bool ok = mismatches.empty() && secs < 1.0;
  return {ok, (mismatches.empty() ? "all 5 SemEval topics match" : "mismatch:" + mismatches) + ", " +
                  fmt("%.3f", secs) + " s"};
}

// ---- 2 ----
Outcome theorem_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  TheoremSuiteConfig cfg;
  cfg.trials = 100;
  cfg.posts_per_trial = 10;
  const TheoremReport r = run_theorem_suite(cfg);
  const double secs = seconds_since(t0);
  const double out_dev = std::max(r.max_output_deviation, r.max_output_deviation_zeroed);
  const bool ok = r.max_attention_deviation <= 1e-10 && out_dev <= 1e-12 && secs < 30.0;
  return {ok, "attention dev " + fmt("%.2e", r.max_attention_deviation) + ", TAN/TAN- output dev " +
                  fmt("%.2e", out_dev) + ", " + fmt("%.1f", secs) + " s"};
}

// ---- 3 ----
Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  GradientSuiteConfig cfg;
  cfg.max_coords = 200;
  cfg.tol = 1e-5;
  double worst = 0.0;
  std::string failed;
  const auto checks = run_gradient_suite(cfg);
  for (const NamedGradCheck& c : checks) {
    worst = std::max(worst, c.report.max_rel_error);
    if (!c.report.passed) failed += " " + c.name;
  }
  const double secs = seconds_since(t0);
  const bool ok = failed.empty() && secs < 300.0;
  return {ok, std::to_string(checks.size()) + " checks, worst rel err " + fmt("%.2e", worst) +
                  (failed.empty() ? "" : ", failed:" + failed) + ", " + fmt("%.1f", secs) + " s"};
}

// ---- 4 ----
double oracle_official(const std::vector<StanceLabel>& pred, const std::vector<StanceLabel>& gold) {
  double sum = 0.0;
  for (StanceLabel c : {StanceLabel::kFavor, StanceLabel::kAgainst}) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && gold[i] == c) ++tp;
      if (pred[i] == c && gold[i] != c) ++fp;
      if (pred[i] != c && gold[i] == c) ++fn;
    }
    sum += tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
  return sum / 2.0;
}

Outcome metric_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> lab(0, 2);
  std::uniform_int_distribution<std::size_t> len(1, 60);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = len(rng);
    std::vector<StanceLabel> pred, gold;
    for (std::size_t i = 0; i < n; ++i) {
      pred.push_back(kAllLabels[lab(rng)]);
      gold.push_back(kAllLabels[lab(rng)]);
    }
    if (macro_f1_favor_against(pred, gold).official != oracle_official(pred, gold)) ++mismatches;
  }
  using L = StanceLabel;
  const double example = macro_f1_favor_against({L::kFavor, L::kAgainst, L::kAgainst, L::kAgainst, L::kNone, L::kFavor},
                                                 {L::kFavor, L::kFavor, L::kAgainst, L::kAgainst, L::kNone, L::kNone})
                             .official;
  const bool ok = mismatches == 0 && example == 0.65;
  return {ok, std::to_string(1000 - mismatches) + "/1000 exact matches, worked example " + fmt("%.17g", example)};
}

// ---- 5 ----
std::vector<std::string> brute_force_segment(const std::string& s, const std::vector<std::string>& ranked) {
  const double log_v = std::log(static_cast<double>(ranked.size()));
  auto piece_cost = [&](const std::string& piece) {
    const auto it = std::find(ranked.begin(), ranked.end(), piece);
    if (it != ranked.end()) return std::log(static_cast<double>(it - ranked.begin() + 1) * log_v);
    return piece.size() == 1 ? 1.0e4 : std::numeric_limits<double>::infinity();
  };
  const std::size_t n = s.size();
  std::int64_t best_cost = std::numeric_limits<std::int64_t>::max();
  std::vector<std::string> best;
  for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<std::string> pieces;
    std::int64_t cost = 0;
    bool feasible = true;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= n; ++i) {
      if (i == n || (mask >> (i - 1)) & 1u) {
        pieces.push_back(s.substr(start, i - start));
        const double c = piece_cost(pieces.back());
        if (std::isinf(c)) {
          feasible = false;
        } else {
          cost += std::llround(c * 4294967296.0);
        }
        start = i;
      }
    }
    if (!feasible) continue;
    bool better = cost < best_cost;
    if (!better && cost == best_cost) {
      better = pieces.size() < best.size() || (pieces.size() == best.size() && pieces < best);
    }
    if (better) {
      best_cost = cost;
      best = pieces;
    }
  }
  return best;
}

Outcome segmentation() {
  const UnigramFrequencyTable shipped = UnigramFrequencyTable::load(STANCE_DATA_DIR "/english_unigrams.txt");
  const auto seg = segment_hashtag("powertowomen", shipped);
  PreprocessConfig pc;
  pc.mode = PreprocessMode::kEmbedding;
  const auto toks = words(preprocess_text("#powertowomen", pc, NormalizationLexicon{}, shipped));
  std::string joined;
  for (const std::string& w : toks) joined += (joined.empty() ? "" : " ") + w;

  const std::vector<std::string> ranked = {"a", "ab", "b", "ba", "aab", "bba", "abab", "bab", "aaaa", "abb"};
  const UnigramFrequencyTable toy(ranked);
  std::size_t checked = 0, agree = 0;
  for (std::size_t n = 1; n <= 12; ++n) {
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
      std::string s;
      for (std::size_t i = 0; i < n; ++i) s += ((bits >> i) & 1u) ? 'b' : 'a';
      ++checked;
      if (segment_hashtag(s, toy) == brute_force_segment(s, ranked)) ++agree;
    }
  }
  const bool ok = joined == "power to women" && seg == std::vector<std::string>{"power", "to", "women"} &&
                  agree == checked;
  return {ok, "\"#powertowomen\" -> \"" + joined + "\", DP = brute force on " + std::to_string(agree) + "/" +
                  std::to_string(checked) + " strings"};
}

// ---- 6 ----
FeatureVector dense(const std::vector<double>& v) {
  std::map<std::size_t, double> m;
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i];
  return FeatureVector::from_map(m, v.size());
}

Outcome svm_sanity() {
  std::vector<FeatureVector> xs;
  std::vector<int> ys;
  for (int i = 0; i < 20; ++i) {
    xs.push_back(dense({1, 0}));
    ys.push_back(1);
    xs.push_back(dense({0, 1}));
    ys.push_back(-1);
  }
  std::size_t first_perfect = 0;
  for (std::size_t epochs = 1; epochs <= 200 && first_perfect == 0; ++epochs) {
    SvmTrainConfig cfg;
    cfg.lambda = 0.01;
    cfg.epochs = epochs;
    const BinaryLinearModel m = train_pegasos(xs, ys, cfg);
    bool all = true;
    for (std::size_t i = 0; i < xs.size(); ++i) all = all && ys[i] * m.margin(xs[i]) > 0.0;
    if (all) first_perfect = epochs;
  }

  // Every sign combination of the two stage margins, including the zero
  // boundary, over random hand-set models and inputs.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t cases = 0, violations = 0;
  for (double b1 : {-2.0, -1e-12, 0.0, 1e-12, 2.0}) {
    for (double b2 : {-2.0, -1e-12, 0.0, 1e-12, 2.0}) {
      for (int k = 0; k < 40; ++k) {
        BinaryLinearModel s1, s2;
        s1.weights = {u(rng) * (k % 2), u(rng) * (k % 2)};
        s2.weights = {u(rng), u(rng)};
        s1.bias = b1;
        s2.bias = b2;
        s1.l2_normalize = s2.l2_normalize = false;
        const FeatureVector x1 = dense({u(rng), u(rng)});
        const FeatureVector x2 = dense({u(rng), u(rng)});
        const StanceLabel out = cascade_decide(s1, s2, x1, x2);
        ++cases;
        if (s1.margin(x1) < 0.0 && out != StanceLabel::kNone) ++violations;
      }
    }
  }
  const bool ok = first_perfect > 0 && violations == 0;
  return {ok, "100% train accuracy after " + std::to_string(first_perfect) + " epoch(s); cascade " +
                  std::to_string(violations) + " violations in " + std::to_string(cases) + " cases"};
}

// ---- 7 ----
StanceLabel oracle_majority(const std::vector<StanceLabel>& labels, const std::vector<StanceLabel>& order) {
  std::size_t best = 0;
  for (StanceLabel l : order) best = std::max<std::size_t>(best, std::count(labels.begin(), labels.end(), l));
  for (StanceLabel l : order) {
    if (static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l)) == best) return l;
  }
  return order.front();
}

Outcome vote_scheme() {
  const auto posts = testing::memorization_fixture(6);
  std::vector<StanceLabel> gold;
  std::vector<std::string> ids;
  for (const EncodedPost& p : posts) {
    gold.push_back(p.gold);
    ids.push_back(p.id);
  }
  TrainSchedule s = testing::memorization_schedule();
  s.dropout = 0.5;
  VoteConfig vc;
  vc.num_runs = 3;
  vc.validation_fraction = 0.2;
  vc.checkpoint_epochs = epoch_range(3, 5);
  vc.master_seed = 42;
  std::vector<std::string> files;
  for (std::size_t threads : {1, 3}) {
    vc.threads = threads;
    const RunTrainer trainer = neural_run_trainer(testing::small_config(ModelKind::kTanMinus, 6, 4), s, posts, posts);
    const VoteResult r = run_vote_scheme(trainer, gold, ids, vc);
    std::vector<PredictionRow> rows;
    for (std::size_t i = 0; i < ids.size(); ++i) rows.push_back({ids[i], r.labels[i]});
    const fs::path path = fs::temp_directory_path() / ("stance_acceptance_vote_" + std::to_string(threads) + ".tsv");
    write_predictions(path, rows, {"seed=42"});
    files.push_back(slurp(path));
    fs::remove(path);
  }
  const bool identical = files[0] == files[1];

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> lab(0, 2);
  std::uniform_int_distribution<std::size_t> len(1, 15);
  std::vector<StanceLabel> order{StanceLabel::kFavor, StanceLabel::kAgainst, StanceLabel::kNone};
  std::size_t agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<StanceLabel> labels;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) labels.push_back(kAllLabels[lab(rng)]);
    std::shuffle(order.begin(), order.end(), rng);
    if (majority(labels, order) == oracle_majority(labels, order)) ++agree;
  }
  return {identical && agree == 1000, std::string(identical ? "two runs byte-identical" : "runs differ") +
                                          ", majority = oracle on " + std::to_string(agree) + "/1000"};
}

// ---- 8 ----
Outcome desk_scale() {
  std::string why;
  const auto files = find_semeval(why);
  if (!files) return {false, "blocked: " + why};
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg;
  cfg.data.semeval_train = files->train;
  cfg.data.semeval_test = files->test;
  if (const char* emb = std::getenv("STANCE_EMBEDDINGS"); emb != nullptr && *emb != '\0') cfg.data.embeddings = emb;
  cfg.topics = reference_topics(Benchmark::kSemEval);
  Session session(cfg);

  std::map<std::string, std::map<std::string, double>> paper;
  for (const ModelResults& r : reference_results(Benchmark::kSemEval)) paper[r.model] = r.per_topic;
  std::string detail;
  bool ok = true;
  for (const auto& [model, ref_name] : {std::pair{ModelId::kCnn, "CNN"}, std::pair{ModelId::kTanMinus, "TAN-"}}) {
    std::size_t within = 0;
    bool beats_baseline = false;
    for (const std::string& topic : cfg.topics) {
      const TopicDataset& ds = session.dataset(topic);
      std::vector<StanceLabel> gold;
      for (const Post& p : ds.test) gold.push_back(p.gold);
      const auto pred = fit_predict(session, topic, ds.target, model, cfg.resolve(topic, model), ds.train, ds.test);
      const double score = macro_f1_favor_against(pred, gold).official;
      if (std::abs(score - paper[ref_name].at(topic)) <= 0.08) ++within;
      if (topic == "AT") {
        std::vector<StanceLabel> train_gold;
        for (const Post& p : ds.train) train_gold.push_back(p.gold);
        const StanceLabel major = default_tie_break(train_gold).front();
        const double baseline = macro_f1_favor_against(std::vector<StanceLabel>(gold.size(), major), gold).official;
        beats_baseline = score > baseline;
        detail += std::string(ref_name) + " AT " + fmt("%.3f", score) + " vs baseline " + fmt("%.3f", baseline) + "; ";
      }
    }
    detail += std::string(ref_name) + " within 0.08 on " + std::to_string(within) + "/5; ";
    ok = ok && beats_baseline && within >= 3;
  }
  const double secs = seconds_since(t0);
  ok = ok && secs <= 1800.0;
  return {ok, detail + "seed " + std::to_string(cfg.seed) + ", " + fmt("%.0f", secs) + " s"};
}

// ---- 9 ----
Outcome memorization() {
  const auto fixture = testing::memorization_fixture(8);
  std::string detail;
  bool ok = true;
  for (ModelKind k : {ModelKind::kLstm, ModelKind::kCnn, ModelKind::kTan, ModelKind::kTanMinus}) {
    auto m = make_model(testing::small_config(k, 8, 8));
    std::size_t first = 0;
    train(*m, fixture, {}, testing::memorization_schedule(), [&](std::size_t epoch, NeuralModel& model) {
      if (first == 0 && mean_loss(model, fixture) < 0.05) first = epoch;
    });
    ok = ok && first > 0 && first <= 500;
    detail += to_string(k) + " " + (first > 0 ? "epoch " + std::to_string(first) : std::string("never")) + "; ";
  }
  return {ok, "loss < 0.05 at: " + detail.substr(0, detail.size() - 2)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"dataset fidelity", dataset_fidelity}, {"attention target invariance", theorem_suite},
      {"gradient correctness", gradient_checks}, {"metric oracle", metric_oracle},
      {"hashtag segmentation", segmentation},  {"svm sanity", svm_sanity},
      {"vote scheme", vote_scheme},            {"desk-scale end-to-end", desk_scale},
      {"memorization", memorization}};
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion " << argv[i] << '\n';
      return 2;
    }
    selected.push_back(static_cast<std::size_t>(n));
  }
  if (selected.empty()) {
    for (std::size_t i = 1; i <= criteria.size(); ++i) selected.push_back(i);
  }
  bool all = true;
  for (std::size_t n : selected) {
    const auto& [name, run] = criteria[n - 1];
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << name << " (" << o.detail << ")"
              << std::endl;
  }
  return all ? 0 : 1;
}
