#ifndef STANCE_EVALUATION_H_
#define STANCE_EVALUATION_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stance/corpus.h"
#include "stance/labels.h"

namespace stance {

// counts[gold][pred] in class order [Favor, Against, None].
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumLabels>, kNumLabels> counts{};

  void add(StanceLabel gold, StanceLabel pred);
  std::size_t total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassScores {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricReport {
  ConfusionMatrix confusion;
  std::array<ClassScores, kNumLabels> per_class;
  // (F1_favor + F1_against) / 2
  double official = 0.0;
  std::size_t count = 0;
};

// Zero denominators give 0 for precision, recall and F1.
MetricReport report_from_confusion(const ConfusionMatrix& cm);
MetricReport macro_f1_favor_against(const std::vector<StanceLabel>& pred,
                                    const std::vector<StanceLabel>& gold);

struct TopicPredictions {
  std::string topic;
  std::vector<StanceLabel> pred;
  std::vector<StanceLabel> gold;
};

// Concatenates all topics before scoring.
MetricReport pooled_overall(const std::vector<TopicPredictions>& topics);

struct MissedPost {
  std::string topic;
  std::string id;
  std::string text;
  StanceLabel gold = StanceLabel::kNone;
  std::map<std::string, StanceLabel> predictions;
};

struct ErrorAnalysisReport {
  std::vector<std::string> models;
  std::vector<MissedPost> posts;
  std::map<std::string, std::size_t> per_topic;
  std::size_t size() const { return posts.size(); }
};

// Posts that no model labelled correctly. Every prediction list is aligned
// with posts.
ErrorAnalysisReport all_models_missed(
    const std::map<std::string, std::vector<StanceLabel>>& model_predictions,
    const std::vector<Post>& posts);

// Per-topic official metrics plus an optional pooled total for one model.
struct ModelResults {
  std::string model;
  std::map<std::string, double> per_topic;
  std::optional<double> total;
};

struct ComparisonTable {
  struct Row {
    std::string model;
    std::vector<std::optional<double>> cells;
    bool reference = false;
  };
  // Topic columns followed by "TOTAL".
  std::vector<std::string> columns;
  std::vector<Row> rows;
  // Index of the best measured row per column; reference rows never win.
  std::vector<std::optional<std::size_t>> best;

  std::string to_text() const;
  std::string to_tsv() const;
  nlohmann::ordered_json to_json() const;
};

ComparisonTable render_comparison(const std::vector<ModelResults>& results,
                                  const std::vector<std::string>& topics,
                                  const std::vector<ModelResults>& reference_rows = {});

enum class Benchmark { kSemEval, kMpchi };
// Published per-topic results, in the published column order.
std::vector<std::string> reference_topics(Benchmark b);
std::vector<ModelResults> reference_results(Benchmark b);

struct EffectReport {
  double official_before = 0.0;
  double official_after = 0.0;
  double official_delta = 0.0;
  std::array<double, kNumLabels> precision_delta{};
  std::array<double, kNumLabels> recall_delta{};
  std::array<double, kNumLabels> f1_delta{};
};

EffectReport preprocessing_effect(const MetricReport& before, const MetricReport& after);

nlohmann::ordered_json to_json(const MetricReport& r);
nlohmann::ordered_json to_json(const ErrorAnalysisReport& r);
nlohmann::ordered_json to_json(const EffectReport& r);

// "post_id<TAB>LABEL" per line. Lines starting with '#' are comments.
struct PredictionRow {
  std::string id;
  StanceLabel label = StanceLabel::kNone;
};
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRow>& rows,
                       const std::vector<std::string>& header_comments = {});
std::vector<PredictionRow> read_predictions(const std::filesystem::path& path);

}  // namespace stance

#endif  // STANCE_EVALUATION_H_
