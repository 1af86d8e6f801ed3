#ifndef STANCE_PIPELINE_H_
#define STANCE_PIPELINE_H_

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "stance/corpus.h"
#include "stance/features.h"
#include "stance/neural_models.h"
#include "stance/preprocess.h"
#include "stance/run_config.h"

namespace stance {

struct Resources {
  NormalizationLexicon normalization;
  UnigramFrequencyTable frequency;
  std::set<std::string> stopwords;
  FeatureResources features;
};

Resources load_resources(const DataConfig& data);

// SemEval files (train, test or both) plus MPCHI sources, restricted to
// cfg.topics. Naming a topic that is not loaded is a ConfigError.
std::map<std::string, TopicDataset> load_datasets(const RunConfig& cfg);

PreprocessConfig make_preprocess_config(const RunConfig& cfg, PreprocessMode mode,
                                        const std::set<std::string>& stopwords);

// Tab-separated per-topic Favor/Against/None counts for train and test.
std::string format_stats(const std::map<std::string, TopicDataset>& datasets);

// Shared state for one CLI invocation: config, lazily loaded resources,
// datasets and embeddings.
class Session {
 public:
  explicit Session(RunConfig cfg);

  const RunConfig& config() const { return cfg_; }
  const Resources& resources();
  const std::map<std::string, TopicDataset>& datasets();
  const TopicDataset& dataset(const std::string& topic);
  std::vector<std::string> topics();

  TokenSequence tokens(const Post& post, PreprocessMode mode);
  TokenSequence tokens(std::string_view text, PreprocessMode mode);
  // Embedding-mode words of a target description, never empty.
  std::vector<std::string> target_words(const std::string& target);
  // Pretrained vectors restricted to the corpus vocabulary, or an empty
  // table of neural.embed_dim when no embedding file is configured.
  std::shared_ptr<const EmbeddingTable> embeddings();

  // output_dir/sub/name, creating the directory.
  std::filesystem::path output_path(const std::string& sub, const std::string& name) const;
  std::vector<std::string> stamp(const std::string& topic, ModelId m) const;

 private:
  RunConfig cfg_;
  std::optional<Resources> resources_;
  std::optional<std::map<std::string, TopicDataset>> datasets_;
  std::shared_ptr<const EmbeddingTable> embeddings_;
};

// Trains on `train` and labels `eval` in memory.
std::vector<StanceLabel> fit_predict(Session& s, const std::string& topic, const std::string& target,
                                     ModelId m, const Hyperparameters& h,
                                     const std::vector<Post>& train, const std::vector<Post>& eval);

// Trains on the topic's train split and writes the model artifacts and a
// training report under output_dir/models. Returns the report.
nlohmann::ordered_json train_topic(Session& s, const std::string& topic, ModelId m);

// Labels the topic's test split from the artifacts written by train_topic.
std::vector<StanceLabel> predict_topic(Session& s, const std::string& topic, ModelId m);

std::filesystem::path predictions_path(const Session& s, const std::string& topic, ModelId m);
std::filesystem::path predictions_path(const Session& s, const std::string& topic,
                                       const std::string& model);

// Grid search over cfg.tune.grid with k-fold cross-validation on the train
// split only. The report lists every grid point's fold scores and the best.
nlohmann::ordered_json tune_topic(Session& s, const TrackedDataset& ds, ModelId m);

// Shuffled k-fold partition of n indices; each fold is sorted.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed);

nlohmann::ordered_json to_json(const Hyperparameters& h, ModelId m);

}  // namespace stance

#endif  // STANCE_PIPELINE_H_
