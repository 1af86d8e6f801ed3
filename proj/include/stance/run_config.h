#ifndef STANCE_RUN_CONFIG_H_
#define STANCE_RUN_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stance/corpus.h"
#include "stance/linear_svm.h"
#include "stance/neural_models.h"

namespace stance {

enum class ModelId { kSen, kTwoStep, kLstm, kCnn, kTan, kTanMinus };

std::string model_name(ModelId m);
std::optional<ModelId> parse_model_id(std::string_view name);
std::optional<ModelKind> neural_kind(ModelId m);
const std::vector<ModelId>& all_models();

// Resolved training settings for one (topic, model) pair. Neural models use
// schedule, the SVM models use svm.
struct Hyperparameters {
  TrainSchedule schedule;
  SvmTrainConfig svm;
};

// Built-in per-topic values for the neural models and SEN. Topics outside
// the ten benchmark topics get the model defaults.
Hyperparameters default_hyperparameters(const std::string& topic, ModelId m);

// Sets one named hyperparameter ("l2", "learning_rate", "lambda", ...).
// Throws ConfigError naming `where` for keys the model does not have.
void set_hyperparameter(Hyperparameters& h, ModelId m, const std::string& key, double value,
                        const std::string& where);

struct MpchiSource {
  std::filesystem::path path;
  std::optional<std::filesystem::path> manifest;
  MpchiFormat format;
};

struct DataConfig {
  std::optional<std::filesystem::path> semeval_train;
  std::optional<std::filesystem::path> semeval_test;
  std::vector<MpchiSource> mpchi;
  SplitSpec mpchi_split;
  std::optional<std::filesystem::path> embeddings;
  // Shipped resources by default.
  std::filesystem::path frequency_table = STANCE_DATA_DIR "/english_unigrams.txt";
  std::filesystem::path normalization_lexicon = STANCE_DATA_DIR "/normalization_lexicon.tsv";
  std::filesystem::path stopwords = STANCE_DATA_DIR "/stopwords_en.txt";
  std::filesystem::path subjectivity_lexicon = STANCE_DATA_DIR "/subjectivity_lexicon.tsv";
  std::filesystem::path pos_dictionary = STANCE_DATA_DIR "/tag_dictionary.tsv";
};

struct PreprocessOptions {
  bool normalization = true;
  bool hashtag_split = true;
  bool microblog = true;
  bool drop_semst = true;
};

struct NeuralOptions {
  std::size_t embed_dim = 300;
  std::size_t hidden = 128;
  std::size_t cnn_filters = 100;
  std::vector<std::size_t> cnn_widths = {3, 4, 5};
  bool fine_tune = false;
  double validation_fraction = 0.1;
};

struct VoteOptions {
  bool enabled = false;
  std::size_t runs = 10;
  double validation_fraction = 0.1;
  std::size_t threads = 1;
};

struct TuneOptions {
  std::size_t folds = 5;
  // Hyperparameter name -> candidate values; the grid is their product.
  std::map<std::string, std::vector<double>> grid;
};

struct RunConfig {
  DataConfig data;
  // Empty selects every loaded topic.
  std::vector<std::string> topics;
  PreprocessOptions preprocess;
  ModelId model = ModelId::kTan;
  // Prediction sets read by compare and error-analysis; native model names
  // or names of imported external predictions.
  std::vector<std::string> compare_models;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "stance-out";
  NeuralOptions neural;
  VoteOptions vote;
  TuneOptions tune;
  // model name -> {key: value}, applied to every topic.
  std::map<std::string, std::map<std::string, double>> model_overrides;
  // topic -> model name -> {key: value}, applied last.
  std::map<std::string, std::map<std::string, std::map<std::string, double>>> topic_overrides;

  // Unknown keys throw ConfigError naming the key path. Relative paths are
  // resolved against base_dir; referenced files must exist.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);

  // Canonical form; every field is written, so equal configs hash equally.
  nlohmann::json to_json() const;
  std::uint64_t hash() const;
  std::string hash_hex() const;

  // Defaults, then model_overrides, then topic_overrides.
  Hyperparameters resolve(const std::string& topic, ModelId m) const;

  // "config_hash=... seed=..." line stamped into every output file.
  std::string stamp() const;
};

}  // namespace stance

#endif  // STANCE_RUN_CONFIG_H_
