#ifndef STANCE_NEURAL_MODELS_H_
#define STANCE_NEURAL_MODELS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "stance/labels.h"
#include "stance/tensor.h"

namespace stance {

// Deterministic vector for a word missing from the table: uniform in
// [-0.25, 0.25], seeded from the word and the table seed.
std::vector<double> oov_vector(const std::string& word, std::size_t dim, std::uint64_t seed);

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim, std::uint64_t oov_seed = 0);
  // "word v1 ... vd" per line; every row must share the first row's d. keep,
  // when given, selects the words to retain.
  static EmbeddingTable load(const std::filesystem::path& path, std::uint64_t oov_seed = 0,
                             const std::function<bool(const std::string&)>& keep = nullptr);

  void add(const std::string& word, const std::vector<double>& vec);
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  bool contains(const std::string& word) const { return index_.count(word) > 0; }
  // Table row, or the OOV vector for unknown words.
  std::vector<double> lookup(const std::string& word) const;
  // T x d; throws on an empty word list.
  Tensor embed(const std::vector<std::string>& words) const;

 private:
  std::size_t dim_;
  std::uint64_t oov_seed_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
};

// One post ready for a neural model.
struct EncodedPost {
  std::string id;
  Tensor words;  // T x d
  // Row in the model's tunable vocabulary per word, 0 when not tunable.
  std::vector<std::size_t> tune_ids;
  Tensor target;  // 1 x d', mean of the target word vectors
  StanceLabel gold = StanceLabel::kNone;
};

class PostEncoder {
 public:
  // tunable_vocab lists the words whose vectors may be fine-tuned.
  PostEncoder(std::shared_ptr<const EmbeddingTable> table, std::vector<std::string> target_words,
              std::vector<std::string> tunable_vocab = {});

  EncodedPost encode(const std::string& id, const std::vector<std::string>& words,
                     StanceLabel gold = StanceLabel::kNone) const;
  const Tensor& target() const { return target_; }
  std::size_t tunable_size() const { return tunable_.size(); }

 private:
  std::shared_ptr<const EmbeddingTable> table_;
  Tensor target_;
  std::unordered_map<std::string, std::size_t> tunable_;
};

enum class ModelKind { kLstm, kCnn, kTan, kTanMinus };
std::string to_string(ModelKind k);
std::optional<ModelKind> parse_model_kind(std::string_view name);

struct ModelConfig {
  ModelKind kind = ModelKind::kTan;
  std::size_t embed_dim = 300;
  // Target vector width; equals embed_dim when 0.
  std::size_t target_dim = 0;
  std::size_t hidden = 128;
  std::vector<std::size_t> cnn_widths = {3, 4, 5};
  std::size_t cnn_filters = 100;
  // Rows of the fine-tuning offset table (PostEncoder::tunable_size()); 0 freezes embeddings.
  std::size_t tunable_vocab = 0;
  std::uint64_t init_seed = 1;
};

struct ForwardOptions {
  bool train = false;
  double dropout = 0.0;
  std::uint64_t dropout_seed = 0;
};

class NeuralModel {
 public:
  explicit NeuralModel(ModelConfig cfg);
  virtual ~NeuralModel() = default;
  NeuralModel(const NeuralModel&) = delete;
  NeuralModel& operator=(const NeuralModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ModelKind kind() const { return cfg_.kind; }

  // 1 x 3 class scores in order [Favor, Against, None].
  Var logits(Tape& tape, const EncodedPost& post, const ForwardOptions& opts = {});
  std::array<double, kNumLabels> probabilities(const EncodedPost& post);
  StanceLabel predict(const EncodedPost& post);

  std::vector<Parameter*> parameters();
  // Weights that receive the L2 penalty.
  std::vector<Parameter*> penalized();
  Parameter& head_weights() { return head_w_; }
  Parameter& head_bias() { return head_b_; }

  // Rescales each class column of the head so its squared norm is <= limit.
  void apply_norm_constraint(double sqr_norm_limit);
  // Clears gradient entries that must not move (the shared non-tunable
  // embedding offset row).
  void mask_gradients();

  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 protected:
  virtual Var summary(Tape& tape, Var words, const EncodedPost& post, const ForwardOptions& opts) = 0;
  virtual std::vector<Parameter*> body_parameters() = 0;
  void init_head(std::size_t in);
  Parameter make_param(const std::string& name, std::size_t rows, std::size_t cols);

  ModelConfig cfg_;
  std::mt19937_64 init_rng_;
  Parameter head_w_;
  Parameter head_b_;
  std::optional<Parameter> word_delta_;
};

struct LstmParams {
  Parameter wx;  // d x 4h, gate blocks [i, f, o, g]
  Parameter wh;  // h x 4h
  Parameter b;   // 1 x 4h
};

// Hidden states of a single-layer LSTM over the rows of x (T x h). reverse
// runs from the last row to the first; output rows stay aligned with input.
Var lstm_sequence(Tape& tape, Var x, LstmParams& p, bool reverse = false);

// a'_t = W_a e_t + b_a over the rows of words, with e_t = [x_t ; z] when a
// target row vector is given; returns softmax(a') as 1 x T. hidden must have
// as many rows as words.
Var tan_attention(Var hidden, Var words, const Var* target, Var w_a, Var b_a);

// Unidirectional LSTM; the last hidden state feeds the head.
class LstmModel : public NeuralModel {
 public:
  explicit LstmModel(ModelConfig cfg);

 protected:
  Var summary(Tape& tape, Var words, const EncodedPost& post, const ForwardOptions& opts) override;
  std::vector<Parameter*> body_parameters() override;

 private:
  LstmParams lstm_;
};

// Filters over each width, ReLU, max over time. Posts shorter than the widest
// filter are padded with zero rows.
class CnnModel : public NeuralModel {
 public:
  explicit CnnModel(ModelConfig cfg);
  std::size_t padded_length(std::size_t tokens) const;

 protected:
  Var summary(Tape& tape, Var words, const EncodedPost& post, const ForwardOptions& opts) override;
  std::vector<Parameter*> body_parameters() override;

 private:
  std::vector<Parameter> filters_;
  std::vector<Parameter> filter_bias_;
};

// BiLSTM with target-specific attention. Scores a'_t = W_a e_t + b_a where
// e_t = [x_t ; z] (kind kTan) or x_t (kind kTanMinus); a = softmax(a').
// The summary sum_t a_t h_t goes through ReLU and dropout into the head.
class TanModel : public NeuralModel {
 public:
  explicit TanModel(ModelConfig cfg);
  // TAN- copy of a TAN model: shares every parameter value and keeps the
  // first d rows of W_a.
  static std::unique_ptr<TanModel> minus_from(TanModel& tan);

  bool uses_target() const { return cfg_.kind == ModelKind::kTan; }
  // Attention weights (1 x T) for a post with an explicit target vector.
  Tensor attention(const EncodedPost& post, const Tensor& target);
  Var attention(Tape& tape, Var words, const Tensor& target);

  Parameter& attention_weights() { return w_a_; }
  Parameter& attention_bias() { return b_a_; }
  LstmParams& forward_lstm() { return fwd_; }
  LstmParams& backward_lstm() { return bwd_; }

 protected:
  Var summary(Tape& tape, Var words, const EncodedPost& post, const ForwardOptions& opts) override;
  std::vector<Parameter*> body_parameters() override;

 private:
  LstmParams fwd_;
  LstmParams bwd_;
  Parameter w_a_;  // (d + d') x 1 or d x 1
  Parameter b_a_;  // 1 x 1
};

std::unique_ptr<NeuralModel> make_model(const ModelConfig& cfg);

// max_t |a_t(z1) - a_t(z2)|
double check_attention_target_invariance(TanModel& model, const EncodedPost& post,
                                         const Tensor& target1, const Tensor& target2);

struct TheoremReport {
  std::size_t trials = 0;
  std::size_t posts_per_trial = 0;
  double max_attention_deviation = 0.0;
  // TAN with arbitrary W_az against the TAN- built from it.
  double max_output_deviation = 0.0;
  // TAN with W_az = 0 against TAN- sharing W_ax and b_a.
  double max_output_deviation_zeroed = 0.0;
  double min_attention_sum_error = 0.0;
  double max_attention_sum_error = 0.0;
};

struct TheoremSuiteConfig {
  std::size_t trials = 100;
  std::size_t posts_per_trial = 10;
  std::size_t embed_dim = 16;
  std::size_t hidden = 8;
  std::size_t max_tokens = 12;
  std::uint64_t seed = 1;
};

// Random initialisations, random posts and random target pairs.
TheoremReport run_theorem_suite(const TheoremSuiteConfig& cfg);

struct TrainSchedule {
  double learning_rate = 5e-4;
  std::size_t batch_size = 50;
  double dropout = 0.5;
  double l2 = 0.0;
  // The best validation epoch in [epochs_min, epochs_max] is kept.
  std::size_t epochs_min = 50;
  std::size_t epochs_max = 60;
  std::uint64_t seed = 1;
  // Learning rate multiplier applied after every epoch.
  double lr_decay = 1.0;
  // Squared norm limit on head columns; 0 disables it.
  double sqr_norm_limit = 0.0;
  bool record_train_loss = true;

  void validate() const;
  std::uint64_t hash() const;
};

struct TrainResult {
  std::vector<double> train_loss;         // mean eval-mode loss after each epoch
  std::vector<double> validation_metric;  // official metric after each epoch
  std::size_t best_epoch = 0;             // 1-based
};

// Called after each epoch (1-based) with the current model.
using EpochCallback = std::function<void(std::size_t epoch, NeuralModel& model)>;

TrainResult train(NeuralModel& model, const std::vector<EncodedPost>& train_set,
                  const std::vector<EncodedPost>& validation, const TrainSchedule& schedule,
                  const EpochCallback& on_epoch = nullptr);

// Mean cross-entropy with dropout off.
double mean_loss(NeuralModel& model, const std::vector<EncodedPost>& posts);

class Adam {
 public:
  Adam(std::vector<Parameter*> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(double lr);

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  double beta1_;
  double beta2_;
  double eps_;
  std::size_t t_ = 0;
};

void save_checkpoint(NeuralModel& model, std::uint64_t schedule_hash,
                     const std::filesystem::path& path);
std::unique_ptr<NeuralModel> load_checkpoint(const std::filesystem::path& path,
                                             std::uint64_t expected_schedule_hash);

}  // namespace stance

#endif  // STANCE_NEURAL_MODELS_H_
