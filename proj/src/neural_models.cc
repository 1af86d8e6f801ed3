#include "stance/neural_models.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "stance/error.h"
#include "stance/evaluation.h"
#include "stance/text_util.h"

namespace stance {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(splitmix64(splitmix64(a) ^ b) ^ c);
}

std::size_t argmax_first(const std::array<double, kNumLabels>& p) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumLabels; ++c) {
    if (p[c] > p[best]) best = c;
  }
  return best;
}

void copy_lstm(LstmParams& dst, const LstmParams& src) {
  dst.wx.value = src.wx.value;
  dst.wh.value = src.wh.value;
  dst.b.value = src.b.value;
}

}  // namespace

std::vector<double> oov_vector(const std::string& word, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(mix(fnv1a64(word), seed, 0x6f6f76));
  std::uniform_real_distribution<double> u(-0.25, 0.25);
  std::vector<double> v(dim);
  for (double& x : v) x = u(rng);
  return v;
}

EmbeddingTable::EmbeddingTable(std::size_t dim, std::uint64_t oov_seed) : dim_(dim), oov_seed_(oov_seed) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, std::uint64_t oov_seed,
                                    const std::function<bool(const std::string&)>& keep) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embeddings: " + path.string());
  std::optional<EmbeddingTable> table;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> vec;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> parts = split_whitespace(line);
    if (parts.empty()) continue;
    if (parts.size() < 2) throw ParseError(path.string(), lineno, "word without vector");
    vec.clear();
    for (std::size_t i = 1; i < parts.size(); ++i) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(), v);
      if (ec != std::errc() || ptr != parts[i].data() + parts[i].size() || !std::isfinite(v)) {
        throw ParseError(path.string(), lineno, "bad number '" + std::string(parts[i]) + "'");
      }
      vec.push_back(v);
    }
    if (!table) table.emplace(vec.size(), oov_seed);
    if (vec.size() != table->dim()) {
      throw ParseError(path.string(), lineno,
                       "dimension " + std::to_string(vec.size()) + ", expected " +
                           std::to_string(table->dim()));
    }
    const std::string word(parts[0]);
    if (table->contains(word) || (keep && !keep(word))) continue;
    table->add(word, vec);
  }
  if (!table) throw ValidationError("embedding file is empty: " + path.string());
  return std::move(*table);
}

void EmbeddingTable::add(const std::string& word, const std::vector<double>& vec) {
  if (vec.size() != dim_) {
    throw ValidationError("embedding for '" + word + "' has dimension " + std::to_string(vec.size()) +
                          ", expected " + std::to_string(dim_));
  }
  if (contains(word)) throw ValidationError("duplicate embedding for '" + word + "'");
  index_.emplace(word, words_.size());
  words_.push_back(word);
  data_.insert(data_.end(), vec.begin(), vec.end());
}

std::vector<double> EmbeddingTable::lookup(const std::string& word) const {
  const auto it = index_.find(word);
  if (it == index_.end()) return oov_vector(word, dim_, oov_seed_);
  const auto first = data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_);
  return {first, first + static_cast<std::ptrdiff_t>(dim_)};
}

Tensor EmbeddingTable::embed(const std::vector<std::string>& words) const {
  if (words.empty()) throw ValidationError("cannot embed an empty token list");
  Tensor out(words.size(), dim_);
  for (std::size_t r = 0; r < words.size(); ++r) {
    const std::vector<double> v = lookup(words[r]);
    std::copy(v.begin(), v.end(), out.row_ptr(r));
  }
  return out;
}

PostEncoder::PostEncoder(std::shared_ptr<const EmbeddingTable> table,
                         std::vector<std::string> target_words,
                         std::vector<std::string> tunable_vocab)
    : table_(std::move(table)) {
  if (!table_) throw ConfigError("post encoder needs an embedding table");
  if (target_words.empty()) throw ValidationError("target needs at least one word");
  const Tensor z = table_->embed(target_words);
  target_ = Tensor(1, z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t j = 0; j < z.cols(); ++j) target_[j] += z(r, j);
  }
  for (double& v : target_.values()) v /= static_cast<double>(z.rows());
  for (const std::string& w : tunable_vocab) tunable_.emplace(w, tunable_.size() + 1);
}

EncodedPost PostEncoder::encode(const std::string& id, const std::vector<std::string>& words,
                                StanceLabel gold) const {
  if (words.empty()) throw ValidationError("post " + id + " has no tokens");
  EncodedPost p;
  p.id = id;
  p.words = table_->embed(words);
  p.target = target_;
  p.gold = gold;
  for (const std::string& w : words) {
    const auto it = tunable_.find(w);
    p.tune_ids.push_back(it == tunable_.end() ? 0 : it->second);
  }
  return p;
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kLstm: return "lstm";
    case ModelKind::kCnn: return "cnn";
    case ModelKind::kTan: return "tan";
    case ModelKind::kTanMinus: return "tan-";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  const std::string n = to_lower_ascii(trim(name));
  if (n == "lstm") return ModelKind::kLstm;
  if (n == "cnn") return ModelKind::kCnn;
  if (n == "tan") return ModelKind::kTan;
  if (n == "tan-" || n == "tan_minus" || n == "tanminus") return ModelKind::kTanMinus;
  return std::nullopt;
}

NeuralModel::NeuralModel(ModelConfig cfg) : cfg_(std::move(cfg)), init_rng_(cfg_.init_seed) {
  if (cfg_.embed_dim == 0 || cfg_.hidden == 0) throw ConfigError("model dimensions must be positive");
  if (cfg_.target_dim == 0) cfg_.target_dim = cfg_.embed_dim;
  if (cfg_.tunable_vocab > 0) {
    word_delta_.emplace("word_delta", Tensor(cfg_.tunable_vocab + 1, cfg_.embed_dim));
  }
}

Parameter NeuralModel::make_param(const std::string& name, std::size_t rows, std::size_t cols) {
  Parameter p(name, Tensor(rows, cols));
  init_glorot(p, init_rng_);
  return p;
}

void NeuralModel::init_head(std::size_t in) {
  head_w_ = make_param("head_w", in, kNumLabels);
  head_b_ = Parameter("head_b", Tensor(1, kNumLabels));
}

Var NeuralModel::logits(Tape& tape, const EncodedPost& post, const ForwardOptions& opts) {
  if (post.words.empty()) throw ValidationError("post " + post.id + " has no tokens");
  if (post.words.cols() != cfg_.embed_dim) {
    throw ShapeError("post " + post.id + " embedded as " + post.words.shape_string() +
                     " for a model with d = " + std::to_string(cfg_.embed_dim));
  }
  Var x = tape.constant(post.words);
  if (word_delta_) {
    if (post.tune_ids.size() != post.words.rows()) {
      throw ShapeError("post " + post.id + ": tunable ids do not match token count");
    }
    x = add(x, gather_rows(tape.param(*word_delta_), post.tune_ids));
  }
  Var s = summary(tape, x, post, opts);
  return add_row(matmul(s, tape.param(head_w_)), tape.param(head_b_));
}

std::array<double, kNumLabels> NeuralModel::probabilities(const EncodedPost& post) {
  Tape tape;
  const Tensor p = softmax_rows(logits(tape, post).value());
  return {p[0], p[1], p[2]};
}

StanceLabel NeuralModel::predict(const EncodedPost& post) {
  return kAllLabels[argmax_first(probabilities(post))];
}

std::vector<Parameter*> NeuralModel::parameters() {
  std::vector<Parameter*> out = body_parameters();
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  if (word_delta_) out.push_back(&*word_delta_);
  return out;
}

std::vector<Parameter*> NeuralModel::penalized() { return {&head_w_}; }

void NeuralModel::apply_norm_constraint(double sqr_norm_limit) {
  if (!(sqr_norm_limit > 0.0)) throw ConfigError("squared norm limit must be positive");
  Tensor& w = head_w_.value;
  for (std::size_t c = 0; c < w.cols(); ++c) {
    double sq = 0.0;
    for (std::size_t r = 0; r < w.rows(); ++r) sq += w(r, c) * w(r, c);
    if (sq <= sqr_norm_limit) continue;
    const double s = std::sqrt(sqr_norm_limit / sq);
    for (std::size_t r = 0; r < w.rows(); ++r) w(r, c) *= s;
  }
}

void NeuralModel::mask_gradients() {
  if (!word_delta_) return;
  Tensor& g = word_delta_->grad;
  if (g.empty()) return;
  std::fill(g.row_ptr(0), g.row_ptr(0) + g.cols(), 0.0);
}

std::vector<Tensor> NeuralModel::snapshot() const {
  std::vector<Tensor> out;
  for (Parameter* p : const_cast<NeuralModel*>(this)->parameters()) out.push_back(p->value);
  return out;
}

void NeuralModel::restore(const std::vector<Tensor>& values) {
  const std::vector<Parameter*> ps = parameters();
  if (values.size() != ps.size()) throw ShapeError("snapshot has the wrong parameter count");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!values[i].same_shape(ps[i]->value)) {
      throw ShapeError("snapshot shape " + values[i].shape_string() + " for parameter " +
                       ps[i]->name + " " + ps[i]->value.shape_string());
    }
    ps[i]->value = values[i];
  }
}

Var lstm_sequence(Tape& tape, Var x, LstmParams& p, bool reverse) {
  const std::size_t n = x.rows();
  const std::size_t h = p.wh.value.rows();
  if (p.wx.value.rows() != x.cols() || p.wx.value.cols() != 4 * h) {
    throw ShapeError("lstm input " + x.value().shape_string() + " for W_x " + p.wx.value.shape_string());
  }
  std::vector<std::size_t> rev(n);
  std::iota(rev.rbegin(), rev.rend(), 0);
  Var xs = reverse ? gather_rows(x, rev) : x;
  Var zx = add_row(matmul(xs, tape.param(p.wx)), tape.param(p.b));
  Var wh = tape.param(p.wh);
  std::vector<Var> hs;
  Var hprev{};
  Var cprev{};
  for (std::size_t t = 0; t < n; ++t) {
    Var z = slice_rows(zx, t, t + 1);
    if (t > 0) z = add(z, matmul(hprev, wh));
    Var i = sigmoid(slice_cols(z, 0, h));
    Var o = sigmoid(slice_cols(z, 2 * h, 3 * h));
    Var g = tanh(slice_cols(z, 3 * h, 4 * h));
    Var c = multiply(i, g);
    if (t > 0) c = add(multiply(sigmoid(slice_cols(z, h, 2 * h)), cprev), c);
    hprev = multiply(o, tanh(c));
    cprev = c;
    hs.push_back(hprev);
  }
  Var out = n == 1 ? hs.front() : concat(hs, 0);
  return reverse ? gather_rows(out, rev) : out;
}

namespace {

LstmParams make_lstm(const std::string& prefix, std::size_t in, std::size_t h, std::mt19937_64& rng) {
  LstmParams p{Parameter(prefix + "_wx", Tensor(in, 4 * h)), Parameter(prefix + "_wh", Tensor(h, 4 * h)),
               Parameter(prefix + "_b", Tensor(1, 4 * h))};
  init_glorot(p.wx, rng);
  init_glorot(p.wh, rng);
  // Forget gate starts open.
  for (std::size_t j = h; j < 2 * h; ++j) p.b.value[j] = 1.0;
  return p;
}

}  // namespace

LstmModel::LstmModel(ModelConfig cfg) : NeuralModel(std::move(cfg)) {
  cfg_.kind = ModelKind::kLstm;
  lstm_ = make_lstm("lstm", cfg_.embed_dim, cfg_.hidden, init_rng_);
  init_head(cfg_.hidden);
}

Var LstmModel::summary(Tape& tape, Var words, const EncodedPost&, const ForwardOptions& opts) {
  Var h = lstm_sequence(tape, words, lstm_);
  Var last = slice_rows(h, words.rows() - 1, words.rows());
  return dropout(last, opts.dropout, opts.dropout_seed, opts.train);
}

std::vector<Parameter*> LstmModel::body_parameters() { return {&lstm_.wx, &lstm_.wh, &lstm_.b}; }

CnnModel::CnnModel(ModelConfig cfg) : NeuralModel(std::move(cfg)) {
  cfg_.kind = ModelKind::kCnn;
  if (cfg_.cnn_widths.empty() || cfg_.cnn_filters == 0) throw ConfigError("cnn needs filters");
  for (std::size_t w : cfg_.cnn_widths) {
    if (w == 0) throw ConfigError("cnn filter width must be positive");
    filters_.push_back(make_param("conv" + std::to_string(w) + "_w", w * cfg_.embed_dim, cfg_.cnn_filters));
    filter_bias_.emplace_back("conv" + std::to_string(w) + "_b", Tensor(1, cfg_.cnn_filters));
  }
  init_head(cfg_.cnn_filters * cfg_.cnn_widths.size());
}

std::size_t CnnModel::padded_length(std::size_t tokens) const {
  return std::max(tokens, *std::max_element(cfg_.cnn_widths.begin(), cfg_.cnn_widths.end()));
}

Var CnnModel::summary(Tape& tape, Var words, const EncodedPost&, const ForwardOptions& opts) {
  const std::size_t len = padded_length(words.rows());
  Var x = words;
  if (len > words.rows()) x = concat({x, tape.constant(Tensor(len - words.rows(), words.cols()))}, 0);
  std::vector<Var> pooled;
  for (std::size_t k = 0; k < filters_.size(); ++k) {
    Var conv = add_row(matmul(unfold(x, cfg_.cnn_widths[k]), tape.param(filters_[k])),
                       tape.param(filter_bias_[k]));
    pooled.push_back(max_over_time(relu(conv)));
  }
  Var s = pooled.size() == 1 ? pooled.front() : concat(pooled, 1);
  return dropout(s, opts.dropout, opts.dropout_seed, opts.train);
}

std::vector<Parameter*> CnnModel::body_parameters() {
  std::vector<Parameter*> out;
  for (std::size_t k = 0; k < filters_.size(); ++k) {
    out.push_back(&filters_[k]);
    out.push_back(&filter_bias_[k]);
  }
  return out;
}

Var tan_attention(Var hidden, Var words, const Var* target, Var w_a, Var b_a) {
  const std::size_t n = words.rows();
  if (hidden.rows() != n) {
    throw ShapeError("attention: " + std::to_string(hidden.rows()) + " hidden states for " +
                     std::to_string(n) + " words");
  }
  Var e = words;
  if (target) {
    if (target->rows() != 1) throw ShapeError("attention: target must be a row vector");
    e = concat({words, repeat_rows(*target, n)}, 1);
  }
  Var scores = add_row(matmul(e, w_a), b_a);
  return softmax(transpose(scores));
}

TanModel::TanModel(ModelConfig cfg) : NeuralModel(std::move(cfg)) {
  if (cfg_.kind != ModelKind::kTan && cfg_.kind != ModelKind::kTanMinus) cfg_.kind = ModelKind::kTan;
  fwd_ = make_lstm("fwd", cfg_.embed_dim, cfg_.hidden, init_rng_);
  bwd_ = make_lstm("bwd", cfg_.embed_dim, cfg_.hidden, init_rng_);
  const std::size_t in = cfg_.embed_dim + (uses_target() ? cfg_.target_dim : 0);
  w_a_ = make_param("w_a", in, 1);
  b_a_ = Parameter("b_a", Tensor(1, 1));
  init_head(2 * cfg_.hidden);
}

std::unique_ptr<TanModel> TanModel::minus_from(TanModel& tan) {
  ModelConfig cfg = tan.cfg_;
  cfg.kind = ModelKind::kTanMinus;
  auto m = std::make_unique<TanModel>(cfg);
  copy_lstm(m->fwd_, tan.fwd_);
  copy_lstm(m->bwd_, tan.bwd_);
  m->head_w_.value = tan.head_w_.value;
  m->head_b_.value = tan.head_b_.value;
  m->b_a_.value = tan.b_a_.value;
  if (tan.word_delta_) m->word_delta_->value = tan.word_delta_->value;
  for (std::size_t r = 0; r < cfg.embed_dim; ++r) m->w_a_.value[r] = tan.w_a_.value[r];
  return m;
}

Var TanModel::attention(Tape& tape, Var words, const Tensor& target) {
  if (uses_target() && target.cols() != cfg_.target_dim) {
    throw ShapeError("target vector " + target.shape_string() + " for target dimension " +
                     std::to_string(cfg_.target_dim));
  }
  Var z = uses_target() ? tape.constant(target) : Var{};
  return tan_attention(words, words, uses_target() ? &z : nullptr, tape.param(w_a_), tape.param(b_a_));
}

Tensor TanModel::attention(const EncodedPost& post, const Tensor& target) {
  Tape tape;
  return attention(tape, tape.constant(post.words), target).value();
}

Var TanModel::summary(Tape& tape, Var words, const EncodedPost& post, const ForwardOptions& opts) {
  Var h = concat({lstm_sequence(tape, words, fwd_), lstm_sequence(tape, words, bwd_, true)}, 1);
  if (uses_target() && post.target.cols() != cfg_.target_dim) {
    throw ShapeError("post " + post.id + ": target vector " + post.target.shape_string() +
                     " for target dimension " + std::to_string(cfg_.target_dim));
  }
  Var z = uses_target() ? tape.constant(post.target) : Var{};
  Var a = tan_attention(h, words, uses_target() ? &z : nullptr, tape.param(w_a_), tape.param(b_a_));
  Var s = relu(matmul(a, h));
  return dropout(s, opts.dropout, opts.dropout_seed, opts.train);
}

std::vector<Parameter*> TanModel::body_parameters() {
  return {&fwd_.wx, &fwd_.wh, &fwd_.b, &bwd_.wx, &bwd_.wh, &bwd_.b, &w_a_, &b_a_};
}

std::unique_ptr<NeuralModel> make_model(const ModelConfig& cfg) {
  switch (cfg.kind) {
    case ModelKind::kLstm: return std::make_unique<LstmModel>(cfg);
    case ModelKind::kCnn: return std::make_unique<CnnModel>(cfg);
    case ModelKind::kTan:
    case ModelKind::kTanMinus: return std::make_unique<TanModel>(cfg);
  }
  throw ConfigError("unknown model kind");
}

double check_attention_target_invariance(TanModel& model, const EncodedPost& post,
                                         const Tensor& target1, const Tensor& target2) {
  const Tensor a = model.attention(post, target1);
  const Tensor b = model.attention(post, target2);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

TheoremReport run_theorem_suite(const TheoremSuiteConfig& cfg) {
  TheoremReport rep;
  rep.trials = cfg.trials;
  rep.posts_per_trial = cfg.posts_per_trial;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> len(1, cfg.max_tokens);
  auto random_tensor = [&](std::size_t r, std::size_t c, double scale) {
    Tensor t(r, c);
    for (double& v : t.values()) v = scale * normal(rng);
    return t;
  };
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    ModelConfig mc;
    mc.kind = ModelKind::kTan;
    mc.embed_dim = cfg.embed_dim;
    mc.hidden = cfg.hidden;
    mc.init_seed = mix(cfg.seed, trial, 0x7461);
    TanModel tan(mc);
    // Spread W_a, b_a and the head well beyond the initialisation scale.
    tan.attention_weights().value = random_tensor(2 * cfg.embed_dim, 1, 2.0);
    tan.attention_bias().value = random_tensor(1, 1, 2.0);
    tan.head_weights().value = random_tensor(2 * cfg.hidden, kNumLabels, 1.0);
    auto minus = TanModel::minus_from(tan);

    TanModel zeroed(mc);
    zeroed.restore(tan.snapshot());
    for (std::size_t r = cfg.embed_dim; r < 2 * cfg.embed_dim; ++r) zeroed.attention_weights().value[r] = 0.0;

    for (std::size_t k = 0; k < cfg.posts_per_trial; ++k) {
      EncodedPost post;
      post.id = std::to_string(trial) + "-" + std::to_string(k);
      post.words = random_tensor(len(rng), cfg.embed_dim, 1.0);
      post.target = random_tensor(1, cfg.embed_dim, 3.0);
      const Tensor other = random_tensor(1, cfg.embed_dim, 3.0);

      rep.max_attention_deviation = std::max(
          rep.max_attention_deviation, check_attention_target_invariance(tan, post, post.target, other));
      const Tensor a = tan.attention(post, post.target);
      const double sum_err = std::abs(std::accumulate(a.values().begin(), a.values().end(), 0.0) - 1.0);
      rep.max_attention_sum_error = std::max(rep.max_attention_sum_error, sum_err);

      const auto p_tan = tan.probabilities(post);
      const auto p_minus = minus->probabilities(post);
      const auto p_zero = zeroed.probabilities(post);
      for (std::size_t c = 0; c < kNumLabels; ++c) {
        rep.max_output_deviation = std::max(rep.max_output_deviation, std::abs(p_tan[c] - p_minus[c]));
        rep.max_output_deviation_zeroed =
            std::max(rep.max_output_deviation_zeroed, std::abs(p_zero[c] - p_minus[c]));
      }
    }
  }
  return rep;
}

void TrainSchedule::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
  if (epochs_min == 0 || epochs_min > epochs_max) throw ConfigError("epoch range must be nonempty");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("learning rate decay must be in (0, 1]");
  if (!(sqr_norm_limit >= 0.0)) throw ConfigError("squared norm limit must be non-negative");
}

std::uint64_t TrainSchedule::hash() const {
  std::ostringstream s;
  s << format_double(learning_rate) << '|' << batch_size << '|' << format_double(dropout) << '|'
    << format_double(l2) << '|' << epochs_min << '|' << epochs_max << '|' << seed << '|'
    << format_double(lr_decay) << '|' << format_double(sqr_norm_limit);
  return fnv1a64(s.str());
}

double mean_loss(NeuralModel& model, const std::vector<EncodedPost>& posts) {
  if (posts.empty()) throw ValidationError("mean loss over an empty set");
  double total = 0.0;
  for (const EncodedPost& p : posts) {
    Tape tape;
    total += softmax_cross_entropy(model.logits(tape, p), {index_of(p.gold)}).value()[0];
  }
  return total / static_cast<double>(posts.size());
}

Adam::Adam(std::vector<Parameter*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (!p.trainable || p.grad.empty()) continue;
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

TrainResult train(NeuralModel& model, const std::vector<EncodedPost>& train_set,
                  const std::vector<EncodedPost>& validation, const TrainSchedule& schedule,
                  const EpochCallback& on_epoch) {
  schedule.validate();
  if (train_set.empty()) throw ValidationError("training set is empty");
  const std::vector<Parameter*> params = model.parameters();
  Adam opt(params);
  std::mt19937_64 rng(schedule.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const double n = static_cast<double>(train_set.size());
  double lr = schedule.learning_rate;

  std::vector<StanceLabel> val_gold;
  for (const EncodedPost& p : validation) val_gold.push_back(p.gold);

  TrainResult result;
  std::vector<Tensor> best;
  double best_metric = -std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= schedule.epochs_max; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      const std::size_t end = std::min(order.size(), start + schedule.batch_size);
      const double b = static_cast<double>(end - start);
      for (Parameter* p : params) p->zero_grad();
      Tape tape;
      std::vector<Var> terms;
      for (std::size_t k = start; k < end; ++k) {
        const EncodedPost& post = train_set[order[k]];
        const ForwardOptions fo{true, schedule.dropout, mix(schedule.seed, epoch, order[k])};
        terms.push_back(softmax_cross_entropy(model.logits(tape, post, fo), {index_of(post.gold)}));
      }
      if (schedule.l2 > 0.0) {
        // Penalty of (l2 / 2) |W|^2 per pass over the data, spread over batches.
        for (Parameter* p : model.penalized()) {
          terms.push_back(scale(sum_squares(tape.param(*p)), 0.5 * schedule.l2 * b / n));
        }
      }
      Var total = terms.front();
      for (std::size_t k = 1; k < terms.size(); ++k) total = add(total, terms[k]);
      tape.backward(scale(total, 1.0 / b));
      model.mask_gradients();
      opt.step(lr);
      if (schedule.sqr_norm_limit > 0.0) model.apply_norm_constraint(schedule.sqr_norm_limit);
    }
    lr *= schedule.lr_decay;

    if (schedule.record_train_loss) result.train_loss.push_back(mean_loss(model, train_set));
    if (!validation.empty()) {
      std::vector<StanceLabel> pred;
      for (const EncodedPost& p : validation) pred.push_back(model.predict(p));
      const double metric = macro_f1_favor_against(pred, val_gold).official;
      result.validation_metric.push_back(metric);
      if (epoch >= schedule.epochs_min && metric > best_metric) {
        best_metric = metric;
        best = model.snapshot();
        result.best_epoch = epoch;
      }
    }
    if (on_epoch) on_epoch(epoch, model);
  }
  if (!best.empty()) {
    model.restore(best);
  } else {
    result.best_epoch = schedule.epochs_max;
  }
  return result;
}

void save_checkpoint(NeuralModel& model, std::uint64_t schedule_hash, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint: " + path.string());
  const ModelConfig& c = model.config();
  out << "stance-checkpoint 1\n";
  out << "schedule_hash " << hex64(schedule_hash) << '\n';
  out << "kind " << to_string(c.kind) << '\n';
  out << "embed_dim " << c.embed_dim << '\n';
  out << "target_dim " << c.target_dim << '\n';
  out << "hidden " << c.hidden << '\n';
  out << "cnn_widths " << c.cnn_widths.size();
  for (std::size_t w : c.cnn_widths) out << ' ' << w;
  out << '\n';
  out << "cnn_filters " << c.cnn_filters << '\n';
  out << "tunable_vocab " << c.tunable_vocab << '\n';
  out << "init_seed " << c.init_seed << '\n';
  const std::vector<Parameter*> ps = model.parameters();
  out << "params " << ps.size() << '\n';
  for (const Parameter* p : ps) {
    out << p->name << '\n';
    write_tensor(out, p->value);
  }
}

std::unique_ptr<NeuralModel> load_checkpoint(const std::filesystem::path& path,
                                             std::uint64_t expected_schedule_hash) {
  std::ifstream in(path, std::ios::binary);
  const std::string src = path.string();
  if (!in) throw ValidationError("cannot open checkpoint: " + src);
  auto expect = [&](const std::string& key) {
    std::string k;
    if (!(in >> k) || k != key) throw ValidationError(src + ": expected '" + key + "'");
  };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "stance-checkpoint" || version != 1) {
    throw ValidationError(src + ": not a checkpoint file (version 1)");
  }
  std::string hash;
  expect("schedule_hash");
  in >> hash;
  if (hash != hex64(expected_schedule_hash)) {
    throw ValidationError(src + ": schedule hash " + hash + " does not match " + hex64(expected_schedule_hash));
  }
  ModelConfig c;
  std::string kind;
  expect("kind");
  in >> kind;
  const auto k = parse_model_kind(kind);
  if (!k) throw ValidationError(src + ": unknown model kind '" + kind + "'");
  c.kind = *k;
  expect("embed_dim");
  in >> c.embed_dim;
  expect("target_dim");
  in >> c.target_dim;
  expect("hidden");
  in >> c.hidden;
  expect("cnn_widths");
  std::size_t nw = 0;
  in >> nw;
  c.cnn_widths.assign(nw, 0);
  for (std::size_t& w : c.cnn_widths) in >> w;
  expect("cnn_filters");
  in >> c.cnn_filters;
  expect("tunable_vocab");
  in >> c.tunable_vocab;
  expect("init_seed");
  in >> c.init_seed;
  if (!in) throw ValidationError(src + ": malformed model configuration");
  auto model = make_model(c);
  expect("params");
  std::size_t np = 0;
  in >> np;
  const std::vector<Parameter*> ps = model->parameters();
  if (np != ps.size()) throw ValidationError(src + ": parameter count mismatch");
  for (Parameter* p : ps) {
    std::string name;
    in >> name;
    if (name != p->name) throw ValidationError(src + ": expected parameter " + p->name + ", found " + name);
    Tensor t = read_tensor(in);
    if (!t.same_shape(p->value)) {
      throw ValidationError(src + ": parameter " + name + " has shape " + t.shape_string());
    }
    p->value = std::move(t);
  }
  return model;
}

}  // namespace stance
