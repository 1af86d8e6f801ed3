#include "stance/pipeline.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "stance/ensemble_vote.h"
#include "stance/error.h"
#include "stance/evaluation.h"
#include "stance/linear_svm.h"
#include "stance/text_util.h"

namespace stance {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

Resources load_resources(const DataConfig& data) {
  Resources r;
  r.normalization = NormalizationLexicon::load(data.normalization_lexicon);
  r.frequency = UnigramFrequencyTable::load(data.frequency_table);
  r.stopwords = load_stopwords(data.stopwords);
  r.features.lexicon = std::make_shared<SubjectivityLexicon>(SubjectivityLexicon::load(data.subjectivity_lexicon));
  r.features.tagger = std::make_shared<CoarsePosTagger>(CoarsePosTagger::load(data.pos_dictionary));
  r.features.stopwords = r.stopwords;
  return r;
}

std::map<std::string, TopicDataset> load_datasets(const RunConfig& cfg) {
  std::map<std::string, TopicDataset> all;
  const DataConfig& d = cfg.data;
  if (d.semeval_train && d.semeval_test) {
    all = load_semeval_pair(*d.semeval_train, *d.semeval_test);
  } else if (d.semeval_train) {
    all = load_semeval(*d.semeval_train, Split::kTrain);
  } else if (d.semeval_test) {
    all = load_semeval(*d.semeval_test, Split::kTest);
  }
  for (const MpchiSource& src : d.mpchi) {
    if (all.count(src.format.topic)) throw ConfigError("topic " + src.format.topic + " is loaded twice");
    all[src.format.topic] = load_mpchi(src.path, src.format, d.mpchi_split, src.manifest);
  }
  if (all.empty()) throw ConfigError("no dataset configured (set data.semeval_train/semeval_test or data.mpchi)");
  if (cfg.topics.empty()) return all;
  std::map<std::string, TopicDataset> picked;
  for (const std::string& t : cfg.topics) {
    const auto it = all.find(t);
    if (it == all.end()) throw ConfigError("topic '" + t + "' is not present in the configured data");
    picked[t] = it->second;
  }
  return picked;
}

PreprocessConfig make_preprocess_config(const RunConfig& cfg, PreprocessMode mode,
                                        const std::set<std::string>& stopwords) {
  PreprocessConfig p;
  p.mode = mode;
  p.microblog = cfg.preprocess.microblog;
  p.apply_normalization = cfg.preprocess.normalization;
  p.apply_hashtag_split = cfg.preprocess.hashtag_split;
  p.drop_semst = cfg.preprocess.drop_semst;
  if (mode == PreprocessMode::kClassical) p.stopwords = stopwords;
  return p;
}

std::string format_stats(const std::map<std::string, TopicDataset>& datasets) {
  std::ostringstream out;
  out << "topic\ttrain_favor\ttrain_against\ttrain_none\ttest_favor\ttest_against\ttest_none\n";
  for (const auto& [topic, ds] : datasets) {
    const DatasetStats st = dataset_stats(ds);
    out << topic;
    for (const ClassCounts* c : {&st.train, &st.test}) {
      for (StanceLabel l : kAllLabels) out << '\t' << (*c)[l];
    }
    out << '\n';
  }
  return out.str();
}

Session::Session(RunConfig cfg) : cfg_(std::move(cfg)) {}

const Resources& Session::resources() {
  if (!resources_) resources_ = load_resources(cfg_.data);
  return *resources_;
}

const std::map<std::string, TopicDataset>& Session::datasets() {
  if (!datasets_) datasets_ = load_datasets(cfg_);
  return *datasets_;
}

const TopicDataset& Session::dataset(const std::string& topic) {
  const auto& all = datasets();
  const auto it = all.find(topic);
  if (it == all.end()) throw ConfigError("topic '" + topic + "' is not loaded");
  return it->second;
}

std::vector<std::string> Session::topics() {
  std::vector<std::string> out;
  for (const auto& [t, ds] : datasets()) out.push_back(t);
  return out;
}

TokenSequence Session::tokens(std::string_view text, PreprocessMode mode) {
  const Resources& r = resources();
  return preprocess_text(text, make_preprocess_config(cfg_, mode, r.stopwords), r.normalization,
                         r.frequency);
}

TokenSequence Session::tokens(const Post& post, PreprocessMode mode) {
  return tokens(post.text, mode);
}

std::vector<std::string> Session::target_words(const std::string& target) {
  std::vector<std::string> w = words(tokens(target, PreprocessMode::kEmbedding));
  if (w.empty()) w.push_back(to_lower_ascii(target));
  return w;
}

std::shared_ptr<const EmbeddingTable> Session::embeddings() {
  if (embeddings_) return embeddings_;
  if (!cfg_.data.embeddings) {
    embeddings_ = std::make_shared<EmbeddingTable>(cfg_.neural.embed_dim, cfg_.seed);
    return embeddings_;
  }
  // Only the corpus vocabulary is kept in memory; a word's vector does not
  // depend on which other words are kept.
  std::set<std::string> vocab;
  for (const auto& [topic, ds] : datasets()) {
    for (const std::string& w : target_words(ds.target)) vocab.insert(w);
    for (const auto* split : {&ds.train, &ds.test}) {
      for (const Post& p : *split) {
        for (const std::string& w : words(tokens(p, PreprocessMode::kEmbedding))) vocab.insert(w);
      }
    }
  }
  embeddings_ = std::make_shared<EmbeddingTable>(EmbeddingTable::load(
      *cfg_.data.embeddings, cfg_.seed, [&](const std::string& w) { return vocab.count(w) > 0; }));
  return embeddings_;
}

fs::path Session::output_path(const std::string& sub, const std::string& name) const {
  const fs::path dir = cfg_.output_dir / sub;
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::string> Session::stamp(const std::string& topic, ModelId m) const {
  return {cfg_.stamp(), "model=" + model_name(m), "topic=" + topic};
}

ordered_json to_json(const Hyperparameters& h, ModelId m) {
  if (neural_kind(m)) {
    const TrainSchedule& s = h.schedule;
    return {{"learning_rate", s.learning_rate}, {"batch_size", s.batch_size},
            {"dropout", s.dropout},             {"l2", s.l2},
            {"epochs_min", s.epochs_min},       {"epochs_max", s.epochs_max},
            {"lr_decay", s.lr_decay},           {"sqr_norm_limit", s.sqr_norm_limit},
            {"seed", s.seed}};
  }
  return {{"lambda", h.svm.lambda},
          {"epochs", h.svm.epochs},
          {"gamma", h.svm.gamma},
          {"class_weighting", h.svm.class_weighting},
          {"seed", h.svm.seed}};
}

namespace {

std::vector<StanceLabel> gold_of(const std::vector<Post>& posts) {
  std::vector<StanceLabel> g;
  for (const Post& p : posts) g.push_back(p.gold);
  return g;
}

std::vector<std::string> ids_of(const std::vector<Post>& posts) {
  std::vector<std::string> ids;
  for (const Post& p : posts) ids.push_back(p.id);
  return ids;
}

// ---- SVM models ----

struct TokenizedSplit {
  std::vector<TokenSequence> tokens;
  std::vector<FeatureInput> inputs;
};

TokenizedSplit tokenize_split(Session& s, const std::vector<Post>& posts) {
  TokenizedSplit t;
  t.tokens.reserve(posts.size());
  for (const Post& p : posts) t.tokens.push_back(s.tokens(p, PreprocessMode::kClassical));
  for (std::size_t i = 0; i < posts.size(); ++i) t.inputs.push_back({&t.tokens[i], posts[i].text});
  return t;
}

std::unique_ptr<FeaturePipeline> fit_sen_pipeline(Session& s, const std::string& target,
                                                  const TokenizedSplit& train) {
  auto pipe = std::make_unique<FeaturePipeline>(sen_feature_set(), s.resources().features, target);
  pipe->fit(train.inputs);
  return pipe;
}

LinearModel train_sen(const FeaturePipeline& pipe, const TokenizedSplit& train,
                      const std::vector<Post>& posts, const Hyperparameters& h) {
  std::vector<FeatureVector> xs;
  for (const FeatureInput& in : train.inputs) xs.push_back(pipe.transform(in));
  LinearModel m = train_one_vs_rest(xs, gold_of(posts), h.svm);
  m.feature_hash = pipe.hash();
  return m;
}

std::vector<StanceLabel> predict_sen(Session& s, const FeaturePipeline& pipe, const LinearModel& m,
                                     const std::vector<Post>& eval) {
  const TokenizedSplit t = tokenize_split(s, eval);
  std::vector<StanceLabel> out;
  for (const FeatureInput& in : t.inputs) out.push_back(predict(m, pipe.transform(in)));
  return out;
}

std::vector<CascadeExample> cascade_examples(const TokenizedSplit& t, const std::vector<Post>& posts) {
  std::vector<CascadeExample> ex;
  for (std::size_t i = 0; i < posts.size(); ++i) ex.push_back({&t.tokens[i], posts[i].text, posts[i].gold});
  return ex;
}

CascadeConfig cascade_config(const Hyperparameters& h) {
  CascadeConfig c;
  c.stage1_svm = h.svm;
  c.stage2_svm = h.svm;
  return c;
}

std::vector<StanceLabel> predict_cascade(Session& s, const CascadeModel& m, const std::vector<Post>& eval) {
  const TokenizedSplit t = tokenize_split(s, eval);
  std::vector<StanceLabel> out;
  for (const CascadeExample& ex : cascade_examples(t, eval)) out.push_back(cascade_predict(m, ex));
  return out;
}

// ---- Neural models ----

struct NeuralSetup {
  ModelConfig model;
  std::vector<EncodedPost> train;
  std::vector<EncodedPost> eval;
};

NeuralSetup prepare_neural(Session& s, const std::string& target, ModelId m,
                           const std::vector<Post>& train, const std::vector<Post>& eval,
                           std::uint64_t seed) {
  const auto table = s.embeddings();
  std::vector<std::vector<std::string>> train_words;
  std::set<std::string> vocab;
  for (const Post& p : train) {
    train_words.push_back(words(s.tokens(p, PreprocessMode::kEmbedding)));
    vocab.insert(train_words.back().begin(), train_words.back().end());
  }
  std::vector<std::string> tunable;
  if (s.config().neural.fine_tune) tunable.assign(vocab.begin(), vocab.end());
  const PostEncoder encoder(table, s.target_words(target), tunable);

  // Posts that preprocess to nothing still need one row.
  auto encode = [&](const Post& p, std::vector<std::string> w) {
    if (w.empty()) w.push_back("<empty>");
    return encoder.encode(p.id, w, p.gold);
  };
  NeuralSetup setup;
  for (std::size_t i = 0; i < train.size(); ++i) setup.train.push_back(encode(train[i], train_words[i]));
  for (const Post& p : eval) setup.eval.push_back(encode(p, words(s.tokens(p, PreprocessMode::kEmbedding))));

  const NeuralOptions& n = s.config().neural;
  setup.model.kind = *neural_kind(m);
  setup.model.embed_dim = table->dim();
  setup.model.hidden = n.hidden;
  setup.model.cnn_widths = n.cnn_widths;
  setup.model.cnn_filters = n.cnn_filters;
  setup.model.tunable_vocab = encoder.tunable_size();
  setup.model.init_seed = seed;
  return setup;
}

struct SingleRun {
  std::unique_ptr<NeuralModel> model;
  TrainResult result;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

SingleRun train_single(const NeuralSetup& setup, const TrainSchedule& schedule, double fraction) {
  const std::size_t n = setup.train.size();
  std::vector<std::size_t> held;
  if (fraction > 0.0) held = validation_folds(n, 1, fraction, schedule.seed)[0];
  std::vector<bool> is_held(n, false);
  for (std::size_t i : held) is_held[i] = true;
  std::vector<EncodedPost> tr;
  std::vector<EncodedPost> val;
  for (std::size_t i = 0; i < n; ++i) (is_held[i] ? val : tr).push_back(setup.train[i]);
  SingleRun run;
  run.model = make_model(setup.model);
  run.result = train(*run.model, tr, val, schedule);
  run.train_size = tr.size();
  run.validation_size = val.size();
  return run;
}

VoteResult train_vote(const NeuralSetup& setup, const TrainSchedule& schedule, const VoteOptions& v,
                      std::uint64_t seed) {
  VoteConfig vc;
  vc.num_runs = v.runs;
  vc.validation_fraction = v.validation_fraction;
  vc.checkpoint_epochs = epoch_range(schedule.epochs_min, schedule.epochs_max);
  vc.master_seed = seed;
  vc.threads = v.threads;
  std::vector<StanceLabel> labels;
  std::vector<std::string> ids;
  for (const EncodedPost& p : setup.train) labels.push_back(p.gold);
  for (const EncodedPost& p : setup.eval) ids.push_back(p.id);
  return run_vote_scheme(neural_run_trainer(setup.model, schedule, setup.train, setup.eval), labels,
                         ids, vc);
}

std::string artifact(ModelId m, const std::string& topic, const std::string& ext) {
  return topic + "." + model_name(m) + ext;
}

}  // namespace

std::vector<StanceLabel> fit_predict(Session& s, const std::string& topic, const std::string& target,
                                     ModelId m, const Hyperparameters& h,
                                     const std::vector<Post>& train, const std::vector<Post>& eval) {
  (void)topic;
  if (train.empty()) throw ValidationError("no training posts");
  switch (m) {
    case ModelId::kSen: {
      const TokenizedSplit t = tokenize_split(s, train);
      const auto pipe = fit_sen_pipeline(s, target, t);
      return predict_sen(s, *pipe, train_sen(*pipe, t, train, h), eval);
    }
    case ModelId::kTwoStep: {
      const TokenizedSplit t = tokenize_split(s, train);
      const CascadeModel cm = cascade_train(cascade_examples(t, train), cascade_config(h),
                                            s.resources().features, target);
      return predict_cascade(s, cm, eval);
    }
    default:
      break;
  }
  const NeuralSetup setup = prepare_neural(s, target, m, train, eval, h.schedule.seed);
  if (s.config().vote.enabled) return train_vote(setup, h.schedule, s.config().vote, h.schedule.seed).labels;
  SingleRun run = train_single(setup, h.schedule, s.config().neural.validation_fraction);
  std::vector<StanceLabel> out;
  for (const EncodedPost& p : setup.eval) out.push_back(run.model->predict(p));
  return out;
}

ordered_json train_topic(Session& s, const std::string& topic, ModelId m) {
  const TopicDataset& ds = s.dataset(topic);
  const Hyperparameters h = s.config().resolve(topic, m);
  ordered_json report;
  report["config_hash"] = s.config().hash_hex();
  report["seed"] = s.config().seed;
  report["topic"] = topic;
  report["model"] = model_name(m);
  report["hyperparameters"] = to_json(h, m);
  report["train_size"] = ds.train.size();

  const fs::path base = s.output_path("models", artifact(m, topic, ""));
  switch (m) {
    case ModelId::kSen: {
      const TokenizedSplit t = tokenize_split(s, ds.train);
      const auto pipe = fit_sen_pipeline(s, ds.target, t);
      const LinearModel lm = train_sen(*pipe, t, ds.train, h);
      save_linear_model(lm, base.string() + ".model");
      report["feature_hash"] = hex64(lm.feature_hash);
      report["feature_dim"] = pipe->dimension();
      report["artifacts"] = {base.filename().string() + ".model"};
      break;
    }
    case ModelId::kTwoStep: {
      const TokenizedSplit t = tokenize_split(s, ds.train);
      const CascadeModel cm = cascade_train(cascade_examples(t, ds.train), cascade_config(h),
                                            s.resources().features, ds.target);
      save_binary_model(cm.stage1, cm.stage1_features->hash(), base.string() + ".stage1");
      save_binary_model(cm.stage2, cm.stage2_features->hash(), base.string() + ".stage2");
      report["stage1_train_size"] = cm.stage1_train_size;
      report["stage2_train_size"] = cm.stage2_train_size;
      report["artifacts"] = {base.filename().string() + ".stage1", base.filename().string() + ".stage2"};
      break;
    }
    default: {
      const NeuralSetup setup = prepare_neural(s, ds.target, m, ds.train, ds.test, h.schedule.seed);
      if (s.config().vote.enabled) {
        const VoteResult v = train_vote(setup, h.schedule, s.config().vote, h.schedule.seed);
        v.matrix.save(base.string() + ".votes.tsv", s.stamp(topic, m));
        report["vote_runs"] = v.matrix.runs();
        report["checkpoint_epochs"] = v.matrix.checkpoint_epochs();
        std::vector<std::string> order;
        for (StanceLabel l : v.tie_break) order.emplace_back(to_string(l));
        report["tie_break"] = order;
        report["artifacts"] = {base.filename().string() + ".votes.tsv"};
      } else {
        SingleRun run = train_single(setup, h.schedule, s.config().neural.validation_fraction);
        save_checkpoint(*run.model, h.schedule.hash(), base.string() + ".ckpt");
        report["fit_size"] = run.train_size;
        report["validation_size"] = run.validation_size;
        report["best_epoch"] = run.result.best_epoch;
        report["train_loss"] = run.result.train_loss;
        report["validation_metric"] = run.result.validation_metric;
        report["artifacts"] = {base.filename().string() + ".ckpt"};
      }
      break;
    }
  }
  std::ofstream(base.string() + ".train.json") << report.dump(2) << '\n';
  return report;
}

std::vector<StanceLabel> predict_topic(Session& s, const std::string& topic, ModelId m) {
  const TopicDataset& ds = s.dataset(topic);
  const Hyperparameters h = s.config().resolve(topic, m);
  const fs::path base = s.config().output_dir / "models" / artifact(m, topic, "");
  auto need = [](const fs::path& p) {
    if (!fs::exists(p)) throw ValidationError("missing model artifact " + p.string() + " (run 'train' first)");
    return p;
  };
  switch (m) {
    case ModelId::kSen: {
      // The feature pipeline is refitted deterministically; the stored hash
      // confirms it matches the one used in training.
      const TokenizedSplit t = tokenize_split(s, ds.train);
      const auto pipe = fit_sen_pipeline(s, ds.target, t);
      const LinearModel lm = load_linear_model(need(base.string() + ".model"), pipe->hash());
      return predict_sen(s, *pipe, lm, ds.test);
    }
    case ModelId::kTwoStep: {
      const TokenizedSplit t = tokenize_split(s, ds.train);
      const CascadeConfig cc = cascade_config(h);
      CascadeModel cm;
      cm.stage1_features = std::make_shared<FeaturePipeline>(cc.stage1_blocks, s.resources().features, ds.target);
      cm.stage2_features = std::make_shared<FeaturePipeline>(cc.stage2_blocks, s.resources().features, ds.target);
      std::vector<FeatureInput> relevant;
      for (std::size_t i = 0; i < ds.train.size(); ++i) {
        if (ds.train[i].gold != StanceLabel::kNone) relevant.push_back(t.inputs[i]);
      }
      cm.stage1_features->fit(t.inputs);
      cm.stage2_features->fit(relevant);
      cm.stage1 = load_binary_model(need(base.string() + ".stage1"), cm.stage1_features->hash());
      cm.stage2 = load_binary_model(need(base.string() + ".stage2"), cm.stage2_features->hash());
      return predict_cascade(s, cm, ds.test);
    }
    default:
      break;
  }
  if (s.config().vote.enabled) {
    const PredictionMatrix matrix = PredictionMatrix::load(need(base.string() + ".votes.tsv"));
    if (matrix.post_ids() != ids_of(ds.test)) {
      throw ValidationError(base.string() + ".votes.tsv does not match the " + topic + " test split");
    }
    return vote(matrix, default_tie_break(gold_of(ds.train)));
  }
  const NeuralSetup setup = prepare_neural(s, ds.target, m, ds.train, ds.test, h.schedule.seed);
  auto model = load_checkpoint(need(base.string() + ".ckpt"), h.schedule.hash());
  std::vector<StanceLabel> out;
  for (const EncodedPost& p : setup.eval) out.push_back(model->predict(p));
  return out;
}

fs::path predictions_path(const Session& s, const std::string& topic, const std::string& model) {
  return s.config().output_dir / "predictions" / (topic + "." + model + ".tsv");
}

fs::path predictions_path(const Session& s, const std::string& topic, ModelId m) {
  return predictions_path(s, topic, model_name(m));
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs at least 2 folds");
  if (n < k) throw ValidationError("cannot split " + std::to_string(n) + " posts into " + std::to_string(k) + " folds");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(idx[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

ordered_json tune_topic(Session& s, const TrackedDataset& ds, ModelId m) {
  const RunConfig& cfg = s.config();
  const std::vector<Post>& train = ds.train();
  const auto folds = kfold_indices(train.size(), cfg.tune.folds, cfg.seed);

  std::vector<std::string> keys;
  std::vector<std::vector<double>> values;
  for (const auto& [k, v] : cfg.tune.grid) {
    keys.push_back(k);
    values.push_back(v);
  }
  ordered_json report;
  report["config_hash"] = cfg.hash_hex();
  report["seed"] = cfg.seed;
  report["topic"] = ds.topic();
  report["model"] = model_name(m);
  report["folds"] = cfg.tune.folds;
  report["grid"] = cfg.tune.grid;
  ordered_json points = ordered_json::array();
  std::optional<double> best_score;
  ordered_json best;

  std::vector<std::size_t> pos(keys.size(), 0);
  while (true) {
    Hyperparameters h = cfg.resolve(ds.topic(), m);
    ordered_json params = ordered_json::object();
    for (std::size_t i = 0; i < keys.size(); ++i) {
      set_hyperparameter(h, m, keys[i], values[i][pos[i]], "tune.grid");
      params[keys[i]] = values[i][pos[i]];
    }
    if (neural_kind(m)) h.schedule.validate();
    std::vector<double> scores;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<bool> held(train.size(), false);
      for (std::size_t i : folds[f]) held[i] = true;
      std::vector<Post> fit;
      std::vector<Post> val;
      for (std::size_t i = 0; i < train.size(); ++i) (held[i] ? val : fit).push_back(train[i]);
      const auto pred = fit_predict(s, ds.topic(), ds.target(), m, h, fit, val);
      scores.push_back(macro_f1_favor_against(pred, gold_of(val)).official);
    }
    const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    points.push_back({{"params", params}, {"fold_scores", scores}, {"mean", mean}});
    if (!best_score || mean > *best_score) {
      best_score = mean;
      best = {{"params", params}, {"mean", mean}, {"hyperparameters", to_json(h, m)}};
    }
    std::size_t i = 0;
    while (i < pos.size() && ++pos[i] == values[i].size()) pos[i++] = 0;
    if (i == pos.size()) break;
  }
  report["results"] = points;
  report["best"] = best;
  return report;
}

}  // namespace stance
