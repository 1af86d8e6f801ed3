// Command-line driver: stance <command> [--config PATH] [--topic T] ...
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "stance/diagnostics.h"
#include "stance/error.h"
#include "stance/evaluation.h"
#include "stance/external_adapter.h"
#include "stance/pipeline.h"
#include "stance/text_util.h"

namespace fs = std::filesystem;
using namespace stance;
using nlohmann::ordered_json;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> topics;
  std::vector<std::string> models;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool reference_rows = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Run configuration (JSON)");
  cmd->add_option("--topic", o.topics, "Topic code; repeat or comma-separate")->delimiter(',');
  cmd->add_option("--model", o.models, "sen, two-step, lstm, cnn, tan or tan-")->delimiter(',');
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--out", o.out, "Output directory");
}

RunConfig build_config(const CommonOptions& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (!o.topics.empty()) cfg.topics = o.topics;
  if (!o.models.empty()) {
    cfg.compare_models = o.models;
    if (const auto m = parse_model_id(o.models.front())) cfg.model = *m;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  return cfg;
}

std::vector<std::string> compared_models(const RunConfig& cfg) {
  return cfg.compare_models.empty() ? std::vector<std::string>{model_name(cfg.model)} : cfg.compare_models;
}

// train, predict and tune need a model this toolkit implements.
ModelId native_model(const CommonOptions& o, const RunConfig& cfg) {
  if (o.models.size() > 1) throw ConfigError("--model: this command takes one model");
  if (!o.models.empty() && !parse_model_id(o.models.front())) {
    throw ConfigError("--model: unknown model '" + o.models.front() + "'");
  }
  return cfg.model;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << body;
}

std::vector<StanceLabel> gold_of(const std::vector<Post>& posts) {
  std::vector<StanceLabel> g;
  for (const Post& p : posts) g.push_back(p.gold);
  return g;
}

// Predictions for a topic's test split from output_dir/predictions.
std::vector<StanceLabel> load_topic_predictions(Session& s, const std::string& topic, const std::string& model) {
  const TopicDataset& ds = s.dataset(topic);
  return import_predictions(predictions_path(s, topic, model), ds).in_test_order(ds);
}

int cmd_ingest(Session& s) {
  ordered_json manifest;
  manifest["config_hash"] = s.config().hash_hex();
  manifest["seed"] = s.config().seed;
  for (const auto& [topic, ds] : s.datasets()) {
    validate(ds);
    write_semeval(ds.train, s.output_path("data", topic + ".train.tsv"));
    write_semeval(ds.test, s.output_path("data", topic + ".test.tsv"));
    write_split_manifest(ds, s.output_path("data", topic + ".split.tsv"));
    manifest["topics"][topic] = {{"target", ds.target}, {"train", ds.train.size()}, {"test", ds.test.size()}};
    std::cout << topic << "\ttrain " << ds.train.size() << "\ttest " << ds.test.size() << '\n';
  }
  write_text(s.output_path("data", "ingest.json"), manifest.dump(2) + "\n");
  return 0;
}

int cmd_stats(Session& s) {
  const auto start = std::chrono::steady_clock::now();
  const std::string table = format_stats(s.datasets());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << table;
  std::cerr << "loaded in " << fmt("%.3f", secs) << " s\n";
  return 0;
}

int cmd_preprocess(Session& s, const std::string& mode_name) {
  PreprocessMode mode;
  if (mode_name == "classical") {
    mode = PreprocessMode::kClassical;
  } else if (mode_name == "embedding") {
    mode = PreprocessMode::kEmbedding;
  } else {
    throw ConfigError("--mode must be classical or embedding");
  }
  for (const auto& [topic, ds] : s.datasets()) {
    for (const auto& [split, posts] : {std::pair{"train", &ds.train}, std::pair{"test", &ds.test}}) {
      std::string body = "# " + s.config().stamp() + " mode=" + mode_name + "\n";
      for (const Post& p : *posts) {
        body += p.id + "\t";
        const TokenSequence toks = s.tokens(p, mode);
        for (std::size_t i = 0; i < toks.size(); ++i) body += (i ? " " : "") + toks[i].text;
        body += "\n";
      }
      const fs::path path = s.output_path("preprocessed", topic + "." + split + ".tsv");
      write_text(path, body);
      std::cout << path.string() << '\n';
    }
  }
  return 0;
}

int cmd_train(Session& s, ModelId m) {
  for (const std::string& topic : s.topics()) {
    const ordered_json r = train_topic(s, topic, m);
    std::cout << topic << "\t" << model_name(m) << "\ttrained on " << r["train_size"].get<std::size_t>();
    if (r.contains("best_epoch")) std::cout << "\tbest epoch " << r["best_epoch"].get<std::size_t>();
    std::cout << '\n';
  }
  return 0;
}

int cmd_predict(Session& s, ModelId m) {
  for (const std::string& topic : s.topics()) {
    const TopicDataset& ds = s.dataset(topic);
    const std::vector<StanceLabel> labels = predict_topic(s, topic, m);
    std::vector<PredictionRow> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) rows.push_back({ds.test[i].id, labels[i]});
    fs::create_directories(predictions_path(s, topic, m).parent_path());
    write_predictions(predictions_path(s, topic, m), rows, s.stamp(topic, m));
    std::cout << predictions_path(s, topic, m).string() << '\n';
  }
  return 0;
}

int cmd_evaluate(Session& s, const std::string& predictions) {
  const std::string model = compared_models(s.config()).front();
  std::vector<std::string> topics = s.topics();
  if (!predictions.empty() && topics.size() != 1) {
    throw ConfigError("--predictions needs exactly one topic (use --topic)");
  }
  ordered_json report;
  report["config_hash"] = s.config().hash_hex();
  report["seed"] = s.config().seed;
  std::vector<TopicPredictions> pooled;
  std::string name = model;
  std::cout << "topic\tofficial\tf1_favor\tf1_against\n";
  for (const std::string& topic : topics) {
    const TopicDataset& ds = s.dataset(topic);
    const fs::path path = predictions.empty() ? predictions_path(s, topic, model) : fs::path(predictions);
    const ExternalPredictionSet set = import_predictions(path, ds);
    if (!predictions.empty()) name = set.model;
    const std::vector<StanceLabel> pred = set.in_test_order(ds);
    const MetricReport r = macro_f1_favor_against(pred, gold_of(ds.test));
    pooled.push_back({topic, pred, gold_of(ds.test)});
    report["topics"][topic] = to_json(r);
    std::cout << topic << '\t' << fmt("%.4f", r.official) << '\t' << fmt("%.4f", r.per_class[0].f1) << '\t'
              << fmt("%.4f", r.per_class[1].f1) << '\n';
  }
  report["model"] = name;
  if (topics.size() > 1) {
    const MetricReport total = pooled_overall(pooled);
    report["total"] = to_json(total);
    std::cout << "TOTAL\t" << fmt("%.4f", total.official) << '\t' << fmt("%.4f", total.per_class[0].f1) << '\t'
              << fmt("%.4f", total.per_class[1].f1) << '\n';
  }
  write_text(s.output_path("reports", name + ".evaluation.json"), report.dump(2) + "\n");
  return 0;
}

std::optional<Benchmark> benchmark_for(const std::vector<std::string>& topics) {
  for (Benchmark b : {Benchmark::kSemEval, Benchmark::kMpchi}) {
    const auto ref = reference_topics(b);
    bool all = true;
    for (const std::string& t : topics) all = all && std::find(ref.begin(), ref.end(), t) != ref.end();
    if (all) return b;
  }
  return std::nullopt;
}

int cmd_compare(Session& s, bool reference_rows) {
  const std::vector<std::string> topics = s.topics();
  const auto bench = benchmark_for(topics);
  std::vector<std::string> columns = topics;
  if (bench) {
    columns.clear();
    for (const std::string& t : reference_topics(*bench)) {
      if (std::find(topics.begin(), topics.end(), t) != topics.end()) columns.push_back(t);
    }
  }
  std::vector<ModelResults> results;
  for (const std::string& name : compared_models(s.config())) {
    ModelResults r;
    r.model = name;
    std::vector<TopicPredictions> pooled;
    for (const std::string& t : topics) {
      const auto pred = load_topic_predictions(s, t, r.model);
      const auto gold = gold_of(s.dataset(t).test);
      r.per_topic[t] = macro_f1_favor_against(pred, gold).official;
      pooled.push_back({t, pred, gold});
    }
    r.total = pooled_overall(pooled).official;
    results.push_back(r);
  }
  std::vector<ModelResults> refs;
  if (reference_rows) {
    if (!bench) throw ConfigError("--reference-rows needs topics from a single benchmark");
    refs = reference_results(*bench);
  }
  const ComparisonTable table = render_comparison(results, columns, refs);
  const std::string header = "# " + s.config().stamp() + "\n";
  write_text(s.output_path("reports", "comparison.txt"), header + table.to_text());
  write_text(s.output_path("reports", "comparison.tsv"), header + table.to_tsv());
  ordered_json j;
  j["config_hash"] = s.config().hash_hex();
  j["seed"] = s.config().seed;
  j["table"] = table.to_json();
  write_text(s.output_path("reports", "comparison.json"), j.dump(2) + "\n");
  std::cout << table.to_text();
  return 0;
}

int cmd_error_analysis(Session& s) {
  std::map<std::string, std::vector<StanceLabel>> preds;
  std::vector<Post> posts;
  for (const std::string& t : s.topics()) {
    const TopicDataset& ds = s.dataset(t);
    posts.insert(posts.end(), ds.test.begin(), ds.test.end());
    for (const std::string& name : compared_models(s.config())) {
      const auto p = load_topic_predictions(s, t, name);
      auto& all = preds[name];
      all.insert(all.end(), p.begin(), p.end());
    }
  }
  const ErrorAnalysisReport r = all_models_missed(preds, posts);
  ordered_json j;
  j["config_hash"] = s.config().hash_hex();
  j["seed"] = s.config().seed;
  j["report"] = to_json(r);
  write_text(s.output_path("reports", "error_analysis.json"), j.dump(2) + "\n");
  std::cout << r.size() << " posts missed by every model\n";
  for (const auto& [topic, n] : r.per_topic) std::cout << topic << '\t' << n << '\n';
  return 0;
}

int cmd_grad_check(const RunConfig& cfg, std::size_t coords) {
  GradientSuiteConfig g;
  g.seed = cfg.seed;
  g.max_coords = coords;
  bool ok = true;
  for (const NamedGradCheck& c : run_gradient_suite(g)) {
    std::cout << c.name << ": " << c.report.describe() << '\n';
    ok = ok && c.report.passed;
  }
  return ok ? 0 : 2;
}

int cmd_theorem_check(const RunConfig& cfg, std::size_t trials, std::size_t posts) {
  TheoremSuiteConfig t;
  t.trials = trials;
  t.posts_per_trial = posts;
  t.seed = cfg.seed;
  const TheoremReport r = run_theorem_suite(t);
  std::cout << "trials " << r.trials << " x posts " << r.posts_per_trial << '\n'
            << "max attention deviation " << fmt("%.3e", r.max_attention_deviation) << '\n'
            << "max tan/tan- output deviation " << fmt("%.3e", r.max_output_deviation) << '\n'
            << "max tan/tan- output deviation, target weights zeroed " << fmt("%.3e", r.max_output_deviation_zeroed)
            << '\n'
            << "max attention sum error " << fmt("%.3e", r.max_attention_sum_error) << '\n';
  const bool ok = r.max_attention_deviation <= 1e-10 && r.max_output_deviation <= 1e-12 &&
                  r.max_output_deviation_zeroed <= 1e-12;
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : 2;
}

int cmd_import_external(Session& s, const std::string& path, const std::string& name) {
  if (path.empty()) throw ConfigError("--predictions is required");
  const auto topics = s.topics();
  if (topics.size() != 1) throw ConfigError("import-external needs exactly one topic (use --topic)");
  const TopicDataset& ds = s.dataset(topics[0]);
  ExternalPredictionSet set = import_predictions(path, ds);
  if (!name.empty()) set.model = name;
  std::vector<PredictionRow> rows;
  for (const Post& p : ds.test) rows.push_back({p.id, set.labels.at(p.id)});
  const fs::path out = predictions_path(s, ds.topic, set.model);
  fs::create_directories(out.parent_path());
  write_predictions(out, rows,
                    {s.config().stamp(), "model=" + set.model, "topic=" + ds.topic, "provenance=" + set.provenance});
  std::cout << out.string() << '\t' << rows.size() << " predictions\n";
  return 0;
}

int cmd_tune(Session& s, ModelId m) {
  for (const std::string& topic : s.topics()) {
    const TrackedDataset tracked(s.dataset(topic));
    ordered_json r = tune_topic(s, tracked, m);
    r["test_split_reads"] = tracked.test_reads();
    if (tracked.test_reads() != 0) throw Error("tuning read the test split of " + topic);
    write_text(s.output_path("reports", topic + "." + model_name(m) + ".tune.json"), r.dump(2) + "\n");
    std::cout << topic << "\tbest " << r["best"]["params"].dump() << "\tmean "
              << fmt("%.4f", r["best"]["mean"].get<double>()) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stance detection toolkit"};
  app.require_subcommand(1);
  CommonOptions opts;
  std::string mode = "classical";
  std::string predictions;
  std::string external_name;
  std::size_t trials = 100;
  std::size_t posts = 10;
  std::size_t coords = 200;

  auto* ingest = app.add_subcommand("ingest", "Load, validate and write the configured datasets");
  auto* stats = app.add_subcommand("stats", "Per-topic class counts for train and test");
  auto* preprocess = app.add_subcommand("preprocess", "Write preprocessed token streams");
  preprocess->add_option("--mode", mode, "classical or embedding");
  auto* train = app.add_subcommand("train", "Train a model per topic");
  auto* predict = app.add_subcommand("predict", "Label each topic's test split");
  auto* evaluate = app.add_subcommand("evaluate", "Official metric of a model's predictions");
  evaluate->add_option("--predictions", predictions, "Predictions file (one topic)");
  auto* compare = app.add_subcommand("compare", "Comparison table across models and topics");
  compare->add_flag("--reference-rows", opts.reference_rows, "Include published results");
  auto* errors = app.add_subcommand("error-analysis", "Posts that every model gets wrong");
  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  grad->add_option("--coords", coords, "Sampled coordinates per parameter");
  auto* theorem = app.add_subcommand("theorem-check", "Target invariance of the attention weights");
  theorem->add_option("--trials", trials, "Random initialisations");
  theorem->add_option("--posts", posts, "Random posts per initialisation");
  auto* external = app.add_subcommand("import-external", "Import predictions produced elsewhere");
  external->add_option("--predictions", predictions, "post_id<TAB>label file")->required();
  external->add_option("--name", external_name, "Model name (default: from the file)");
  auto* tune = app.add_subcommand("tune", "Grid search with k-fold CV on the train split");
  for (CLI::App* cmd : app.get_subcommands({})) add_common(cmd, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const RunConfig cfg = build_config(opts);
    Session s(cfg);
    if (ingest->parsed()) return cmd_ingest(s);
    if (stats->parsed()) return cmd_stats(s);
    if (preprocess->parsed()) return cmd_preprocess(s, mode);
    if (train->parsed()) return cmd_train(s, native_model(opts, cfg));
    if (predict->parsed()) return cmd_predict(s, native_model(opts, cfg));
    if (evaluate->parsed()) return cmd_evaluate(s, predictions);
    if (compare->parsed()) return cmd_compare(s, opts.reference_rows);
    if (errors->parsed()) return cmd_error_analysis(s);
    if (grad->parsed()) return cmd_grad_check(cfg, coords);
    if (theorem->parsed()) return cmd_theorem_check(cfg, trials, posts);
    if (external->parsed()) return cmd_import_external(s, predictions, external_name);
    if (tune->parsed()) return cmd_tune(s, native_model(opts, cfg));
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
